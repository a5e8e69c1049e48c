"""Hot tracking kernels: compiled extension when built, numpy fallback otherwise."""

from . import _lk_np

FLAG_OK = _lk_np.FLAG_OK
FLAG_TEMPLATE_OOB = _lk_np.FLAG_TEMPLATE_OOB
FLAG_LOW_EIG = _lk_np.FLAG_LOW_EIG
FLAG_TARGET_OOB = _lk_np.FLAG_TARGET_OOB

try:
    from . import _lk_cy

    track_level = _lk_cy.track_level
    BACKEND = "compiled"
except ImportError:  # extension not built; pure Python still works
    track_level = _lk_np.track_level
    BACKEND = "python"
