"""Pure-numpy Lucas-Kanade level kernel (fallback when the compiled
extension is unavailable). Must mirror _lk_cy semantics exactly."""

import numpy as np

FLAG_OK = 0
FLAG_TEMPLATE_OOB = 1
FLAG_LOW_EIG = 2
FLAG_TARGET_OOB = 3


def _sample(img, xs, ys):
    ix = np.floor(xs).astype(np.int64)
    iy = np.floor(ys).astype(np.int64)
    fx = xs - ix
    fy = ys - iy
    i00 = img[iy, ix]
    i01 = img[iy, ix + 1]
    i10 = img[iy + 1, ix]
    i11 = img[iy + 1, ix + 1]
    return (i00 * (1 - fx) * (1 - fy) + i01 * fx * (1 - fy)
            + i10 * (1 - fx) * fy + i11 * fx * fy)


def track_level(prev, next_img, gx, gy, pts, guess, window,
                max_iters, eps, min_eig_threshold):
    """Refine one pyramid level of translations for all points.

    pts and guess are (N, 2) float64 arrays in this level's coordinates.
    Returns (displacement (N, 2), flag (N,), residual (N,)); points flagged
    TEMPLATE_OOB or LOW_EIG keep their incoming guess untouched.
    """
    h, w = prev.shape
    n = pts.shape[0]
    r = window // 2
    n_px = float(window * window)
    offs = np.arange(-r, r + 1, dtype=np.float64)
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    ox = ox.ravel()
    oy = oy.ravel()

    disp = guess.astype(np.float64).copy()
    flags = np.zeros(n, dtype=np.int32)
    residuals = np.full(n, np.nan)

    for i in range(n):
        px, py = pts[i, 0], pts[i, 1]
        if not (px - r >= 0.0 and px + r < w - 1.0
                and py - r >= 0.0 and py + r < h - 1.0):
            flags[i] = FLAG_TEMPLATE_OOB
            continue
        txs = px + ox
        tys = py + oy
        template = _sample(prev, txs, tys)
        grad_x = _sample(gx, txs, tys)
        grad_y = _sample(gy, txs, tys)
        gxx = float(np.dot(grad_x, grad_x))
        gxy = float(np.dot(grad_x, grad_y))
        gyy = float(np.dot(grad_y, grad_y))
        trace = gxx + gyy
        min_eig = (trace - np.sqrt((gxx - gyy) ** 2 + 4.0 * gxy * gxy)) / 2.0
        det = gxx * gyy - gxy * gxy
        if min_eig / n_px < min_eig_threshold or det <= 1e-12:
            flags[i] = FLAG_LOW_EIG
            continue

        dx, dy = disp[i, 0], disp[i, 1]
        for _ in range(max_iters):
            cx, cy = px + dx, py + dy
            if not (cx - r >= 0.0 and cx + r < w - 1.0
                    and cy - r >= 0.0 and cy + r < h - 1.0):
                flags[i] = FLAG_TARGET_OOB
                break
            warped = _sample(next_img, cx + ox, cy + oy)
            diff = template - warped
            bx = float(np.dot(diff, grad_x))
            by = float(np.dot(diff, grad_y))
            ddx = (gyy * bx - gxy * by) / det
            ddy = (gxx * by - gxy * bx) / det
            dx += ddx
            dy += ddy
            if ddx * ddx + ddy * ddy < eps * eps:
                break
        disp[i, 0], disp[i, 1] = dx, dy
        if flags[i] == FLAG_TARGET_OOB:
            continue
        cx, cy = px + dx, py + dy
        if not (cx - r >= 0.0 and cx + r < w - 1.0
                and cy - r >= 0.0 and cy + r < h - 1.0):
            flags[i] = FLAG_TARGET_OOB
            continue
        warped = _sample(next_img, cx + ox, cy + oy)
        residuals[i] = float(np.mean(np.abs(template - warped)))
    return disp, flags, residuals
