# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Lucas-Kanade level kernel. Semantics mirror _lk_np exactly."""

import numpy as np

from libc.math cimport floor, sqrt, fabs

DEF FLAG_OK = 0
DEF FLAG_TEMPLATE_OOB = 1
DEF FLAG_LOW_EIG = 2
DEF FLAG_TARGET_OOB = 3


cdef inline double _sample(double[:, ::1] img, double x, double y) nogil:
    cdef Py_ssize_t ix = <Py_ssize_t>floor(x)
    cdef Py_ssize_t iy = <Py_ssize_t>floor(y)
    cdef double fx = x - ix
    cdef double fy = y - iy
    return (img[iy, ix] * (1.0 - fx) * (1.0 - fy)
            + img[iy, ix + 1] * fx * (1.0 - fy)
            + img[iy + 1, ix] * (1.0 - fx) * fy
            + img[iy + 1, ix + 1] * fx * fy)


def track_level(double[:, ::1] prev, double[:, ::1] next_img,
                double[:, ::1] gx, double[:, ::1] gy,
                double[:, ::1] pts, double[:, ::1] guess,
                int window, int max_iters, double eps,
                double min_eig_threshold):
    cdef Py_ssize_t h = prev.shape[0]
    cdef Py_ssize_t w = prev.shape[1]
    cdef Py_ssize_t n = pts.shape[0]
    cdef int r = window // 2
    cdef double n_px = <double>(window * window)

    disp_arr = np.array(guess, dtype=np.float64, copy=True)
    flags_arr = np.zeros(n, dtype=np.int32)
    residuals_arr = np.full(n, np.nan)
    cdef double[:, ::1] disp = disp_arr
    cdef int[::1] flags = flags_arr
    cdef double[::1] residuals = residuals_arr

    cdef double[::1] template = np.empty(window * window)
    cdef double[::1] grad_x = np.empty(window * window)
    cdef double[::1] grad_y = np.empty(window * window)

    cdef Py_ssize_t i, k
    cdef int it, offx, offy
    cdef double px, py, gxx, gxy, gyy, trace, min_eig, det
    cdef double dx, dy, cx, cy, bx, by, ddx, ddy, diff, acc

    for i in range(n):
        px = pts[i, 0]
        py = pts[i, 1]
        if not (px - r >= 0.0 and px + r < w - 1.0
                and py - r >= 0.0 and py + r < h - 1.0):
            flags[i] = FLAG_TEMPLATE_OOB
            continue
        k = 0
        gxx = 0.0
        gxy = 0.0
        gyy = 0.0
        for offy in range(-r, r + 1):
            for offx in range(-r, r + 1):
                template[k] = _sample(prev, px + offx, py + offy)
                grad_x[k] = _sample(gx, px + offx, py + offy)
                grad_y[k] = _sample(gy, px + offx, py + offy)
                gxx += grad_x[k] * grad_x[k]
                gxy += grad_x[k] * grad_y[k]
                gyy += grad_y[k] * grad_y[k]
                k += 1
        trace = gxx + gyy
        min_eig = (trace - sqrt((gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy)) / 2.0
        det = gxx * gyy - gxy * gxy
        if min_eig / n_px < min_eig_threshold or det <= 1e-12:
            flags[i] = FLAG_LOW_EIG
            continue

        dx = disp[i, 0]
        dy = disp[i, 1]
        for it in range(max_iters):
            cx = px + dx
            cy = py + dy
            if not (cx - r >= 0.0 and cx + r < w - 1.0
                    and cy - r >= 0.0 and cy + r < h - 1.0):
                flags[i] = FLAG_TARGET_OOB
                break
            bx = 0.0
            by = 0.0
            k = 0
            for offy in range(-r, r + 1):
                for offx in range(-r, r + 1):
                    diff = template[k] - _sample(next_img, cx + offx, cy + offy)
                    bx += diff * grad_x[k]
                    by += diff * grad_y[k]
                    k += 1
            ddx = (gyy * bx - gxy * by) / det
            ddy = (gxx * by - gxy * bx) / det
            dx += ddx
            dy += ddy
            if ddx * ddx + ddy * ddy < eps * eps:
                break
        disp[i, 0] = dx
        disp[i, 1] = dy
        if flags[i] == FLAG_TARGET_OOB:
            continue
        cx = px + dx
        cy = py + dy
        if not (cx - r >= 0.0 and cx + r < w - 1.0
                and cy - r >= 0.0 and cy + r < h - 1.0):
            flags[i] = FLAG_TARGET_OOB
            continue
        acc = 0.0
        k = 0
        for offy in range(-r, r + 1):
            for offx in range(-r, r + 1):
                acc += fabs(template[k] - _sample(next_img, cx + offx, cy + offy))
                k += 1
        residuals[i] = acc / n_px
    return disp_arr, flags_arr, residuals_arr
