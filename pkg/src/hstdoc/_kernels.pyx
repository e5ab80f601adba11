# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Pairwise layout-metric sums over a flat ``[x1, y1, x2, y2, ...]`` int64 buffer."""

from libc.math cimport fabs, log1p

cdef double G_CAP = 1.0 - 1e-12


cpdef double overlap_sum(const long long[::1] b, Py_ssize_t n):
    cdef Py_ssize_t i, j
    cdef double total = 0.0, area_i, iw, ih
    for i in range(n):
        area_i = <double>(b[4*i + 2] - b[4*i]) * <double>(b[4*i + 3] - b[4*i + 1])
        for j in range(n):
            if j == i:
                continue
            iw = <double>(min(b[4*i + 2], b[4*j + 2]) - max(b[4*i], b[4*j]))
            ih = <double>(min(b[4*i + 3], b[4*j + 3]) - max(b[4*i + 1], b[4*j + 1]))
            if iw > 0 and ih > 0:
                total += iw * ih / area_i
    return total


cpdef double alignment_sum(const long long[::1] b, Py_ssize_t n, double width):
    cdef Py_ssize_t i, j
    cdef double total = 0.0, g, d, cl_i, cc_i, cr_i
    for i in range(n):
        g = 1.0
        cl_i = <double>b[4*i]
        cr_i = <double>b[4*i + 2]
        cc_i = (cl_i + cr_i) / 2.0
        for j in range(n):
            if j == i:
                continue
            d = fabs(cl_i - <double>b[4*j])
            if d / width < g:
                g = d / width
            d = fabs(cc_i - (<double>b[4*j] + <double>b[4*j + 2]) / 2.0)
            if d / width < g:
                g = d / width
            d = fabs(cr_i - <double>b[4*j + 2])
            if d / width < g:
                g = d / width
        if g > G_CAP:
            g = G_CAP
        total += -log1p(-g)
    return total
