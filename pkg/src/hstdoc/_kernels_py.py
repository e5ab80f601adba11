"""Pure-Python twin of the compiled metric kernels (same loop order, same results)."""

import math

# a gap of a full canvas width would give log(0); boxes off-canvas saturate here
G_CAP = 1.0 - 1e-12


def overlap_sum(b, n):
    total = 0.0
    for i in range(n):
        x1, y1, x2, y2 = b[4 * i:4 * i + 4]
        area_i = float(x2 - x1) * float(y2 - y1)
        for j in range(n):
            if j == i:
                continue
            iw = float(min(x2, b[4 * j + 2]) - max(x1, b[4 * j]))
            ih = float(min(y2, b[4 * j + 3]) - max(y1, b[4 * j + 1]))
            if iw > 0 and ih > 0:
                total += iw * ih / area_i
    return total


def alignment_sum(b, n, width):
    total = 0.0
    for i in range(n):
        g = 1.0
        cl_i = float(b[4 * i])
        cr_i = float(b[4 * i + 2])
        cc_i = (cl_i + cr_i) / 2.0
        for j in range(n):
            if j == i:
                continue
            g = min(g, abs(cl_i - b[4 * j]) / width,
                    abs(cc_i - (b[4 * j] + b[4 * j + 2]) / 2.0) / width,
                    abs(cr_i - b[4 * j + 2]) / width)
        total += -math.log1p(-min(g, G_CAP))
    return total
