# cython: boundscheck=False, wraparound=False, cdivision=True
# Pairwise drift accumulation for the interacting-particle step.
#
# Accumulates sum_k W(x_i - x_k) for every i, where W is the tabulated
# mollified field: multilinear interpolation inside the table box and an
# inlined analytic far-field rule outside.  W is odd, so only ordered
# pairs are visited and the value is added to row i and subtracted from
# row k (the self term vanishes).
#
# Far-field modes:
#   0  zero field
#   1  smooth demo kernel with second-moment correction; params = (cc, a, b)
#      value = -z/(1+R^2) + cc * z * (a + b*R^2)/(1+R^2)^3
#   2  radial power law; params = (coef, pw): value = coef * R^pw * z
#   3  radial power law plus correction; params = (c1, p1, c2, p2)

from libc.math cimport pow

import numpy as np
cimport numpy as cnp


def pair_drift_1d(double[::1] x, double[::1] table, double spacing,
                  double edge, int far_mode, double[::1] fp,
                  double[::1] out):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nt = table.shape[0]
    cdef Py_ssize_t i, k, j
    cdef double inv_dx = 1.0 / spacing
    cdef double xi, z, az, u, w, v, r2, q
    cdef double cc = 0.0, aa = 0.0, bb = 0.0, c1 = 0.0, p1 = 0.0
    cdef double c2 = 0.0, p2 = 0.0
    if far_mode == 1:
        cc = fp[0]; aa = fp[1]; bb = fp[2]
    elif far_mode == 2:
        c1 = fp[0]; p1 = fp[1]
    elif far_mode == 3:
        c1 = fp[0]; p1 = fp[1]; c2 = fp[2]; p2 = fp[3]

    for i in range(n):
        xi = x[i]
        for k in range(i + 1, n):
            z = xi - x[k]
            az = -z if z < 0.0 else z
            if az <= edge:
                u = (z + edge) * inv_dx
                j = <Py_ssize_t> u
                if j > nt - 2:
                    j = nt - 2
                w = u - j
                v = (1.0 - w) * table[j] + w * table[j + 1]
            elif far_mode == 0:
                v = 0.0
            elif far_mode == 1:
                r2 = z * z
                q = 1.0 + r2
                v = -z / q + cc * z * (aa + bb * r2) / (q * q * q)
            elif far_mode == 2:
                v = c1 * pow(z * z, 0.5 * p1) * z
            else:
                r2 = z * z
                v = (c1 * pow(r2, 0.5 * p1) + c2 * pow(r2, 0.5 * p2)) * z
            out[i] += v
            out[k] -= v


def pair_drift_2d(double[:, ::1] x, double[:, :, ::1] table, double spacing,
                  double edge, int far_mode, double[::1] fp,
                  double[:, ::1] out):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nt = table.shape[0]
    cdef Py_ssize_t i, k, j0, j1
    cdef double inv_dx = 1.0 / spacing
    cdef double xi0, xi1, z0, z1, a0, a1, u0, u1, w0, w1, v0, v1
    cdef double r2, q, s, m00, m01, m10, m11
    cdef double cc = 0.0, aa = 0.0, bb = 0.0, c1 = 0.0, p1 = 0.0
    cdef double c2 = 0.0, p2 = 0.0
    cdef bint ks_fast = 0
    if far_mode == 1:
        cc = fp[0]; aa = fp[1]; bb = fp[2]
    elif far_mode == 2:
        c1 = fp[0]; p1 = fp[1]
        ks_fast = p1 == -2.0
    elif far_mode == 3:
        c1 = fp[0]; p1 = fp[1]; c2 = fp[2]; p2 = fp[3]

    for i in range(n):
        xi0 = x[i, 0]
        xi1 = x[i, 1]
        for k in range(i + 1, n):
            z0 = xi0 - x[k, 0]
            z1 = xi1 - x[k, 1]
            a0 = -z0 if z0 < 0.0 else z0
            a1 = -z1 if z1 < 0.0 else z1
            if a0 <= edge and a1 <= edge:
                u0 = (z0 + edge) * inv_dx
                u1 = (z1 + edge) * inv_dx
                j0 = <Py_ssize_t> u0
                j1 = <Py_ssize_t> u1
                if j0 > nt - 2:
                    j0 = nt - 2
                if j1 > nt - 2:
                    j1 = nt - 2
                w0 = u0 - j0
                w1 = u1 - j1
                m00 = (1.0 - w0) * (1.0 - w1)
                m01 = (1.0 - w0) * w1
                m10 = w0 * (1.0 - w1)
                m11 = w0 * w1
                v0 = (m00 * table[j0, j1, 0] + m01 * table[j0, j1 + 1, 0]
                      + m10 * table[j0 + 1, j1, 0] + m11 * table[j0 + 1, j1 + 1, 0])
                v1 = (m00 * table[j0, j1, 1] + m01 * table[j0, j1 + 1, 1]
                      + m10 * table[j0 + 1, j1, 1] + m11 * table[j0 + 1, j1 + 1, 1])
            elif far_mode == 0:
                v0 = 0.0
                v1 = 0.0
            elif far_mode == 1:
                r2 = z0 * z0 + z1 * z1
                q = 1.0 + r2
                s = -1.0 / q + cc * (aa + bb * r2) / (q * q * q)
                v0 = s * z0
                v1 = s * z1
            elif far_mode == 2:
                r2 = z0 * z0 + z1 * z1
                if ks_fast:
                    s = c1 / r2
                else:
                    s = c1 * pow(r2, 0.5 * p1)
                v0 = s * z0
                v1 = s * z1
            else:
                r2 = z0 * z0 + z1 * z1
                s = c1 * pow(r2, 0.5 * p1) + c2 * pow(r2, 0.5 * p2)
                v0 = s * z0
                v1 = s * z1
            out[i, 0] += v0
            out[i, 1] += v1
            out[k, 0] -= v0
            out[k, 1] -= v1
