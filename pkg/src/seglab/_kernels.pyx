# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled nonlinear SOR sweeps for the competing system.

Each sweep visits nodes lexicographically and, at each node, updates every
component in turn from the semi-implicit node equation

    (D + beta * w_i * sum_j a_ij |u_j|^(p+1) + g_i^-) u_i = nb_i + g_i^+ u_i^old

where ``D`` is the stencil diagonal, ``nb_i`` the neighbor sum,
``w_i = (u_i^2 + eps^2)^((p-1)/2)`` and ``f_i = g_i u_i``.  The step is
computed in correction form from neighbor differences, which keeps the
rounding floor of the converged residual low on fine grids, and relaxed
by ``omega``.  Arrays are modified in place.
"""
from libc.math cimport pow, fabs


cdef inline double _node_update(double[:, ::1] a, double beta, double p, double eps,
                                int family, double[::1] lam, double[:, ::1] b,
                                double[::1] vals, int i, int d, double nb, double diag) noexcept nogil:
    cdef double ui = vals[i]
    cdef double w, c = 0.0, g = 0.0, s, pw
    cdef int j
    cdef bint unit = p == 1.0
    if unit:
        w = 1.0
    else:
        w = pow(ui * ui + eps * eps, 0.5 * (p - 1.0))
    for j in range(d):
        if a[i, j] != 0.0 or (family == 2 and b[i, j] != 0.0):
            s = vals[j]
            if unit:
                pw = s * s
            else:
                pw = pow(fabs(s), p + 1.0)
            c += a[i, j] * pw
            if family == 2:
                g += b[i, j] * pw
    c *= beta * w
    if family == 2:
        g = w * g - lam[i]
    elif family == 1:
        g = -lam[i]
    # nb is the neighbor *difference* sum, so this is the correction, not the value
    if g >= 0.0:
        return (nb + (g - c) * ui) / (diag + c)
    return (nb - (c - g) * ui) / (diag + c - g)


def sweep_1d(double[:, ::1] u, double hx, double[:, ::1] a, double beta, double p,
             double eps, int family, double[::1] lam, double[:, ::1] b,
             double omega, int nsweeps):
    cdef Py_ssize_t d = u.shape[0], nx = u.shape[1]
    cdef Py_ssize_t k, i
    cdef int it
    cdef double ihx2 = 1.0 / (hx * hx)
    cdef double diag = 2.0 * ihx2
    cdef double nb, du
    cdef double[::1] vals = lam.copy()
    with nogil:
        for it in range(nsweeps):
            for k in range(1, nx - 1):
                for i in range(d):
                    vals[i] = u[i, k]
                for i in range(d):
                    nb = ((u[i, k - 1] - vals[i]) + (u[i, k + 1] - vals[i])) * ihx2
                    du = _node_update(a, beta, p, eps, family, lam, b, vals, <int>i, <int>d, nb, diag)
                    vals[i] = vals[i] + omega * du
                    u[i, k] = vals[i]


def sweep_2d(double[:, :, ::1] u, double hx, double hy, double[:, ::1] a, double beta,
             double p, double eps, int family, double[::1] lam, double[:, ::1] b,
             double omega, int nsweeps):
    cdef Py_ssize_t d = u.shape[0], nx = u.shape[1], ny = u.shape[2]
    cdef Py_ssize_t kx, ky, i
    cdef int it
    cdef double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy)
    cdef double diag = 2.0 * (ihx2 + ihy2)
    cdef double nb, du
    cdef double[::1] vals = lam.copy()
    with nogil:
        for it in range(nsweeps):
            for kx in range(1, nx - 1):
                for ky in range(1, ny - 1):
                    for i in range(d):
                        vals[i] = u[i, kx, ky]
                    for i in range(d):
                        nb = (((u[i, kx - 1, ky] - vals[i]) + (u[i, kx + 1, ky] - vals[i])) * ihx2
                              + ((u[i, kx, ky - 1] - vals[i]) + (u[i, kx, ky + 1] - vals[i])) * ihy2)
                        du = _node_update(a, beta, p, eps, family, lam, b, vals, <int>i, <int>d, nb, diag)
                        vals[i] = vals[i] + omega * du
                        u[i, kx, ky] = vals[i]
