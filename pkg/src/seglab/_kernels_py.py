"""Pure-Python nonlinear SOR sweeps; same arithmetic as the compiled kernels.

Used when the extension is not built (or ``SEGLAB_PURE_PYTHON=1``).  It is
orders of magnitude slower and intended for small grids and cross-checks.
"""


def _node_update(a, beta, p, eps, family, lam, b, vals, i, d, nb, diag):
    ui = vals[i]
    unit = p == 1.0
    w = 1.0 if unit else (ui * ui + eps * eps) ** (0.5 * (p - 1.0))
    c = 0.0
    g = 0.0
    ai = a[i]
    bi = b[i]
    for j in range(d):
        if ai[j] != 0.0 or (family == 2 and bi[j] != 0.0):
            s = vals[j]
            pw = s * s if unit else abs(s) ** (p + 1.0)
            c += ai[j] * pw
            if family == 2:
                g += bi[j] * pw
    c *= beta * w
    if family == 2:
        g = w * g - lam[i]
    elif family == 1:
        g = -lam[i]
    if g >= 0.0:
        return (nb + (g - c) * ui) / (diag + c)
    return (nb - (c - g) * ui) / (diag + c - g)


def sweep_1d(u, hx, a, beta, p, eps, family, lam, b, omega, nsweeps):
    d, nx = u.shape
    rows = u.tolist()
    a = a.tolist()
    b = b.tolist()
    lam = lam.tolist()
    ihx2 = 1.0 / (hx * hx)
    diag = 2.0 * ihx2
    vals = [0.0] * d
    for _ in range(nsweeps):
        for k in range(1, nx - 1):
            for i in range(d):
                vals[i] = rows[i][k]
            for i in range(d):
                r = rows[i]
                v = vals[i]
                nb = ((r[k - 1] - v) + (r[k + 1] - v)) * ihx2
                du = _node_update(a, beta, p, eps, family, lam, b, vals, i, d, nb, diag)
                vals[i] = v + omega * du
                r[k] = vals[i]
    u[...] = rows


def sweep_2d(u, hx, hy, a, beta, p, eps, family, lam, b, omega, nsweeps):
    d, nx, ny = u.shape
    grid = u.tolist()
    a = a.tolist()
    b = b.tolist()
    lam = lam.tolist()
    ihx2 = 1.0 / (hx * hx)
    ihy2 = 1.0 / (hy * hy)
    diag = 2.0 * (ihx2 + ihy2)
    vals = [0.0] * d
    for _ in range(nsweeps):
        for kx in range(1, nx - 1):
            for ky in range(1, ny - 1):
                for i in range(d):
                    vals[i] = grid[i][kx][ky]
                for i in range(d):
                    g = grid[i]
                    v = vals[i]
                    nb = (((g[kx - 1][ky] - v) + (g[kx + 1][ky] - v)) * ihx2
                          + ((g[kx][ky - 1] - v) + (g[kx][ky + 1] - v)) * ihy2)
                    du = _node_update(a, beta, p, eps, family, lam, b, vals, i, d, nb, diag)
                    vals[i] = v + omega * du
                    g[kx][ky] = vals[i]
    u[...] = grid
