"""Finite-difference stencils and quadrature weights on the offset radial lattice.

The radial lattice is rho_j = (j + 1/2) * drho for j = 0..n_rho, with the last
node landing exactly on the contact latitude.  Nothing here knows about the
sphere; this module only manipulates 1-D node sets with uniform spacing.
"""

from __future__ import annotations

import numpy as np

# Stencil widths.  CENTER_HALF=2 gives the 5-point 4th-order interior stencil;
# EDGE_POINTS=6 keeps one-sided closures at 4th order for second derivatives.
CENTER_HALF = 2
EDGE_POINTS = 6
QUAD_WINDOW = 6


def fornberg_weights(x: np.ndarray, x0: float, max_deriv: int) -> np.ndarray:
    """Weights of derivatives 0..max_deriv at x0 from samples at nodes x.

    Classic recursive algorithm; returns array of shape (len(x), max_deriv+1)
    whose column k holds the weights of the k-th derivative.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((n, max_deriv + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, max_deriv)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def panel_weights(nodes: np.ndarray, a: float, b: float) -> np.ndarray:
    """Interpolatory weights: sum_k w_k p(x_k) == integral_a^b p for deg(p) < len(nodes).

    Solved through a scaled monomial Vandermonde system; the node windows used
    here are small (6 points), so conditioning is not a concern.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    center = 0.5 * (nodes[0] + nodes[-1])
    scale = max(0.5 * (nodes[-1] - nodes[0]), 1e-300)
    t = (nodes - center) / scale
    ta = (a - center) / scale
    tb = (b - center) / scale
    powers = np.arange(n)
    vander = t[None, :] ** powers[:, None]
    moments = scale * (tb ** (powers + 1) - ta ** (powers + 1)) / (powers + 1)
    return np.linalg.solve(vander, moments)


def radial_quadrature(rho: np.ndarray, drho: float) -> np.ndarray:
    """Weights w with sum_j w_j g(rho_j) ~ integral_0^theta g(rho) drho.

    Composite interpolatory rule over 6-node sliding windows, order ~6.  The
    plain midpoint weight drho per node is only 2nd-order accurate, which is
    not enough for the 1e-6 closed-form volume anchors on a 128x128 grid; the
    windowed rule keeps the bulk weights equal to drho and only perturbs the
    few nodes near rho=0 and rho=theta.
    """
    rho = np.asarray(rho, dtype=float)
    n = rho.size
    if n < QUAD_WINDOW:
        raise ValueError(f"radial rule needs at least {QUAD_WINDOW} nodes, got {n}")
    w = np.zeros(n)
    # Cap between the axis and the first node; extrapolatory but only drho/2 wide.
    w[:QUAD_WINDOW] += panel_weights(rho[:QUAD_WINDOW], 0.0, rho[0])
    for j in range(n - 1):
        lo = min(max(j - 2, 0), n - QUAD_WINDOW)
        sl = slice(lo, lo + QUAD_WINDOW)
        w[sl] += panel_weights(rho[sl], rho[j], rho[j + 1])
    if np.any(w <= 0.0):
        raise ValueError("radial quadrature produced non-positive weights")
    return w


def stencil_table(
    n_nodes: int,
    drho: float,
    deriv: int,
) -> list[list[tuple[int, float, bool]]]:
    """Per-row stencil entries (col, weight, mirrored) for d^deriv/drho^deriv.

    Rows near rho=0 reach across the pole: a ghost node at -(g+1/2)*drho holds
    the value of node g on the antipodal meridian, so its entries are flagged
    mirrored=True and the caller applies the phi -> phi+pi identification.
    The last two rows are closed with 6-point one-sided stencils.
    """
    if deriv not in (1, 2):
        raise ValueError("deriv must be 1 or 2")
    R = n_nodes
    h = drho
    offs = np.arange(-CENTER_HALF, CENTER_HALF + 1)
    centered = fornberg_weights(offs * h, 0.0, deriv)[:, deriv]

    rows: list[list[tuple[int, float, bool]]] = []

    def centered_row(j: int) -> list[tuple[int, float, bool]]:
        out = []
        for o, c in zip(offs, centered):
            col = j + int(o)
            if col < 0:
                out.append((-1 - col, float(c), True))
            else:
                out.append((col, float(c), False))
        return out

    for j in range(R):
        if j <= R - 1 - CENTER_HALF:
            rows.append(centered_row(j))
        else:
            idx = np.arange(R - EDGE_POINTS, R)
            w = fornberg_weights((idx - j) * h, 0.0, deriv)[:, deriv]
            rows.append([(int(k), float(c), False) for k, c in zip(idx, w)])
    return rows


def table_to_matrix(table, n_nodes: int, mirror_sign: float) -> np.ndarray:
    """Dense (R, R) matrix from a stencil table for one azimuthal parity class.

    mirror_sign is +1 for even Fourier modes and -1 for odd ones, realising the
    value flip that the phi -> phi+pi identification induces across the pole.
    """
    D = np.zeros((n_nodes, n_nodes))
    for j, row in enumerate(table):
        for col, val, mirrored in row:
            D[j, col] += val * (mirror_sign if mirrored else 1.0)
    return D
