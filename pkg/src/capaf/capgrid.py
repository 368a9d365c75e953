"""Geodesic polar grid on a spherical cap, with derivatives and quadrature.

The cap is the set of unit outward normals attainable by a convex surface
meeting the horizontal floor at a fixed angle theta; intrinsically it is a
geodesic ball of radius theta in the round 2-sphere.  Scalar fields are plain
float64 arrays of shape (n_rho + 1, n_phi): radial index slow, azimuthal index
fast.  Symmetric-tensor fields carry two extra trailing axes of length 2 and
store components in the orthonormal frame (e_rho, e_phi).

Node layout: rho_j = (j + 1/2) * drho with drho = theta / (n_rho + 1/2), so the
pole is never a node and the last row sits exactly on the boundary circle
rho = theta.  Azimuthal nodes are the n_phi equispaced angles on [0, 2*pi).
"""

from __future__ import annotations

import numpy as np

from ._stencil import radial_quadrature, stencil_table, table_to_matrix

MIN_RHO = 8
MIN_PHI = 8

# Certification gate for the Robin boundary condition, relative to the field's
# sup norm.  Deliberately loose: it separates structurally incompatible data
# (violations scale with cot(theta), order one) from discretisation noise on
# the coarsest supported grids.  Sharp statements are made by the
# refinement-order tests, not by this gate.
ROBIN_GATE = 5e-2


def cap_area(theta: float) -> float:
    """Area of the geodesic ball of radius theta in the unit sphere."""
    return 2.0 * np.pi * (1.0 - np.cos(theta))


class CapGrid:
    """Tensor-product grid on the cap; build through :func:`build_grid`.

    Attributes of note: ``rho_nodes`` (shape (n_rho+1,)), ``phi_nodes``
    (shape (n_phi,)), ``quad_weights`` (node weights for surface integrals,
    shape (n_rho+1, n_phi)), ``boundary_index`` (radial index of the boundary
    row).  Weights are strictly positive and sum to the cap area up to
    quadrature accuracy.
    """

    def __init__(self, theta: float, n_rho: int, n_phi: int):
        theta = float(theta)
        if not np.isfinite(theta) or not (0.0 < theta < np.pi):
            raise ValueError(f"invalid contact angle theta={theta!r}: need 0 < theta < pi")
        if int(n_rho) != n_rho or int(n_phi) != n_phi:
            raise ValueError("grid sizes must be integers")
        n_rho, n_phi = int(n_rho), int(n_phi)
        if n_rho < MIN_RHO or n_phi < MIN_PHI:
            raise ValueError(
                f"grid too coarse: need n_rho >= {MIN_RHO} and n_phi >= {MIN_PHI}, "
                f"got {n_rho}x{n_phi}"
            )
        if n_phi % 2 != 0:
            raise ValueError(f"n_phi must be even, got {n_phi}")

        self.theta = theta
        self.n_rho = n_rho
        self.n_phi = n_phi
        self.drho = theta / (n_rho + 0.5)
        self.dphi = 2.0 * np.pi / n_phi
        rho = (np.arange(n_rho + 1) + 0.5) * self.drho
        rho[-1] = theta
        self.rho_nodes = rho
        self.phi_nodes = np.arange(n_phi) * self.dphi
        self.boundary_index = n_rho

        self.sin_rho = np.sin(rho)
        self.cos_rho = np.cos(rho)
        self.cot_rho = self.cos_rho / self.sin_rho
        self.cos_theta = float(np.cos(theta))
        self.sin_theta = float(np.sin(theta))
        self.cot_theta = self.cos_theta / self.sin_theta

        w_rho = radial_quadrature(rho, self.drho)
        self.quad_weights = np.outer(w_rho * self.sin_rho, np.full(n_phi, self.dphi))

        R = n_rho + 1
        self._tables = {d: stencil_table(R, self.drho, d) for d in (1, 2)}
        self._dmats = {
            (d, s): table_to_matrix(self._tables[d], R, s)
            for d in (1, 2)
            for s in (+1.0, -1.0)
        }
        k = np.arange(n_phi // 2 + 1)
        self._mode_even = (k % 2 == 0)
        self._sym_d1 = 1j * k.astype(float)
        if n_phi % 2 == 0:
            self._sym_d1[-1] = 0.0  # Nyquist mode has no well-defined odd derivative
        self._sym_d2 = -(k.astype(float) ** 2)
        self.robin_gate = ROBIN_GATE

    # -- shapes ----------------------------------------------------------
    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.n_rho + 1, self.n_phi)

    def check_field(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != self.node_shape:
            raise ValueError(f"field shape {values.shape} does not match grid {self.node_shape}")
        return values

    # -- derivative engines ----------------------------------------------
    def d_rho(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        """Radial derivative, 4th order, pole handled by parity reflection."""
        values = self.check_field(values)
        F = np.fft.rfft(values, axis=1)
        out = np.empty_like(F)
        ev = self._mode_even
        out[:, ev] = self._dmats[(order, +1.0)] @ F[:, ev]
        out[:, ~ev] = self._dmats[(order, -1.0)] @ F[:, ~ev]
        return np.fft.irfft(out, n=self.n_phi, axis=1)

    def d_phi(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        """Azimuthal derivative by Fourier differentiation."""
        values = self.check_field(values)
        F = np.fft.rfft(values, axis=1)
        F *= self._sym_d1 if order == 1 else self._sym_d2
        return np.fft.irfft(F, n=self.n_phi, axis=1)

    def d_rho_phi(self, values: np.ndarray) -> np.ndarray:
        return self.d_rho(self.d_phi(values, 1), 1)

    # -- quadrature --------------------------------------------------------
    def integrate(self, values: np.ndarray) -> float:
        """Surface integral over the cap; numpy pairwise summation keeps the
        reduction order fixed, so repeated calls are bit-identical."""
        return float(np.sum(self.check_field(values) * self.quad_weights))

    def __repr__(self) -> str:  # pragma: no cover
        return f"CapGrid(theta={self.theta:.6g}, n_rho={self.n_rho}, n_phi={self.n_phi})"


def build_grid(theta: float, n_rho: int, n_phi: int) -> CapGrid:
    """Validated grid constructor; see :class:`CapGrid` for the layout."""
    return CapGrid(theta, n_rho, n_phi)


def integrate(grid: CapGrid, values: np.ndarray) -> float:
    return grid.integrate(values)


def surface_gradient(grid: CapGrid, values: np.ndarray) -> np.ndarray:
    """Intrinsic gradient in the orthonormal frame; shape (R, P, 2)."""
    values = grid.check_field(values)
    out = np.empty(grid.node_shape + (2,))
    out[..., 0] = grid.d_rho(values, 1)
    out[..., 1] = grid.d_phi(values, 1) / grid.sin_rho[:, None]
    return out


def hessian(grid: CapGrid, values: np.ndarray) -> np.ndarray:
    """Covariant Hessian on the round sphere, orthonormal components.

    (rho,rho):  d2f/drho2
    (rho,phi):  (d2f/drho dphi - cot(rho) df/dphi) / sin(rho)
    (phi,phi):  d2f/dphi2 / sin2(rho) + cot(rho) df/drho
    Radial derivatives are 4th-order finite differences (one-sided closures on
    the boundary row); azimuthal ones are spectral.
    """
    values = grid.check_field(values)
    f_r = grid.d_rho(values, 1)
    f_rr = grid.d_rho(values, 2)
    f_p = grid.d_phi(values, 1)
    f_pp = grid.d_phi(values, 2)
    f_rp = grid.d_rho(f_p, 1)
    sin = grid.sin_rho[:, None]
    cot = grid.cot_rho[:, None]
    out = np.empty(grid.node_shape + (2, 2))
    out[..., 0, 0] = f_rr
    out[..., 0, 1] = (f_rp - cot * f_p) / sin
    out[..., 1, 0] = out[..., 0, 1]
    out[..., 1, 1] = f_pp / sin**2 + cot * f_r
    return out


def a_of(grid: CapGrid, values: np.ndarray) -> np.ndarray:
    """Shape tensor Hess(f) + f * metric; convexity means this is positive."""
    values = grid.check_field(values)
    A = hessian(grid, values)
    A[..., 0, 0] += values
    A[..., 1, 1] += values
    return A


def robin_residual(grid: CapGrid, values: np.ndarray) -> np.ndarray:
    """Boundary defect d f/d rho - cot(theta) f on the row rho = theta.

    Returns one value per azimuthal node; identically small exactly for fields
    compatible with the prescribed contact angle.
    """
    values = grid.check_field(values)
    f_r = grid.d_rho(values, 1)
    j = grid.boundary_index
    return f_r[j, :] - grid.cot_theta * values[j, :]
