"""Admissible boundary fields and convex bodies on the cap grid.

A field is *admissible* here when it satisfies the Robin condition
df/drho = cot(theta) f on the boundary circle; it is the support function of a
convex body when additionally Hess(f) + f*metric is positive definite.  The
module provides the canonical fields (unit-cap support function, horizontal
linear functions), a seeded random body generator, certification, Minkowski
combinations and a bit-exact JSON round trip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .capgrid import CapGrid, a_of, robin_residual

# A support function certifies as convex when the smallest eigenvalue of its
# shape tensor clears this floor (relative to max(1, sup|h|)); the floor only
# absorbs finite-difference noise on exact degenerate cases such as linear
# functions, whose shape tensor vanishes identically.
EIG_GATE = 1e-6


@dataclass
class CapillaryField:
    """Scalar field on the cap satisfying the contact-angle Robin condition."""

    grid: CapGrid
    values: np.ndarray
    robin_max: float

    def __post_init__(self):
        self.values = self.grid.check_field(self.values)


@dataclass
class CapillaryBody:
    """Convex body with prescribed contact angle, stored as its support function."""

    support: CapillaryField
    min_eig: float
    provenance: dict[str, Any] | None = field(default=None)

    @property
    def grid(self) -> CapGrid:
        return self.support.grid

    @property
    def values(self) -> np.ndarray:
        return self.support.values

    @property
    def theta(self) -> float:
        return self.support.grid.theta


@dataclass
class CertifyResult:
    """Outcome of :func:`certify`; ``body`` is None when rejected."""

    accepted: bool
    body: CapillaryBody | None
    min_eig: float
    robin_max: float
    reasons: list[str]


def field_values(obj) -> np.ndarray:
    """Unwrap CapillaryBody / CapillaryField / ndarray to node values."""
    if isinstance(obj, CapillaryBody):
        return obj.support.values
    if isinstance(obj, CapillaryField):
        return obj.values
    return np.asarray(obj, dtype=float)


def ell_values(grid: CapGrid) -> np.ndarray:
    """Support function of the unit cap: 1 - cos(theta) cos(rho)."""
    col = 1.0 - grid.cos_theta * grid.cos_rho
    return np.repeat(col[:, None], grid.n_phi, axis=1)


def min_shape_eig(grid: CapGrid, values: np.ndarray) -> float:
    """Smallest eigenvalue of the shape tensor over all nodes."""
    A = a_of(grid, values)
    mean = 0.5 * (A[..., 0, 0] + A[..., 1, 1])
    rad = np.sqrt((0.5 * (A[..., 0, 0] - A[..., 1, 1])) ** 2 + A[..., 0, 1] ** 2)
    return float(np.min(mean - rad))


def certify(grid: CapGrid, values: np.ndarray, provenance: dict | None = None) -> CertifyResult:
    """Check Robin compatibility and convexity; never raises on bad data.

    Robin gate is relative to the sup norm (see capgrid.ROBIN_GATE); the
    convexity gate requires min_eig > EIG_GATE * max(1, sup|h|).
    """
    values = grid.check_field(values)
    scale = max(1.0, float(np.max(np.abs(values))))
    rmax = float(np.max(np.abs(robin_residual(grid, values))))
    meig = min_shape_eig(grid, values)
    reasons = []
    if rmax > grid.robin_gate * scale:
        reasons.append(
            f"robin residual {rmax:.3e} exceeds gate {grid.robin_gate * scale:.3e}"
        )
    if meig <= EIG_GATE * scale:
        reasons.append(f"min shape-tensor eigenvalue {meig:.3e} not positive")
    if reasons:
        return CertifyResult(False, None, meig, rmax, reasons)
    body = CapillaryBody(CapillaryField(grid, values, rmax), meig, provenance)
    return CertifyResult(True, body, meig, rmax, reasons)


def _certified(grid: CapGrid, values: np.ndarray, provenance: dict | None = None) -> CapillaryBody:
    res = certify(grid, values, provenance)
    if not res.accepted:
        raise ValueError("certification failed: " + "; ".join(res.reasons))
    return res.body


def ell(grid: CapGrid) -> CapillaryBody:
    """The unit cap as a body.  Its shape tensor is the identity."""
    return _certified(grid, ell_values(grid), {"kind": "unit-cap"})


def horizontal_linear(grid: CapGrid, direction: Sequence[float]) -> CapillaryField:
    """Restriction of a horizontal linear function x -> <x, a> to the cap.

    direction may be a 2-vector (a1, a2) or a 3-vector with vanishing vertical
    component; a vertical component is rejected because vertical translations
    break the contact-angle condition.
    """
    d = np.asarray(direction, dtype=float)
    if d.shape == (3,):
        if abs(d[2]) > 1e-14 * max(1.0, float(np.max(np.abs(d)))):
            raise ValueError("direction must be horizontal (zero vertical component)")
        d = d[:2]
    if d.shape != (2,):
        raise ValueError(f"direction must have 2 (or 3) components, got shape {d.shape}")
    values = grid.sin_rho[:, None] * (
        d[0] * np.cos(grid.phi_nodes)[None, :] + d[1] * np.sin(grid.phi_nodes)[None, :]
    )
    rmax = float(np.max(np.abs(robin_residual(grid, values))))
    return CapillaryField(grid, values, rmax)


def from_neumann(grid: CapGrid, u: np.ndarray, gate: float | None = None) -> CapillaryField:
    """Lift a Neumann datum to an admissible field: f = ell * u.

    Because the unit-cap support function itself satisfies the Robin condition,
    the product does too whenever du/drho vanishes on the boundary row; that is
    checked with the one-sided boundary stencil and violations are rejected.
    """
    u = grid.check_field(u)
    f_r = grid.d_rho(u, 1)
    du = float(np.max(np.abs(f_r[grid.boundary_index, :])))
    scale = max(1.0, float(np.max(np.abs(u))))
    if gate is None:
        gate = grid.robin_gate
    if du > gate * scale:
        raise ValueError(
            f"neumann violation: max |du/drho| = {du:.3e} on the boundary row "
            f"(gate {gate * scale:.3e})"
        )
    values = ell_values(grid) * u
    rmax = float(np.max(np.abs(robin_residual(grid, values))))
    return CapillaryField(grid, values, rmax)


# -- random generation ------------------------------------------------------

def enforce_contact_angle(grid: CapGrid, values: np.ndarray) -> np.ndarray:
    """Return a copy of the field with its discrete boundary defect cancelled.

    Fields that satisfy the contact-angle condition in closed form still leave
    a truncation-error residual under the boundary derivative stencil, which
    can trip the admissibility gate on coarse grids.  Subtracting separable
    corrections built from quartic and quintic radial profiles (matched to the
    azimuthal mode parity, so the pole stays regular) removes the discrete
    defect to roundoff while perturbing the field by O(defect) in sup norm.
    """
    values = grid.check_field(values).astype(float, copy=True)
    x = grid.rho_nodes / grid.theta
    res = robin_residual(grid, values)
    spec = np.fft.rfft(res)
    k = np.arange(spec.size)
    for parity, prof in ((0, x**4), (1, x**5)):
        part = np.fft.irfft(np.where(k % 2 == parity, spec, 0.0), grid.n_phi)
        # The boundary stencil never reaches the pole-reflected rows, so one
        # probe mode per parity measures the profile's defect for all modes.
        probe = prof[:, None] * np.cos(parity * grid.phi_nodes)[None, :]
        pres = robin_residual(grid, probe)
        j = int(np.argmax(np.abs(pres)))
        scale = pres[j] / np.cos(parity * grid.phi_nodes[j])
        values -= np.outer(prof / scale, part)
    return values


def _mode_profiles(grid: CapGrid, mode_cap: int) -> list[tuple[int, np.ndarray]]:
    """Radial profiles paired with their azimuthal frequency m.

    For m = 0 the profile cos(k*pi*rho/theta) is smooth across the pole and has
    vanishing radial derivative at the boundary.  For m >= 1 the same cosine is
    tapered by sin(rho)^m, which restores smoothness at the pole (an m-fold
    azimuthal oscillation must vanish to order m there); differencing two
    cosines of equal parity keeps both the profile and its radial derivative
    zero on the boundary row, so the Neumann lift stays exact.
    """
    rho = grid.rho_nodes
    theta = grid.theta
    profiles: list[tuple[int, np.ndarray]] = []
    for m in range(mode_cap + 1):
        for k in range(mode_cap + 1):
            if m == 0:
                p = np.cos(k * np.pi * rho / theta)
            else:
                taper = np.sin(rho) ** m
                p = taper * (
                    np.cos(k * np.pi * rho / theta) - np.cos((k + 2) * np.pi * rho / theta)
                )
            top = float(np.max(np.abs(p)))
            if top < 1e-13:
                continue
            profiles.append((m, p / top))
    return profiles


def _random_neumann_datum(grid: CapGrid, rng: np.random.Generator, mode_cap: int) -> np.ndarray:
    # Coefficients are drawn in a fixed (m, k) order so a seed is reproducible
    # independent of grid size.
    u = np.zeros(grid.node_shape)
    cosm = {m: np.cos(m * grid.phi_nodes) for m in range(mode_cap + 1)}
    sinm = {m: np.sin(m * grid.phi_nodes) for m in range(mode_cap + 1)}
    for m, prof in _mode_profiles(grid, mode_cap):
        k_weight = 1.0 / (1.0 + m) ** 2
        a = rng.standard_normal() * k_weight
        u += a * prof[:, None] * cosm[m][None, :]
        if m > 0:
            b = rng.standard_normal() * k_weight
            u += b * prof[:, None] * sinm[m][None, :]
    top = float(np.max(np.abs(u)))
    if top > 0:
        u /= top
    return u


def random_body(
    grid: CapGrid,
    seed: int,
    base_radius: float = 1.0,
    amplitude: float = 0.25,
    mode_cap: int = 3,
    margin: float = 0.05,
    max_halvings: int = 50,
) -> CapillaryBody:
    """Seeded random convex body h = base_radius*ell + amplitude*ell*u.

    u is a random combination of boundary-compatible smooth modes (see
    _mode_profiles) and the residual discrete boundary defect is projected
    out, so the contact-angle gate passes at any resolution.  If the
    perturbed field fails the convexity margin min_eig >= margin*base_radius
    the amplitude is halved and the same u is retried; exceeding max_halvings
    raises RuntimeError.
    """
    if base_radius <= 0:
        raise ValueError(f"base_radius must be positive, got {base_radius}")
    if amplitude < 0:
        raise ValueError(f"amplitude must be non-negative, got {amplitude}")
    rng = np.random.default_rng(seed)
    u = _random_neumann_datum(grid, rng, mode_cap)
    lv = ell_values(grid)
    amp = float(amplitude)
    for _ in range(max_halvings + 1):
        values = enforce_contact_angle(grid, base_radius * lv + amp * lv * u)
        meig = min_shape_eig(grid, values)
        if meig >= margin * base_radius:
            rmax = float(np.max(np.abs(robin_residual(grid, values))))
            prov = {
                "seed": int(seed),
                "params": {
                    "base_radius": float(base_radius),
                    "amplitude": float(amplitude),
                    "effective_amplitude": amp,
                    "mode_cap": int(mode_cap),
                },
            }
            return CapillaryBody(CapillaryField(grid, values, rmax), meig, prov)
        amp *= 0.5
    raise RuntimeError(
        f"generation failed: no convex body within {max_halvings} amplitude halvings "
        f"(seed={seed}, base_radius={base_radius}, amplitude={amplitude})"
    )


def random_capillary_field(
    grid: CapGrid,
    seed: int,
    amplitude: float = 1.0,
    mode_cap: int = 3,
    include_linear: bool = True,
) -> CapillaryField:
    """Seeded random admissible field, convex or not.

    A mix of the unit-cap support function, an oscillatory Neumann lift and
    (optionally) horizontal linear components.  Useful as the free slot in
    inequality trials.
    """
    rng = np.random.default_rng(seed)
    u = _random_neumann_datum(grid, rng, mode_cap)
    values = rng.uniform(0.5, 1.5) * ell_values(grid) + amplitude * ell_values(grid) * u
    if include_linear:
        a1, a2 = rng.uniform(-0.5, 0.5, size=2)
        values = values + horizontal_linear(grid, (a1, a2)).values
    values = enforce_contact_angle(grid, values)
    rmax = float(np.max(np.abs(robin_residual(grid, values))))
    return CapillaryField(grid, values, rmax)


# -- algebra ------------------------------------------------------------------

def minkowski_combine(bodies: Sequence[CapillaryBody], lambdas: Sequence[float]) -> CapillaryBody:
    """Support function of sum(lambda_i * K_i); re-certified on return."""
    if len(bodies) == 0:
        raise ValueError("need at least one body")
    if len(bodies) != len(lambdas):
        raise ValueError(f"{len(bodies)} bodies but {len(lambdas)} coefficients")
    lam = [float(x) for x in lambdas]
    if any(x < 0 for x in lam):
        raise ValueError("combination coefficients must be non-negative")
    if sum(lam) <= 0:
        raise ValueError("combination coefficients must not all vanish")
    grid = bodies[0].grid
    for b in bodies[1:]:
        if b.grid is not grid and (
            b.grid.theta != grid.theta or b.grid.node_shape != grid.node_shape
        ):
            raise ValueError("bodies live on different grids")
    values = lam[0] * bodies[0].values
    for b, x in zip(bodies[1:], lam[1:]):
        values = values + x * b.values
    return _certified(grid, values, {"kind": "minkowski-combination", "lambdas": lam})


def translate_horizontal(body: CapillaryBody, shift: Sequence[float]) -> CapillaryBody:
    """Translate the body horizontally by (s1, s2); support gains <shift, nu>."""
    lin = horizontal_linear(body.grid, shift)
    values = body.values + lin.values
    res = certify(body.grid, values, body.provenance)
    if not res.accepted:
        raise ValueError("translation broke certification: " + "; ".join(res.reasons))
    return res.body


# -- serialization -------------------------------------------------------------

def body_to_dict(body: CapillaryBody) -> dict:
    """JSON-ready dict; values are row-major, radial index slow."""
    return {
        "theta": body.grid.theta,
        "n_rho": body.grid.n_rho,
        "n_phi": body.grid.n_phi,
        "values": [float(v) for v in body.values.ravel(order="C")],
        "provenance": body.provenance,
    }


def body_from_dict(data: dict, grid: CapGrid | None = None) -> CapillaryBody:
    if grid is None:
        grid = CapGrid(data["theta"], data["n_rho"], data["n_phi"])
    elif (grid.theta, grid.n_rho, grid.n_phi) != (data["theta"], data["n_rho"], data["n_phi"]):
        raise ValueError("grid does not match serialized body")
    values = np.array(data["values"], dtype=float).reshape(grid.node_shape)
    return _certified(grid, values, data.get("provenance"))


def save_body(body: CapillaryBody, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body_to_dict(body), fh, indent=1)
        fh.write("\n")


def load_body(path, grid: CapGrid | None = None) -> CapillaryBody:
    with open(path, "r", encoding="utf-8") as fh:
        return body_from_dict(json.load(fh), grid)
