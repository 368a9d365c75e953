"""Grid construction, derivatives, quadrature and the boundary defect."""

import numpy as np
import pytest

import capaf
from capaf.capgrid import MIN_PHI, MIN_RHO

from helpers import grid, observed_orders


@pytest.mark.parametrize("theta", [-1.0, 0.0, np.pi, 4.0, np.nan])
def test_build_grid_rejects_bad_angles(theta):
    with pytest.raises(ValueError, match="contact angle"):
        capaf.build_grid(theta, 16, 16)


def test_build_grid_rejects_coarse_and_odd_grids():
    with pytest.raises(ValueError, match="too coarse"):
        capaf.build_grid(1.0, MIN_RHO - 1, 16)
    with pytest.raises(ValueError, match="too coarse"):
        capaf.build_grid(1.0, 16, MIN_PHI - 2)
    with pytest.raises(ValueError, match="even"):
        capaf.build_grid(1.0, 16, 17)


def test_grid_layout():
    g = grid(1.2, 20, 24)
    assert g.node_shape == (21, 24)
    assert g.boundary_index == 20
    assert g.rho_nodes[-1] == pytest.approx(1.2, abs=0)
    assert g.rho_nodes[0] == pytest.approx(0.5 * g.drho)
    np.testing.assert_allclose(np.diff(g.rho_nodes), g.drho, rtol=1e-12)


def test_check_field_shape_gate():
    g = grid(1.2, 16, 16)
    with pytest.raises(ValueError, match="does not match grid"):
        g.check_field(np.zeros((16, 16)))


@pytest.mark.parametrize("theta", [0.5, np.pi / 2, 2.2])
def test_quadrature_matches_cap_area(theta):
    # integral of 1 over the cap is the geodesic-ball area 2 pi (1 - cos theta)
    g = grid(theta, 48, 48)
    area = g.integrate(np.ones(g.node_shape))
    assert area == pytest.approx(capaf.cap_area(theta), rel=1e-10)


def test_quadrature_weights_positive():
    g = grid(2.9, 16, 16)
    assert np.all(g.quad_weights > 0)


def test_integral_of_smooth_function_converges_fast():
    theta = 1.1
    ref = None
    errs = []
    for n in (16, 32, 64):
        g = grid(theta, n, n)
        rho = g.rho_nodes[:, None]
        f = np.cos(3.0 * rho) * (1.0 + 0.3 * np.cos(2.0 * g.phi_nodes)[None, :])
        val = g.integrate(f)
        if ref is None:
            # phi average kills the m=2 part; radial part has a closed form
            from scipy.integrate import quad
            ref = 2 * np.pi * quad(lambda r: np.cos(3 * r) * np.sin(r), 0, theta)[0]
        errs.append(abs(val - ref))
    ooa = observed_orders(errs)
    assert min(ooa) > 5.0


def test_d_phi_is_spectrally_exact():
    g = grid(1.3, 16, 32)
    f = np.cos(3.0 * g.phi_nodes)[None, :] * np.ones((g.n_rho + 1, 1))
    ref = -3.0 * np.sin(3.0 * g.phi_nodes)[None, :] * np.ones((g.n_rho + 1, 1))
    np.testing.assert_allclose(g.d_phi(f, 1), ref, atol=1e-11)
    np.testing.assert_allclose(g.d_phi(f, 2), -9.0 * f, atol=1e-10)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_d_rho_converges_at_fourth_order_across_the_pole(m):
    # sin(rho)^m cos(m phi) profiles are smooth through rho=0, which exercises
    # the mirrored stencil rows for both azimuthal parities.
    theta = 1.4
    errs = []
    for n in (16, 32, 64):
        g = grid(theta, n, n)
        rho = g.rho_nodes[:, None]
        prof = np.sin(rho) ** m * np.cos(rho)
        dprof = (m * np.sin(rho) ** max(m - 1, 0) * np.cos(rho) ** 2
                 - np.sin(rho) ** (m + 1)) if m else -np.sin(rho)
        f = prof * np.cos(m * g.phi_nodes)[None, :]
        ref = dprof * np.cos(m * g.phi_nodes)[None, :]
        errs.append(float(np.max(np.abs(g.d_rho(f, 1) - ref))))
    ooa = observed_orders(errs)
    assert min(ooa) > 3.5


def test_hessian_of_the_cap_support_is_the_metric():
    # A[ell] = Hess(ell) + ell*Id equals the identity at every node.
    errs = []
    for n in (16, 32, 64):
        g = grid(1.1, n, n)
        A = capaf.a_of(g, capaf.ell_values(g))
        dev = A.copy()
        dev[..., 0, 0] -= 1.0
        dev[..., 1, 1] -= 1.0
        errs.append(float(np.max(np.abs(dev))))
    assert errs[-1] < 2e-7
    assert min(observed_orders(errs)) > 3.5


def test_horizontal_linears_annihilate_the_shape_tensor():
    errs = []
    for n in (32, 64, 128):
        g = grid(2.2, n, n)
        lin = capaf.horizontal_linear(g, (0.7, -0.4))
        errs.append(float(np.max(np.abs(capaf.a_of(g, lin.values)))))
    assert errs[-1] < 5e-7
    for e1, e2 in zip(errs, errs[1:]):
        ooa = np.log2(e1 / e2)
        assert ooa > 2.5


def test_robin_residual_vanishes_for_the_cap_support():
    for theta in (0.7, 2.4):
        errs = []
        for n in (32, 64, 128):
            g = grid(theta, n, n)
            res = capaf.robin_residual(g, capaf.ell_values(g))
            errs.append(float(np.max(np.abs(res))))
        assert errs[-1] < 1e-9
        for e1, e2 in zip(errs, errs[1:]):
            ooa = np.log2(e1 / e2)
            assert ooa > 4.0


def test_robin_residual_detects_incompatible_fields():
    g = grid(1.0, 16, 16)
    res = capaf.robin_residual(g, np.ones(g.node_shape))
    # constant field: derivative 0, so the defect is exactly -cot(theta)
    np.testing.assert_allclose(res, -g.cot_theta, atol=1e-12)


def test_surface_gradient_components():
    g = grid(1.2, 32, 32)
    rho = g.rho_nodes[:, None]
    f = np.sin(rho) * np.cos(g.phi_nodes)[None, :]
    grad = capaf.surface_gradient(g, f)
    ref_r = np.cos(rho) * np.cos(g.phi_nodes)[None, :]
    ref_p = -np.sin(g.phi_nodes)[None, :] * np.ones_like(rho)
    assert float(np.max(np.abs(grad[..., 0] - ref_r))) < 1e-6
    assert float(np.max(np.abs(grad[..., 1] - ref_p))) < 1e-6
