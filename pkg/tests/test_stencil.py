"""Unit tests for the 1-D stencil and quadrature building blocks."""

import numpy as np
import pytest

from capaf._stencil import (
    fornberg_weights,
    panel_weights,
    radial_quadrature,
    stencil_table,
    table_to_matrix,
)


@pytest.mark.parametrize("deriv", [0, 1, 2, 3])
def test_fornberg_weights_exact_on_polynomials(deriv):
    x = np.array([-2.0, -1.3, 0.4, 1.1, 2.7, 3.0])
    w = fornberg_weights(x, 0.3, 3)[:, deriv]
    for p in range(x.size):
        # d^deriv/dx^deriv x^p at 0.3, exact because p < len(x)
        if p < deriv:
            ref = 0.0
        else:
            coef = np.prod(np.arange(p, p - deriv, -1), dtype=float)
            ref = coef * 0.3 ** (p - deriv)
        val = float(np.dot(w, x**p))
        assert abs(val - ref) < 1e-10 * max(1.0, abs(ref))


def test_fornberg_weights_centered_first_derivative():
    h = 0.1
    w = fornberg_weights(np.arange(-2, 3) * h, 0.0, 1)[:, 1]
    np.testing.assert_allclose(w * (12 * h), [1.0, -8.0, 0.0, 8.0, -1.0],
                               atol=1e-12)


def test_panel_weights_integrate_polynomials():
    nodes = np.linspace(0.2, 1.4, 6)
    w = panel_weights(nodes, 0.35, 1.1)
    for p in range(6):
        ref = (1.1 ** (p + 1) - 0.35 ** (p + 1)) / (p + 1)
        assert abs(float(np.dot(w, nodes**p)) - ref) < 1e-12


@pytest.mark.parametrize("n", [8, 16, 32])
def test_radial_quadrature_positive_and_exact_on_quintics(n):
    drho = 1.3 / (n + 0.5)
    rho = (np.arange(n + 1) + 0.5) * drho
    w = radial_quadrature(rho, drho)
    assert np.all(w > 0)
    for p in range(6):
        ref = 1.3 ** (p + 1) / (p + 1)
        assert abs(float(np.dot(w, rho**p)) - ref) < 5e-11 * ref


def test_radial_quadrature_high_order_on_smooth_integrand():
    errs = []
    for n in (16, 32, 64):
        drho = 1.0 / (n + 0.5)
        rho = (np.arange(n + 1) + 0.5) * drho
        w = radial_quadrature(rho, drho)
        errs.append(abs(float(np.dot(w, np.sin(3 * rho))) - (1 - np.cos(3.0)) / 3))
    ooa = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(ooa) > 5.0


def test_radial_quadrature_rejects_tiny_grids():
    with pytest.raises(ValueError, match="at least"):
        radial_quadrature(np.linspace(0.1, 1.0, 4), 0.3)


@pytest.mark.parametrize("deriv", [1, 2])
def test_stencil_table_matrix_differentiates_even_fields(deriv):
    # An even polynomial extends smoothly across the pole, so the mirrored
    # entries (mirror_sign=+1) must reproduce the derivative exactly.
    n, theta = 24, 1.1
    drho = theta / (n + 0.5)
    rho = (np.arange(n + 1) + 0.5) * drho
    D = table_to_matrix(stencil_table(n + 1, drho, deriv), n + 1, +1.0)
    f = rho**4
    ref = 4 * 3 * rho**2 if deriv == 2 else 4 * rho**3
    np.testing.assert_allclose(D @ f, ref, atol=1e-9)


def test_stencil_table_rejects_bad_order():
    with pytest.raises(ValueError, match="deriv"):
        stencil_table(12, 0.1, 3)
