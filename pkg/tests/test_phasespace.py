import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfplab.errors import BoundaryMassError, ConfigError, FlowEscapeError
from lfplab.oracle import GaussianMixture, coherent_state, mixture_field
from lfplab.phasespace import (
    AffineForm,
    HamiltonianSpec,
    JumpSpec,
    Params,
    Poly2,
    SymbolField,
    build_grid,
    flow_map,
    hamiltonian_vector_field,
    moyal_product,
    sample_symbol,
    sobolev_norm,
    spectral_derivative,
    validate_ellipticity,
)
from conftest import generic_grid, random_localized_mixture


# ---------------------------------------------------------------------------
# params and grid


def test_params_eps_identity():
    p = Params(h=2**-4, gamma=0.5)
    assert p.eps2 == pytest.approx(p.gamma * p.h / 2.0, abs=0)
    assert p.eps**2 == pytest.approx(p.eps2, rel=1e-15)


@pytest.mark.parametrize("bad", [dict(h=0.0, gamma=1.0), dict(h=1.5, gamma=1.0),
                                 dict(h=0.5, gamma=-1.0), dict(h=0.5, gamma=1.0, rho=0.7)])
def test_params_rejects(bad):
    with pytest.raises(ConfigError):
        Params(**bad)


def test_grid_cell_identity_16():
    g = build_grid(16, math.pi, 1.0)
    assert g.dx * g.dxi * g.n_points == pytest.approx(2.0 * math.pi * g.h, rel=1e-15)


def test_grid_derived_spacings():
    # N=256, L=4, h=2^-4: dx = 1/32 and dxi = pi h / L = pi/64
    g = build_grid(256, 4.0, 2**-4)
    assert g.dx == pytest.approx(1.0 / 32.0, abs=0)
    assert g.dxi == pytest.approx(math.pi / 64.0, rel=1e-15)
    assert g.dx * g.dxi * g.n_points == pytest.approx(2 * math.pi * g.h, rel=1e-14)


def test_grid_rejects_bad_sizes():
    with pytest.raises(ConfigError):
        build_grid(15, 4.0, 1.0)
    with pytest.raises(ConfigError):
        build_grid(20, 4.0, 1.0)
    with pytest.raises(ConfigError):
        build_grid(256, -1.0, 1.0)


def test_grid_node_symmetry():
    g = build_grid(64, 2.0, 0.25)
    # symmetric about 0 up to one endpoint
    x = g.x_nodes
    assert x[0] == -g.halfwidth
    assert np.allclose(x[1:] + x[:0:-1], 0.0, atol=1e-14)
    xi = g.xi_nodes
    assert np.allclose(xi[1:] + xi[:0:-1], 0.0, atol=1e-14)


@given(st.sampled_from([16, 32, 64, 128]), st.floats(0.5, 8.0), st.floats(0.01, 1.0))
@settings(max_examples=20, deadline=None)
def test_grid_cell_identity_property(n, L, h):
    g = build_grid(n, L, h)
    assert abs(g.dx * g.dxi * g.n_points - 2 * math.pi * h) <= 1e-12 * h


# ---------------------------------------------------------------------------
# sampling


def test_sample_constant(grid256):
    f = sample_symbol(Poly2.constant(1.0), grid256)
    assert np.all(f.values == 1.0)
    assert np.all(f.midpoint_values == 1.0)


def test_coherent_symbol_peak_and_mass(grid256):
    h = grid256.h
    # center placed exactly on a grid node
    ctr = (grid256.x_nodes[160], grid256.xi_nodes[140])
    f = mixture_field(GaussianMixture([coherent_state(ctr, h)]), grid256)
    assert f.values.max() == pytest.approx(2.0, abs=1e-12)  # 2^n at n = 1
    assert f.integral() / (2 * math.pi * h) == pytest.approx(1.0, abs=1e-10)


# ---------------------------------------------------------------------------
# spectral derivatives


def test_derivative_of_constant(grid256):
    f = sample_symbol(Poly2.constant(3.0), grid256)
    d = spectral_derivative(f, (1, 0))
    assert np.max(np.abs(d.values)) == 0.0


def test_derivative_critical_point(grid256, coherent256):
    d = spectral_derivative(coherent256, (1, 0))
    ix = int(np.argmin(np.abs(grid256.x_nodes - 0.5)))
    ik = int(np.argmin(np.abs(grid256.xi_nodes - 0.25)))
    assert abs(d.values[ix, ik]) <= 1e-8


def test_derivative_l1_ratio_vs_quadrature(grid256, coherent256):
    """||d_x a||_1 / ||a||_1 against a high-resolution 1-d quadrature oracle."""
    h = grid256.h
    xs = np.linspace(-6 * math.sqrt(h), 6 * math.sqrt(h), 200001)
    gauss = np.exp(-xs**2 / h)
    dgauss = np.abs(-2 * xs / h * gauss)
    oracle = np.trapezoid(dgauss, xs) / np.trapezoid(gauss, xs)
    d = spectral_derivative(coherent256, (1, 0))
    measured = d.l1_norm() / coherent256.l1_norm()
    assert abs(measured - oracle) <= 0.2 * oracle


def test_derivative_order_cap(coherent256):
    with pytest.raises(ConfigError):
        spectral_derivative(coherent256, (5, 4))


def test_boundary_gate_refuses_edge_mass(grid256):
    mix = GaussianMixture([coherent_state((3.9, 0.0), grid256.h)])
    f = sample_symbol(mix.with_h(grid256.h), grid256)
    with pytest.raises(BoundaryMassError):
        spectral_derivative(f, (1, 0))


@given(st.integers(0, 9999))
@settings(max_examples=10, deadline=None)
def test_mixed_derivatives_commute(seed):
    g = generic_grid()
    f = random_localized_mixture(g, np.random.default_rng(seed))
    d1 = spectral_derivative(spectral_derivative(f, (1, 0)), (0, 1))
    d2 = spectral_derivative(spectral_derivative(f, (0, 1)), (1, 0))
    scale = np.max(np.abs(d1.values)) or 1.0
    assert np.max(np.abs(d1.values - d2.values)) <= 1e-12 * scale


# ---------------------------------------------------------------------------
# Sobolev norms


def test_sobolev_r0_is_l1(coherent256):
    assert sobolev_norm(coherent256, 0, 0.1) == pytest.approx(coherent256.l1_norm(), rel=1e-14)


def test_sobolev_monotone_and_lower_bound(coherent256):
    vals = [sobolev_norm(coherent256, r, 0.2) for r in range(4)]
    assert vals[0] <= vals[1] <= vals[2] <= vals[3]
    assert vals[0] >= coherent256.l1_norm() * (1 - 1e-14)


def test_sobolev_seminorm_linear_in_scale(coherent256):
    l1 = coherent256.l1_norm()
    s1 = sobolev_norm(coherent256, 1, 0.1) - l1
    s2 = sobolev_norm(coherent256, 1, 0.2) - l1
    assert s2 == pytest.approx(2.0 * s1, rel=1e-12)


def test_sobolev_coherent_constant_vs_gaussian_oracle(grid256, coherent256):
    """eps = sqrt(h), r = 1: value = ||a||_1 (1 + c1) with c1 = 4/sqrt(pi).

    c1 from the exact Gaussian moment: per axis eps ||d a||/||a|| =
    sqrt(h) * 2/sqrt(pi h) = 2/sqrt(pi), both axes double it.
    """
    h = grid256.h
    val = sobolev_norm(coherent256, 1, math.sqrt(h))
    c1 = val / coherent256.l1_norm() - 1.0
    assert c1 == pytest.approx(4.0 / math.sqrt(math.pi), rel=1e-2)


# ---------------------------------------------------------------------------
# Hamiltonian vector fields and flows


def test_hvf_examples():
    v = hamiltonian_vector_field(HamiltonianSpec([(1, 1, 1.0)]))
    assert v.v_x.coeffs == {(1, 0): 1.0}
    assert v.v_xi.coeffs == {(0, 1): -1.0}

    v = hamiltonian_vector_field(HamiltonianSpec([(2, 0, 0.5), (0, 2, 0.5)]))
    assert v.v_x.coeffs == {(0, 1): 1.0}
    assert v.v_xi.coeffs == {(1, 0): -1.0}

    # p = xi^2 + (x^2 - 1/2)^2 = xi^2 + x^4 - x^2 + 1/4
    v = hamiltonian_vector_field(
        HamiltonianSpec([(0, 2, 1.0), (4, 0, 1.0), (2, 0, -1.0), (0, 0, 0.25)]))
    assert v.v_x.coeffs == {(0, 1): 2.0}
    assert v.v_xi.coeffs == {(3, 0): -4.0, (1, 0): 2.0}  # -4x(x^2 - 1/2)


def test_hvf_divergence_free():
    for coeffs in ([(1, 1, 1.0)], [(4, 0, 1.0), (0, 2, 1.0)], [(2, 1, 0.3), (1, 2, -0.7)]):
        v = hamiltonian_vector_field(HamiltonianSpec(coeffs))
        assert v.divergence().is_zero()


def test_flow_identity_and_linear():
    v = hamiltonian_vector_field(HamiltonianSpec([(1, 1, 1.0)]))  # v = (x, -xi)
    pts = np.array([[0.5, 0.25], [-1.0, 2.0]])
    assert np.array_equal(flow_map(v, 0.0, pts), pts)
    t = 0.8
    out = flow_map(v, t, pts)
    expect = np.stack([pts[:, 0] * math.exp(t), pts[:, 1] * math.exp(-t)], axis=1)
    assert np.max(np.abs(out - expect)) <= 1e-8


def test_flow_rotation_period():
    v = hamiltonian_vector_field(HamiltonianSpec([(2, 0, 0.5), (0, 2, 0.5)]))  # (xi, -x)
    pts = np.array([[1.0, 0.0], [0.3, -0.7]])
    out = flow_map(v, 2 * math.pi, pts)
    assert np.max(np.abs(out - pts)) <= 1e-8


def test_flow_semigroup():
    v = hamiltonian_vector_field(HamiltonianSpec([(0, 2, 1.0), (4, 0, 1.0), (2, 0, -1.0)]))
    pts = np.array([[0.8, 0.1], [-0.5, 0.4]])
    ab = flow_map(v, 0.7, flow_map(v, 0.5, pts))
    once = flow_map(v, 1.2, pts)
    assert np.max(np.abs(ab - once)) <= 1e-8


def test_flow_volume_preservation():
    v = hamiltonian_vector_field(HamiltonianSpec([(0, 2, 1.0), (4, 0, 1.0), (2, 0, -1.0)]))
    z0 = np.array([0.6, -0.2])
    eps = 1e-4
    base = np.array([z0 + [eps, 0], z0 - [eps, 0], z0 + [0, eps], z0 - [0, eps]])
    out = flow_map(v, 1.5, base)
    J = np.stack([(out[0] - out[1]) / (2 * eps), (out[2] - out[3]) / (2 * eps)], axis=1)
    assert abs(np.linalg.det(J) - 1.0) <= 1e-6


def test_flow_escape():
    v = hamiltonian_vector_field(HamiltonianSpec([(1, 1, 1.0)]))
    with pytest.raises(FlowEscapeError):
        flow_map(v, 10.0, np.array([5.0, 0.0]), escape_radius=100.0)


def test_flow_horizon():
    v = hamiltonian_vector_field(HamiltonianSpec([(1, 1, 1.0)]))
    with pytest.raises(ConfigError):
        flow_map(v, 25.0, np.array([0.1, 0.1]))


# ---------------------------------------------------------------------------
# Moyal product


def test_moyal_identity(grid256, coherent256):
    one = sample_symbol(Poly2.constant(1.0), grid256)
    for order in (1, 2, 3, 4):
        m = moyal_product(one, coherent256, order, grid256.h)
        assert np.max(np.abs(m.values - coherent256.values)) <= 1e-13


def test_moyal_first_order_is_pointwise(grid256, coherent256):
    b = sample_symbol(Poly2({(2, 0): 1.0, (0, 2): 1.0}), grid256)
    m = moyal_product(coherent256, b, 1, grid256.h)
    assert np.array_equal(m.values.real, coherent256.values * b.values)


def test_moyal_x_xi_example(grid256):
    h = grid256.h
    a = sample_symbol(Poly2({(1, 0): 1.0}), grid256)
    b = sample_symbol(Poly2({(0, 1): 1.0}), grid256)
    m = moyal_product(a, b, 2, h)
    x, xi = grid256.meshes()
    target = x * xi + 1j * h / 2.0
    assert np.max(np.abs(m.values - target)) <= 1e-12


def test_moyal_commutator_quadratic_exact(grid256, coherent256):
    h = grid256.h
    p = sample_symbol(Poly2({(1, 1): 1.0, (2, 0): 0.5}), grid256)
    ab = moyal_product(p, coherent256, 3, h)
    ba = moyal_product(coherent256, p, 3, h)
    comm = ab.values - ba.values
    dpx = spectral_derivative(p, (1, 0)).values
    dpxi = spectral_derivative(p, (0, 1)).values
    dax = spectral_derivative(coherent256, (1, 0)).values
    daxi = spectral_derivative(coherent256, (0, 1)).values
    poisson = dpxi * dax - dpx * daxi
    target = (h / 1j) * poisson
    scale = np.max(np.abs(target))
    assert np.max(np.abs(comm - target)) <= 1e-12 * scale


@given(st.integers(0, 9999))
@settings(max_examples=10, deadline=None)
def test_moyal_conjugation_symmetry(seed):
    g = generic_grid()
    rng = np.random.default_rng(seed)
    a = random_localized_mixture(g, rng)
    b = random_localized_mixture(g, rng)
    m_ab = moyal_product(a, b, 3, g.h)
    m_ba = moyal_product(b, a, 3, g.h)
    scale = np.max(np.abs(m_ab.values)) or 1.0
    assert np.max(np.abs(np.conj(m_ab.values) - m_ba.values)) <= 1e-12 * scale


def test_moyal_grid_mismatch():
    g1 = build_grid(64, 3.0, 0.25)
    g2 = build_grid(64, 2.0, 0.25)
    a = sample_symbol(Poly2.constant(1.0), g1)
    b = sample_symbol(Poly2.constant(1.0), g2)
    from lfplab.errors import GridMismatchError

    with pytest.raises(GridMismatchError):
        moyal_product(a, b, 2, 0.25)


# ---------------------------------------------------------------------------
# ellipticity


def test_ellipticity_examples():
    assert validate_ellipticity(JumpSpec([(1, 0, 0), (0, 1, 0)])) == pytest.approx(1.0, abs=1e-14)
    assert validate_ellipticity(JumpSpec([(1, 0, 0)])) == pytest.approx(0.0, abs=1e-14)
    # l1 = x + xi, l2 = x - xi
    assert validate_ellipticity(JumpSpec([(1, 1, 0), (1, -1, 0)])) == pytest.approx(2.0, abs=1e-12)


def test_jumpspec_needs_component():
    with pytest.raises(ConfigError):
        JumpSpec([])


def test_affine_form_hamiltonian_vector():
    assert np.array_equal(AffineForm(2.0, 3.0, 1.0).hamiltonian_vector(), [3.0, -2.0])
