import math

import numpy as np
import pytest

from lfplab import fokker_planck as fp
from lfplab.errors import ConfigError
from lfplab.oracle import (
    GaussianMixture,
    GaussianState,
    coherent_state,
    example_widths,
    mixture_field,
    mixture_flow,
    moment_flow,
)
from lfplab.phasespace import HamiltonianSpec, JumpSpec, Params, build_grid

H = 2**-4
P_XXI = HamiltonianSpec([(1, 1, 1.0)])
P_HARM = HamiltonianSpec([(2, 0, 0.5), (0, 2, 0.5)])
JUMPS = JumpSpec([(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)])


def test_widths_initial_value():
    a, b = example_widths(H, 0.3, 0.0)
    assert a == pytest.approx(H, abs=0)
    assert b == pytest.approx(H, abs=0)


def test_widths_stationary_balance():
    eps = math.sqrt(H / 2.0)  # h = 2 eps^2
    for t in (0.0, 0.5, 1.7):
        a, _ = example_widths(H, eps, t)
        assert a == pytest.approx(H, rel=1e-15)


def test_widths_explicit_values():
    # h = 1/16, eps^2 = 1/64, t = 1: a = e^-2/32 + 1/32, b = 3 e^2/32 - 1/32
    a, b = example_widths(1 / 16, 1 / 8, 1.0)
    assert a == pytest.approx(math.exp(-2.0) / 32.0 + 1.0 / 32.0, rel=1e-15)
    assert b == pytest.approx(3.0 * math.exp(2.0) / 32.0 - 1.0 / 32.0, rel=1e-15)
    # frozen from the closed form itself (the digits quoted in the source
    # example, 0.035467 / 0.661487, are mis-rounded by ~1.3e-5)
    assert a == pytest.approx(0.03547923, abs=5e-8)
    assert b == pytest.approx(0.66147401, abs=5e-8)


def test_widths_rejects_bad_args():
    with pytest.raises(ConfigError):
        example_widths(0.0, 0.1, 1.0)
    with pytest.raises(ConfigError):
        example_widths(0.1, 0.1, -1.0)


# ---------------------------------------------------------------------------
# moment flow


def test_moment_flow_reproduces_widths():
    params = Params(h=H, gamma=0.5)
    g0 = coherent_state((0.0, 0.0), H)
    for t in (0.3, 1.0, 2.0):
        gt = moment_flow(g0, P_XXI, JUMPS, params, t)
        a_t, b_t = example_widths(H, params.eps, t)
        cov = gt.cov_matrix()
        assert cov[0, 0] == pytest.approx(a_t / 2.0, rel=1e-12)
        assert cov[1, 1] == pytest.approx(b_t / 2.0, rel=1e-12)
        assert abs(cov[0, 1]) <= 1e-14
        assert gt.weight == g0.weight


def test_moment_flow_rotation_period():
    params = Params(h=H, gamma=0.0)
    g0 = coherent_state((0.7, -0.2), H)
    gt = moment_flow(g0, P_HARM, JUMPS, params, 2 * math.pi)
    assert np.allclose(gt.center_vec(), g0.center_vec(), atol=1e-8)
    assert np.allclose(gt.cov_matrix(), g0.cov_matrix(), atol=1e-8)


def test_moment_flow_pure_diffusion():
    params = Params(h=H, gamma=1.0)
    g0 = coherent_state((0.2, 0.1), H)
    t = 0.8
    gt = moment_flow(g0, HamiltonianSpec([]), JUMPS, params, t)
    assert np.allclose(gt.cov_matrix(),
                       g0.cov_matrix() + 2.0 * params.eps2 * t * np.eye(2), atol=1e-12)
    assert np.allclose(gt.center_vec(), g0.center_vec(), atol=1e-12)


def test_moment_flow_rejects_cubic():
    with pytest.raises(ConfigError):
        moment_flow(coherent_state((0, 0), H), HamiltonianSpec([(3, 0, 1.0)]),
                    JUMPS, Params(h=H, gamma=1.0), 0.5)


def test_moment_flow_semigroup():
    params = Params(h=H, gamma=1.0)
    p = HamiltonianSpec([(1, 1, 0.7), (2, 0, 0.3), (0, 2, 0.4), (1, 0, 0.1)])
    g0 = coherent_state((0.4, -0.3), H)
    one = moment_flow(g0, p, JUMPS, params, 1.3)
    two = moment_flow(moment_flow(g0, p, JUMPS, params, 0.6), p, JUMPS, params, 0.7)
    assert np.allclose(one.center_vec(), two.center_vec(), atol=1e-10)
    assert np.allclose(one.cov_matrix(), two.cov_matrix(), atol=1e-10)


def test_oracle_solver_equivalence():
    """The module's reason to exist: moment flow == PDE evolution to 1e-4 L1."""
    params = Params(h=H, gamma=1.0)
    g = build_grid(256, 2.5, H)
    p = HamiltonianSpec([(1, 1, 0.7), (2, 0, 0.3), (0, 2, 0.4)])
    g0 = coherent_state((0.4, -0.3), H)
    a0 = mixture_field(GaussianMixture([g0]), g)
    traj = fp.evolve(a0, p, JUMPS, params, t_final=1.0, dt=2e-3)
    oracle = mixture_field(GaussianMixture([moment_flow(g0, p, JUMPS, params, 1.0)]), g)
    l1 = np.abs(oracle.values - traj.final().values).sum() * g.cell_area
    assert l1 <= 1e-4


def test_mixture_flow_preserves_weights():
    params = Params(h=H, gamma=1.0)
    mix = GaussianMixture([coherent_state((0.3, 0.0), H, weight=0.6),
                           coherent_state((-0.4, 0.2), H, weight=0.4)])
    out = mixture_flow(mix, P_XXI, JUMPS, params, 0.7)
    assert [c.weight for c in out.components] == [0.6, 0.4]


# ---------------------------------------------------------------------------
# mixture fields


def test_mixture_field_normalization(grid256):
    mix = GaussianMixture([coherent_state((0.3, 0.0), H, weight=0.25),
                           coherent_state((-0.5, 0.3), H, weight=0.75)])
    f = mixture_field(mix, grid256)
    assert f.integral() / (2 * math.pi * H) == pytest.approx(1.0, abs=1e-8)


def test_mixture_disjoint_supports_add(grid256):
    c1 = coherent_state((-1.5, 0.0), H, weight=0.5)
    c2 = coherent_state((1.5, 0.0), H, weight=0.5)
    full = mixture_field(GaussianMixture([c1, c2]), grid256)
    f1 = mixture_field(GaussianMixture([GaussianState(1.0, c1.center, c1.cov)]), grid256)
    f2 = mixture_field(GaussianMixture([GaussianState(1.0, c2.center, c2.cov)]), grid256)
    assert full.l1_norm() == pytest.approx(0.5 * (f1.l1_norm() + f2.l1_norm()), rel=1e-10)


def test_pure_flag_rejects_squeezed():
    with pytest.raises(ConfigError):
        GaussianState(1.0, (0, 0), np.diag([H, H / 8.0]), pure_flag=True, h=H)
    # a correctly squeezed symplectic one passes: det(2 Sigma / h) = 1
    GaussianState(1.0, (0, 0), np.diag([H, H / 4.0]), pure_flag=True, h=H)


def test_mixture_weights_must_sum_to_one():
    with pytest.raises(ConfigError):
        GaussianMixture([coherent_state((0, 0), H, weight=0.5)])


def test_mixture_boundary_gate(grid256):
    mix = GaussianMixture([coherent_state((3.9, 0.0), H)])
    from lfplab.errors import BoundaryMassError

    with pytest.raises(BoundaryMassError):
        mixture_field(mix, grid256)
