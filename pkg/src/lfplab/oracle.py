"""Closed-form Gaussian solutions used as ground truth for both solvers.

For quadratic Hamiltonians and affine jumps the Fokker-Planck flow preserves
Gaussians: the center rides the backward Hamiltonian flow and the covariance
obeys the Lyapunov equation

    Sigma' = -F Sigma - Sigma F^T + 2 eps^2 D,      F = grad(H_p),

whose special case p = x xi, jumps {x, xi} reproduces the explicit widths
a(t) = (h - 2 eps^2) e^{-2t} + 2 eps^2, b(t) = (h + 2 eps^2) e^{2t} - 2 eps^2.
These moment ODEs are validated against the PDE solver by the test suite
before any scaling experiment trusts them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError
from .phasespace import (
    DEFAULT_BOUNDARY_MASS,
    HamiltonianSpec,
    JumpSpec,
    Params,
    PhaseGrid,
    SymbolField,
    hamiltonian_vector_field,
    sample_symbol,
)


@dataclass(frozen=True)
class GaussianState:
    """One Gaussian mixture component: weight * (h/sqrt(det S)) exp(-<u, S^-1 u>/2).

    The amplitude convention makes (2 pi h)^-1 * integral equal the weight.
    pure_flag asserts the not-too-squeezed pure-state normalization
    det(2 Sigma / h) = 1 at construction (h must be supplied to check it).
    """

    weight: float
    center: tuple
    cov: tuple
    pure_flag: bool = False
    h: float | None = None

    def __init__(self, weight, center, cov, pure_flag=False, h=None):
        object.__setattr__(self, "weight", float(weight))
        object.__setattr__(self, "center", tuple(float(v) for v in center))
        cov = np.asarray(cov, dtype=float)
        object.__setattr__(self, "cov", tuple(tuple(row) for row in cov))
        object.__setattr__(self, "pure_flag", bool(pure_flag))
        object.__setattr__(self, "h", None if h is None else float(h))
        if self.weight < 0:
            raise ConfigError("gaussian weight must be >= 0")
        if len(self.center) != 2 or cov.shape != (2, 2):
            raise ConfigError("gaussian states live on 2-d phase space")
        if abs(cov[0, 1] - cov[1, 0]) > 1e-12 * (1.0 + abs(cov[0, 1])):
            raise ConfigError("covariance must be symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        if eigs[0] <= 0.0:
            raise ConfigError(f"covariance must be positive definite, eigs={eigs}")
        if self.pure_flag:
            if self.h is None:
                raise ConfigError("pure_flag requires h to check det(2 Sigma / h) = 1")
            det = float(np.linalg.det(2.0 * cov / self.h))
            if abs(det - 1.0) > 1e-8:
                raise ConfigError(f"pure component has det(2 Sigma / h) = {det}, not 1")

    def cov_matrix(self) -> np.ndarray:
        return np.array(self.cov, dtype=float)

    def center_vec(self) -> np.ndarray:
        return np.array(self.center, dtype=float)

    def amplitude(self, h: float) -> float:
        return self.weight * h / math.sqrt(float(np.linalg.det(self.cov_matrix())))

    def evaluate(self, x, xi, h: float):
        S = self.cov_matrix()
        Sinv = np.linalg.inv(S)
        ux = np.asarray(x, dtype=float) - self.center[0]
        uxi = np.asarray(xi, dtype=float) - self.center[1]
        quad = Sinv[0, 0] * ux**2 + 2.0 * Sinv[0, 1] * ux * uxi + Sinv[1, 1] * uxi**2
        return self.amplitude(h) * np.exp(-0.5 * quad)


def coherent_state(center, h: float, weight: float = 1.0) -> GaussianState:
    """Standard coherent component: Sigma = (h/2) I, symbol max 2^n at the center."""
    return GaussianState(weight, center, (h / 2.0) * np.eye(2), pure_flag=True, h=h)


@dataclass(frozen=True)
class GaussianMixture:
    components: tuple

    def __init__(self, components):
        comps = tuple(components)
        if not comps:
            raise ConfigError("mixture needs at least one component")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"mixture weights sum to {total}, expected 1")
        object.__setattr__(self, "components", comps)

    def with_h(self, h: float) -> "_MixtureSymbol":
        return _MixtureSymbol(self, h)


@dataclass(frozen=True)
class _MixtureSymbol:
    """Adapter exposing evaluate(x, xi) so sample_symbol can ingest a mixture."""

    mixture: GaussianMixture
    h: float

    def evaluate(self, x, xi):
        out = None
        for comp in self.mixture.components:
            term = comp.evaluate(x, xi, self.h)
            out = term if out is None else out + term
        return out


def mixture_field(mix: GaussianMixture, grid: PhaseGrid, h: float | None = None,
                  boundary_threshold=DEFAULT_BOUNDARY_MASS, time_tag=None) -> SymbolField:
    """Sample a mixture on a grid (midpoints included), gating each component."""
    hh = grid.h if h is None else h
    if not math.isclose(hh, grid.h, rel_tol=1e-12):
        raise ConfigError(f"mixture h={hh} does not match grid.h={grid.h}")
    if boundary_threshold is not None:
        for comp in mix.components:
            single = sample_symbol(_MixtureSymbol(GaussianMixture([
                GaussianState(1.0, comp.center, comp.cov)]), hh), grid)
            single.require_boundary_gate(boundary_threshold)
    return sample_symbol(mix.with_h(hh), grid, time_tag=time_tag)


# ---------------------------------------------------------------------------
# closed forms


def example_widths(h: float, eps: float, t: float):
    """Explicit (a(t), b(t)) for Q = eps^2 Lap + x d_x - xi d_xi on coherent data."""
    if h <= 0 or eps <= 0:
        raise ConfigError("example_widths needs h, eps > 0")
    if t < 0:
        raise ConfigError("example_widths needs t >= 0")
    a = (h - 2.0 * eps**2) * math.exp(-2.0 * t) + 2.0 * eps**2
    b = (h + 2.0 * eps**2) * math.exp(2.0 * t) - 2.0 * eps**2
    return a, b


def _lyapunov_integral(F: np.ndarray, Q: np.ndarray, t: float) -> np.ndarray:
    """int_0^t exp(-F s) Q exp(-F^T s) ds via diagonalization, RK4 fallback."""
    try:
        lam, S = np.linalg.eig(F)
        Sinv = np.linalg.inv(S)
        if np.linalg.cond(S) > 1e8:
            raise np.linalg.LinAlgError("near-defective")
        Qt = Sinv @ Q @ Sinv.conj().T
        mu = lam[:, None] + lam[None, :].conj()
        g = np.where(np.abs(mu) > 1e-12, -np.expm1(-mu * t) / np.where(np.abs(mu) > 1e-12, mu, 1.0), t)
        T = S @ (Qt * g) @ S.conj().T
        return T.real
    except np.linalg.LinAlgError:
        dt = 1e-3
        n = max(1, math.ceil(t / dt))
        dt = t / n
        T = np.zeros_like(Q)

        def rhs(s, T):
            E = expm(-F * s)
            return E @ Q @ E.T  # d/ds of the integral

        s = 0.0
        for _ in range(n):
            k1 = rhs(s, T)
            k2 = rhs(s + dt / 2, T)
            k3 = rhs(s + dt / 2, T)
            k4 = rhs(s + dt, T)
            T = T + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            s += dt
        return T


def moment_flow(g: GaussianState, p: HamiltonianSpec, jumps: JumpSpec,
                params: Params, t: float) -> GaussianState:
    """Propagate one Gaussian component for time t under the Fokker-Planck flow.

    Requires a quadratic Hamiltonian (so the flow is affine) and affine jumps
    (so the diffusion matrix is constant).
    """
    if p.degree() > 2:
        raise ConfigError("moment_flow supports Hamiltonians of total degree <= 2")
    v = hamiltonian_vector_field(p)
    F = v.linearization()
    v0 = v.constant_part()
    D = jumps.diffusion_matrix()
    eps2 = params.eps2

    # center follows the backward flow: zdot = -(F z + v0)
    aug = np.zeros((3, 3))
    aug[:2, :2] = -F
    aug[:2, 2] = -v0
    prop = expm(aug * t)
    m_t = prop[:2, :2] @ g.center_vec() + prop[:2, 2]

    E = expm(-F * t)
    Sigma_t = E @ g.cov_matrix() @ E.T + 2.0 * eps2 * _lyapunov_integral(F, D, t)
    Sigma_t = 0.5 * (Sigma_t + Sigma_t.T)
    return GaussianState(g.weight, m_t, Sigma_t)


def mixture_flow(mix: GaussianMixture, p: HamiltonianSpec, jumps: JumpSpec,
                 params: Params, t: float) -> GaussianMixture:
    return GaussianMixture([moment_flow(g, p, jumps, params, t) for g in mix.components])
