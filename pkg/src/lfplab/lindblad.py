"""Lindblad evolution of quantized observables.

The generator is the self-adjoint-jump form

    L A = (i/h) [P, A] - (gamma/2h) sum_j [L_j, [L_j, A]],

(the double-commutator form of L A L - (L^2 A + A L^2)/2 for self-adjoint
jumps, which is what expands to the Fokker-Planck operator
H_p + (h gamma / 2) sum_j H_lj^2),

whose fixed point includes the identity (fully mixed state).  Four
integrators are provided:

* ``strang``   - default.  Symmetric splitting between the Hamiltonian flow,
  which is exact through the eigendecomposition of P, and the per-jump
  dissipator flows, which are exact Hadamard/Gaussian dampings in each jump's
  eigenbasis.  Every substep is a completely positive trace-preserving map,
  so trace, Hermiticity and positivity are preserved structurally and only
  the O(dt^2) splitting error remains.
* ``rk4``      - classical RK4 on the matrix ODE; step limited by the
  commutator stiffness scale max|p|/h.  Used mainly as a cross-check.
* ``expm-krylov`` - scipy expm_multiply on the vectorized generator.
* ``eig-closed``  - closed-system (gamma = 0) propagator by eigendecomposition,
  exact at any time; the long-time closed-evolution oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, expm_multiply

from .errors import ConfigError, GridMismatchError, NumericalGateError
from .phasespace import (
    AffineForm,
    HamiltonianSpec,
    JumpSpec,
    Params,
    PhaseGrid,
    sample_symbol,
    validate_ellipticity,
)
from .weyl import Diagnostics, Operator, diagnostics, quantize

METHODS = ("strang", "rk4", "expm-krylov", "eig-closed")


@dataclass
class _JumpFlow:
    """Cached exact dissipator flow for one jump operator."""

    kind: str              # "diagonal" or "dense"
    mu: np.ndarray         # eigenvalues
    V: np.ndarray | None   # eigenvectors (dense kind)

    def damping(self, rate_dt: float) -> np.ndarray:
        d = self.mu[:, None] - self.mu[None, :]
        return np.exp(-rate_dt * d * d)

    def apply(self, A: np.ndarray, rate_dt: float) -> np.ndarray:
        G = self.damping(rate_dt)
        if self.kind == "diagonal":
            return A * G
        B = self.V.conj().T @ A @ self.V
        B *= G
        return self.V @ B @ self.V.conj().T


@dataclass
class LindbladSystem:
    P: Operator
    Ls: list
    params: Params
    grid: PhaseGrid
    hamiltonian: HamiltonianSpec
    jumps: JumpSpec
    _p_eig: tuple | None = field(default=None, repr=False)
    _jump_flows: list | None = field(default=None, repr=False)
    p_grid_max: float = 0.0

    def p_eig(self):
        if self._p_eig is None:
            w, V = np.linalg.eigh(self.P.entries)
            self._p_eig = (w, V)
        return self._p_eig

    def jump_flows(self):
        if self._jump_flows is None:
            flows = []
            for comp, L in zip(self.jumps.components, self.Ls):
                if comp.beta == 0.0:
                    mu = comp.alpha * self.grid.x_nodes + comp.delta
                    flows.append(_JumpFlow("diagonal", mu, None))
                else:
                    mu, V = np.linalg.eigh(L.entries)
                    flows.append(_JumpFlow("dense", mu, V))
            self._jump_flows = flows
        return self._jump_flows


def assemble(p: HamiltonianSpec, jumps: JumpSpec, params: Params, grid: PhaseGrid) -> LindbladSystem:
    """Quantize the Hamiltonian and jump functions into a LindbladSystem."""
    c_star = validate_ellipticity(jumps)
    if c_star <= 0.0:
        raise ConfigError(f"jump family is degenerate: ellipticity constant c* = {c_star}")
    if not math.isclose(params.h, grid.h, rel_tol=1e-12):
        raise ConfigError(f"params.h = {params.h} does not match grid.h = {grid.h}")

    p_field = sample_symbol(p, grid)
    P = quantize(p_field)
    Ls = [quantize(sample_symbol(comp, grid)) for comp in jumps.components]
    for op, name in [(P, "P")] + [(L, "L") for L in Ls]:
        defect = op.herm_defect()
        if defect > 1e-10:
            raise NumericalGateError(f"{name} failed Hermiticity check: defect {defect:.3e}")
    return LindbladSystem(
        P=P, Ls=Ls, params=params, grid=grid, hamiltonian=p, jumps=jumps,
        p_grid_max=float(np.max(np.abs(p_field.midpoint_values))),
    )


def generator_apply(sys: LindbladSystem, A: Operator) -> Operator:
    """L A = (i/h)[P, A] - (gamma/2h) sum_j [L_j, [L_j, A]]."""
    if A.grid != sys.grid:
        raise GridMismatchError("operator grid does not match system grid")
    h = sys.params.h
    gamma = sys.params.gamma
    P = sys.P.entries
    M = A.entries
    out = (1j / h) * (P @ M - M @ P)
    if gamma > 0.0:
        for L in sys.Ls:
            Lm = L.entries
            C = Lm @ M - M @ Lm
            out -= (gamma / (2.0 * h)) * (Lm @ C - C @ Lm)
    return Operator(sys.grid, out)


@dataclass
class QuantumTrajectory:
    times: list
    states: list
    diagnostics: list

    def final(self) -> Operator:
        return self.states[-1]


def _dissipator_sweep(flows, A: np.ndarray, rate_dt: float) -> np.ndarray:
    """Symmetric composition of the exact per-jump dissipator flows."""
    nj = len(flows)
    if nj == 1:
        return flows[0].apply(A, rate_dt)
    for f in flows[:-1]:
        A = f.apply(A, 0.5 * rate_dt)
    A = flows[-1].apply(A, rate_dt)
    for f in reversed(flows[:-1]):
        A = f.apply(A, 0.5 * rate_dt)
    return A


def default_dt(sys: LindbladSystem, method: str = "strang", c_stab: float = 1.5) -> float:
    """Step suggestion: RK4 stability scale for rk4, accuracy scale for strang."""
    h = sys.params.h
    if method == "rk4":
        dt = c_stab * h / max(sys.p_grid_max, 1e-12)
        if sys.params.gamma > 0:
            mu_spread = max(
                float(np.max(f.mu) - np.min(f.mu)) for f in sys.jump_flows()
            )
            dt = min(dt, 2.5 * 2.0 * h / (sys.params.gamma * mu_spread**2 + 1e-12))
        return dt
    return 1e-3


def evolve(sys: LindbladSystem, A0: Operator, t_final: float, dt: float | None = None,
           method: str = "strang", snapshot_every: float | None = None,
           trace_abort: float = 1e-6, positivity_abort: float = -1e-4) -> QuantumTrajectory:
    """Integrate dA/dt = L A and record snapshots with diagnostics.

    Aborts (NumericalGateError) on trace drift, NaN, or positivity loss
    beyond the configured thresholds.  Snapshot times are multiples of
    snapshot_every (default: only t=0 and t_final).
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    if A0.grid != sys.grid:
        raise GridMismatchError("initial operator grid does not match system grid")
    if method == "eig-closed" and sys.params.gamma != 0.0:
        raise ConfigError("eig-closed propagator is only valid for gamma = 0")

    h = sys.params.h
    gamma = sys.params.gamma
    if snapshot_every is None:
        snapshot_every = t_final
    n_snaps = int(round(t_final / snapshot_every))
    if abs(n_snaps * snapshot_every - t_final) > 1e-9 * max(1.0, t_final):
        raise ConfigError("t_final must be an integer multiple of snapshot_every")
    snap_times = [i * snapshot_every for i in range(n_snaps + 1)]

    traj = QuantumTrajectory(times=[], states=[], diagnostics=[])
    tr0 = A0.trace()

    def record(t, entries):
        op = Operator(sys.grid, entries.copy())
        d = diagnostics(op)
        if not np.isfinite(d.trace_norm):
            raise NumericalGateError("non-finite state", when=t)
        drift = abs(d.trace - tr0)
        if drift > trace_abort * max(1.0, abs(tr0)):
            raise NumericalGateError(f"trace drift {drift:.3e} at t={t:g}", when=t)
        if d.min_eigenvalue < positivity_abort * max(1.0, d.trace_norm):
            raise NumericalGateError(
                f"positivity loss {d.min_eigenvalue:.3e} at t={t:g}", when=t)
        traj.times.append(t)
        traj.states.append(op)
        traj.diagnostics.append(d)

    record(0.0, A0.entries)
    if t_final == 0.0:
        return traj

    if method == "eig-closed":
        w, V = sys.p_eig()
        Ad = V.conj().T @ A0.entries @ V
        for t in snap_times[1:]:
            phase = np.exp(1j * w * t / h)
            record(t, V @ (np.outer(phase, phase.conj()) * Ad) @ V.conj().T)
        return traj

    if dt is None:
        dt = default_dt(sys, method)
    steps_per_snap = max(1, int(round(snapshot_every / dt)))
    dt = snapshot_every / steps_per_snap
    if method == "rk4":
        dt_max = 1.5 * h / max(sys.p_grid_max, 1e-12)
        if dt > dt_max * (1 + 1e-9):
            raise ConfigError(f"rk4 step {dt:g} exceeds stability bound {dt_max:g}")

    A = A0.entries.copy()

    if method == "rk4":
        def rhs(M):
            out = (1j / h) * (sys.P.entries @ M - M @ sys.P.entries)
            if gamma > 0.0:
                for L in sys.Ls:
                    Lm = L.entries
                    C = Lm @ M - M @ Lm
                    out -= (gamma / (2.0 * h)) * (Lm @ C - C @ Lm)
            return out

        for isnap in range(1, n_snaps + 1):
            for _ in range(steps_per_snap):
                k1 = rhs(A)
                k2 = rhs(A + 0.5 * dt * k1)
                k3 = rhs(A + 0.5 * dt * k2)
                k4 = rhs(A + dt * k3)
                A = A + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            record(snap_times[isnap], A)
        return traj

    if method == "expm-krylov":
        n = sys.grid.n_points

        def _apply(M, sign):
            out = (sign * 1j / h) * (sys.P.entries @ M - M @ sys.P.entries)
            if gamma > 0.0:
                for L in sys.Ls:
                    Lm = L.entries
                    C = Lm @ M - M @ Lm
                    out -= (gamma / (2.0 * h)) * (Lm @ C - C @ Lm)
            return out

        def matvec(v):
            return _apply(v.reshape(n, n), +1).ravel()

        def rmatvec(v):
            # adjoint in the Frobenius pairing: Hamiltonian sign flips,
            # the self-adjoint dissipator is symmetric
            return _apply(v.reshape(n, n), -1).ravel()

        def matmat(V):
            return np.stack([matvec(V[:, i]) for i in range(V.shape[1])], axis=1)

        Lop = LinearOperator((n * n, n * n), matvec=matvec, rmatvec=rmatvec,
                             matmat=matmat, dtype=complex)
        for isnap in range(1, n_snaps + 1):
            A = expm_multiply(Lop, A.ravel(), start=0.0, stop=snapshot_every,
                              num=2, endpoint=True)[-1].reshape(n, n)
            record(snap_times[isnap], A)
        return traj

    # strang
    w, V = sys.p_eig()
    half_phase = np.exp(0.5j * w * dt / h)
    U_half = (V * half_phase[None, :]) @ V.conj().T
    U_full = (V * (half_phase**2)[None, :]) @ V.conj().T
    flows = sys.jump_flows()
    rate_dt = gamma * dt / (2.0 * h)

    for isnap in range(1, n_snaps + 1):
        A = U_half @ A @ U_half.conj().T
        for step in range(steps_per_snap):
            if gamma > 0.0:
                A = _dissipator_sweep(flows, A, rate_dt)
            if step < steps_per_snap - 1:
                A = U_full @ A @ U_full.conj().T
        A = U_half @ A @ U_half.conj().T
        record(snap_times[isnap], A)
    return traj
