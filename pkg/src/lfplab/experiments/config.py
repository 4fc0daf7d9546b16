"""Run configuration: a single JSON document mirroring RunConfig field-for-field.

Unknown keys are rejected (extra="forbid" throughout); cross-module
invariants (ellipticity, mixture weights, grid rules, memory cap) are checked
at load.  The same pydantic models serve the CLI and the HTTP service.
"""

from __future__ import annotations

import json
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import ConfigError
from ..oracle import GaussianMixture, GaussianState
from ..phasespace import (
    HamiltonianSpec,
    JumpSpec,
    Params,
    PhaseGrid,
    build_grid,
    resolution_hint,
    validate_ellipticity,
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamsConfig(_Strict):
    h: float
    gamma: float
    rho: float = 0.5


class GridConfig(_Strict):
    n_points: int
    halfwidth: float


class HamiltonianConfig(_Strict):
    coeffs: list  # [[j, k, c], ...]


class JumpsConfig(_Strict):
    components: list  # [[alpha, beta, delta], ...]


class GaussianComponentConfig(_Strict):
    weight: float = 1.0
    center: list = Field(default_factory=lambda: [0.0, 0.0])
    cov: list | None = None  # 2x2; None with pure=True means (h/2) I
    pure: bool = False


class InitialConfig(_Strict):
    components: list[GaussianComponentConfig]


class TimeConfig(_Strict):
    dt: float
    t_final: float
    snapshot_every: float | None = None
    dt_quantum: float | None = None  # defaults to dt


class SolverConfig(_Strict):
    lindblad_method: str = "strang"
    fp_interpolation_order: int = 3
    fp_advector: str = "auto"


class ThresholdsConfig(_Strict):
    boundary_mass: float = 1e-8
    trace_abort: float = 1e-6
    positivity_abort: float = -1e-4
    memory_cap_mb: float = 6144.0


class RunConfig(_Strict):
    params: ParamsConfig
    grid: GridConfig
    hamiltonian: HamiltonianConfig
    jumps: JumpsConfig
    initial: InitialConfig
    time: TimeConfig
    solver: SolverConfig = Field(default_factory=SolverConfig)
    thresholds: ThresholdsConfig = Field(default_factory=ThresholdsConfig)

    @field_validator("initial")
    @classmethod
    def _weights_sum(cls, v):
        total = sum(c.weight for c in v.components)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {total}, expected 1")
        return v


class SweepConfig(_Strict):
    """h / gamma scaling sweep around a base run."""

    base: RunConfig
    h_values: list[float] = Field(default_factory=list)
    n_points: list[int] | None = None  # per-h grid refinement
    gamma_values: list[float] = Field(default_factory=list)
    t_eval: float | None = None  # defaults to base t_final


class ParametrixCaseConfig(_Strict):
    case: str = "linear-hyperbolic"  # heat | linear-hyperbolic | variable-A
    eps_values: list[float] = Field(default_factory=lambda: [0.25, 0.125, 0.0625])
    times: list[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0])
    n_points: int | None = None
    halfwidth: float = 3.0
    n_quad: int = 48
    source_point: list = Field(default_factory=lambda: [1.0, 0.0])


# ---------------------------------------------------------------------------
# materialization into domain objects


class MaterializedRun:
    """Domain objects built from a validated RunConfig."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.params = Params(h=cfg.params.h, gamma=cfg.params.gamma, rho=cfg.params.rho)
        self.grid = build_grid(cfg.grid.n_points, cfg.grid.halfwidth, cfg.params.h)
        self.hamiltonian = HamiltonianSpec([tuple(c) for c in cfg.hamiltonian.coeffs])
        self.jumps = JumpSpec([tuple(c) for c in cfg.jumps.components])
        comps = []
        for c in cfg.initial.components:
            if c.cov is None:
                cov = (cfg.params.h / 2.0) * np.eye(2)
                comps.append(GaussianState(c.weight, c.center, cov,
                                           pure_flag=True, h=cfg.params.h))
            else:
                comps.append(GaussianState(c.weight, c.center, np.asarray(c.cov, float),
                                           pure_flag=c.pure, h=cfg.params.h))
        self.mixture = GaussianMixture(comps)

    def snapshot_every(self) -> float:
        se = self.cfg.time.snapshot_every
        return self.cfg.time.t_final if se is None else se

    def dt_quantum(self) -> float:
        dtq = self.cfg.time.dt_quantum
        return self.cfg.time.dt if dtq is None else dtq


def validate_run_config(cfg: RunConfig) -> list[str]:
    """Full invariant check; returns warnings, raises ConfigError on failure."""
    warnings: list[str] = []
    mat = MaterializedRun(cfg)  # exercises Params/grid/mixture invariants

    c_star = validate_ellipticity(mat.jumps)
    if c_star <= 0.0:
        raise ConfigError(f"jump family is degenerate: c* = {c_star:g}")

    hint = resolution_hint(mat.grid)
    if hint:
        warnings.append(hint)

    t = cfg.time
    if t.dt <= 0 or t.t_final < 0:
        raise ConfigError("dt must be positive and t_final nonnegative")
    se = mat.snapshot_every()
    if t.t_final > 0:
        for name, dt in (("dt", t.dt), ("dt_quantum", mat.dt_quantum())):
            n = round(se / dt)
            if n < 1 or abs(n * dt - se) > 1e-9 * max(1.0, se):
                warnings.append(f"{name}={dt:g} does not divide snapshot_every={se:g}; it will be rounded")
        n = round(t.t_final / se)
        if n < 1 or abs(n * se - t.t_final) > 1e-9 * max(1.0, t.t_final):
            raise ConfigError("t_final must be an integer multiple of snapshot_every")

    if cfg.solver.lindblad_method not in ("strang", "rk4", "expm-krylov", "eig-closed"):
        raise ConfigError(f"unknown lindblad method {cfg.solver.lindblad_method!r}")
    if cfg.solver.lindblad_method == "eig-closed" and cfg.params.gamma != 0.0:
        raise ConfigError("eig-closed requires gamma = 0")
    if cfg.solver.fp_advector not in ("auto", "spectral", "semilag"):
        raise ConfigError(f"unknown fp advector {cfg.solver.fp_advector!r}")

    n = cfg.grid.n_points
    n_snaps = int(round(t.t_final / se)) if t.t_final > 0 else 1
    est_mb = (12 + 3 * n_snaps) * n * n * 16 / 2**20
    if est_mb > cfg.thresholds.memory_cap_mb:
        raise ConfigError(
            f"estimated memory {est_mb:.0f} MiB exceeds cap {cfg.thresholds.memory_cap_mb:.0f} MiB")
    return warnings


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    try:
        return RunConfig.model_validate(data)
    except Exception as exc:
        raise ConfigError(f"invalid run config: {exc}") from exc
