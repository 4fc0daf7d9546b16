"""Phase-space grids, symbols and spectral calculus.

Everything downstream works on a periodic truncation of the plane: a square
box [-L, L) in position times a conjugate momentum window whose node spacing
is tied to the semiclassical parameter h through

    xi_k = (pi h / L) k,   k = -N/2 .. N/2 - 1,

so that dx * dxi * N = 2 pi h, the discrete phase-space cell identity.  Fields
are trusted only while their L1 mass stays out of the outer band of the box
(the boundary-mass gate); all derivative/transform operations refuse fields
that breach it rather than silently periodizing tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import BoundaryMassError, ConfigError, FlowEscapeError, GridMismatchError

DEFAULT_BOUNDARY_MASS = 1e-8
DEFAULT_ESCAPE_RADIUS = 1e6


# ---------------------------------------------------------------------------
# parameters and grid


@dataclass(frozen=True)
class Params:
    """Semiclassical parameter set.  eps is always recomputed from (gamma, h)."""

    h: float
    gamma: float
    rho: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.h <= 1.0):
            raise ConfigError(f"h must be in (0, 1], got {self.h}")
        if self.gamma < 0.0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if not (0.0 <= self.rho <= 0.5):
            raise ConfigError(f"rho must be in [0, 1/2], got {self.rho}")

    @property
    def eps(self) -> float:
        return math.sqrt(self.gamma * self.h / 2.0)

    @property
    def eps2(self) -> float:
        return self.gamma * self.h / 2.0


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform N x N grid on [-L, L) x [xi_min, xi_min + N dxi)."""

    n_points: int
    halfwidth: float
    h: float

    @property
    def dx(self) -> float:
        return 2.0 * self.halfwidth / self.n_points

    @property
    def dxi(self) -> float:
        return math.pi * self.h / self.halfwidth

    @property
    def x_nodes(self) -> np.ndarray:
        n, L = self.n_points, self.halfwidth
        return -L + self.dx * np.arange(n)

    @property
    def k_index(self) -> np.ndarray:
        n = self.n_points
        return np.arange(-n // 2, n // 2)

    @property
    def xi_nodes(self) -> np.ndarray:
        return self.dxi * self.k_index

    @property
    def xi_max(self) -> float:
        return float(self.dxi * (self.n_points // 2))

    @property
    def x_mid_nodes(self) -> np.ndarray:
        """Doubled position grid (spacing dx/2) used for midpoint sampling."""
        n, L = self.n_points, self.halfwidth
        return -L + (self.dx / 2.0) * np.arange(2 * n)

    @property
    def xi_mid_nodes(self) -> np.ndarray:
        """Doubled momentum grid (spacing dxi/2).

        Quantization sums over these 2N modes: halving the xi spacing doubles
        the kernel's alias period in (x - y) from 2L to 4L, which removes the
        spurious half-box ghost copy the N-mode sum would imprint on every
        operator."""
        n = self.n_points
        return (self.dxi / 2.0) * np.arange(-n, n)

    def meshes(self):
        return np.meshgrid(self.x_nodes, self.xi_nodes, indexing="ij")

    def mid_meshes(self):
        return np.meshgrid(self.x_mid_nodes, self.xi_mid_nodes, indexing="ij")

    @property
    def cell_area(self) -> float:
        return self.dx * self.dxi

    def wavenumbers(self):
        """Angular wavenumbers (kx, kxi) matching numpy FFT ordering."""
        kx = 2.0 * math.pi * np.fft.fftfreq(self.n_points, d=self.dx)
        kxi = 2.0 * math.pi * np.fft.fftfreq(self.n_points, d=self.dxi)
        return kx, kxi


def build_grid(n_points: int, halfwidth: float, h: float) -> PhaseGrid:
    """Construct a grid; N must be a power of two >= 16 and L > 0."""
    if not _is_power_of_two(n_points) or n_points < 16:
        raise ConfigError(f"n_points must be a power of two >= 16, got {n_points}")
    if not halfwidth > 0.0:
        raise ConfigError(f"halfwidth must be positive, got {halfwidth}")
    if not (0.0 < h <= 1.0):
        raise ConfigError(f"h must be in (0, 1], got {h}")
    return PhaseGrid(n_points=n_points, halfwidth=halfwidth, h=h)


def resolution_hint(grid: PhaseGrid) -> str | None:
    """Rule-of-thumb resolution warning (N >= 16 L^2 / (pi h)); never an error."""
    n_min = 16.0 * grid.halfwidth**2 / (math.pi * grid.h)
    if grid.n_points < n_min:
        return (
            f"grid may under-resolve h={grid.h:g}: N={grid.n_points} < "
            f"16 L^2/(pi h) = {n_min:.0f}"
        )
    return None


# ---------------------------------------------------------------------------
# polynomials in (x, xi)


class Poly2:
    """Real polynomial sum c * x^j xi^k, stored as {(j, k): c}."""

    def __init__(self, coeffs):
        self.coeffs = {}
        for (j, k), c in dict(coeffs).items():
            c = float(c)
            if c != 0.0:
                self.coeffs[(int(j), int(k))] = c

    @classmethod
    def constant(cls, c):
        return cls({(0, 0): c})

    def degree(self) -> int:
        if not self.coeffs:
            return 0
        return max(j + k for (j, k) in self.coeffs)

    def diff_x(self) -> "Poly2":
        return Poly2({(j - 1, k): j * c for (j, k), c in self.coeffs.items() if j > 0})

    def diff_xi(self) -> "Poly2":
        return Poly2({(j, k - 1): k * c for (j, k), c in self.coeffs.items() if k > 0})

    def __add__(self, other: "Poly2") -> "Poly2":
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0.0) + c
        return Poly2(out)

    def __neg__(self) -> "Poly2":
        return Poly2({key: -c for key, c in self.coeffs.items()})

    def is_zero(self, tol=0.0) -> bool:
        return all(abs(c) <= tol for c in self.coeffs.values())

    def evaluate(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(np.broadcast(x, xi).shape)
        for (j, k), c in self.coeffs.items():
            out += c * x**j * xi**k
        return out

    def max_gradient_on(self, grid: PhaseGrid) -> float:
        x, xi = grid.meshes()
        gx = self.diff_x().evaluate(x, xi)
        gxi = self.diff_xi().evaluate(x, xi)
        return float(np.max(np.hypot(gx, gxi)))

    def __repr__(self):
        terms = " + ".join(f"{c:g}*x^{j}*xi^{k}" for (j, k), c in sorted(self.coeffs.items()))
        return f"Poly2({terms or '0'})"


@dataclass(frozen=True)
class HamiltonianSpec:
    """Classical Hamiltonian p(x, xi) as a list of (j, k, c) monomials, degree <= 4."""

    coeffs: tuple

    def __init__(self, coeffs: Sequence):
        object.__setattr__(self, "coeffs", tuple((int(j), int(k), float(c)) for j, k, c in coeffs))
        if any(not math.isfinite(c) for _, _, c in self.coeffs):
            raise ConfigError("hamiltonian coefficients must be finite")
        if self.poly().degree() > 4:
            raise ConfigError("hamiltonian total degree must be <= 4")

    def poly(self) -> Poly2:
        return Poly2({(j, k): c for j, k, c in self.coeffs})

    def evaluate(self, x, xi):
        return self.poly().evaluate(x, xi)

    def degree(self) -> int:
        return self.poly().degree()


@dataclass(frozen=True)
class AffineForm:
    """One jump function ell(x, xi) = alpha x + beta xi + delta."""

    alpha: float
    beta: float
    delta: float = 0.0

    def __post_init__(self):
        for c in (self.alpha, self.beta, self.delta):
            if not math.isfinite(c):
                raise ConfigError("jump coefficients must be finite")

    def evaluate(self, x, xi):
        return self.alpha * np.asarray(x, dtype=float) + self.beta * np.asarray(xi, dtype=float) + self.delta

    def hamiltonian_vector(self) -> np.ndarray:
        """H_ell = (d_xi ell, -d_x ell), a constant vector for affine forms."""
        return np.array([self.beta, -self.alpha])

    def poly(self) -> Poly2:
        return Poly2({(1, 0): self.alpha, (0, 1): self.beta, (0, 0): self.delta})


@dataclass(frozen=True)
class JumpSpec:
    components: tuple

    def __init__(self, components: Sequence):
        comps = []
        for c in components:
            if isinstance(c, AffineForm):
                comps.append(c)
            else:
                comps.append(AffineForm(*c))
        if len(comps) < 1:
            raise ConfigError("need at least one jump function")
        object.__setattr__(self, "components", tuple(comps))

    def h_matrix(self) -> np.ndarray:
        """2 x J matrix whose columns are the H_ell vectors."""
        return np.stack([c.hamiltonian_vector() for c in self.components], axis=1)

    def diffusion_matrix(self) -> np.ndarray:
        H = self.h_matrix()
        return H @ H.T


def validate_ellipticity(jumps: JumpSpec) -> float:
    """Smallest eigenvalue of H H^T; callers must reject configs with c* <= 0."""
    return float(np.linalg.eigvalsh(jumps.diffusion_matrix())[0])


@dataclass(frozen=True)
class VectorFieldSpec:
    """Polynomial vector field (v_x, v_xi) on phase space."""

    v_x: Poly2
    v_xi: Poly2

    def divergence(self) -> Poly2:
        return self.v_x.diff_x() + self.v_xi.diff_xi()

    def evaluate(self, x, xi):
        return self.v_x.evaluate(x, xi), self.v_xi.evaluate(x, xi)

    def linearization(self) -> np.ndarray:
        """Constant Jacobian [[dvx/dx, dvx/dxi], [dvxi/dx, dvxi/dxi]]; exact for affine fields."""
        return np.array(
            [
                [self.v_x.diff_x().coeffs.get((0, 0), 0.0), self.v_x.diff_xi().coeffs.get((0, 0), 0.0)],
                [self.v_xi.diff_x().coeffs.get((0, 0), 0.0), self.v_xi.diff_xi().coeffs.get((0, 0), 0.0)],
            ]
        )

    def constant_part(self) -> np.ndarray:
        return np.array(
            [self.v_x.coeffs.get((0, 0), 0.0), self.v_xi.coeffs.get((0, 0), 0.0)]
        )

    def is_affine(self) -> bool:
        return self.v_x.degree() <= 1 and self.v_xi.degree() <= 1


def hamiltonian_vector_field(p: HamiltonianSpec) -> VectorFieldSpec:
    """H_p = (d_xi p, -d_x p); divergence-free by construction."""
    poly = p.poly()
    return VectorFieldSpec(v_x=poly.diff_xi(), v_xi=-poly.diff_x())


# ---------------------------------------------------------------------------
# sampled symbols


@dataclass
class SymbolField:
    """A phase-space function sampled on a PhaseGrid.

    values is indexed (x-index, xi-index).  midpoint_values, when present,
    holds exact samples on the doubled position grid and is what the Weyl
    quantizer prefers over trigonometric interpolation.  source_poly, when
    present, records that the field is the exact sampling of a polynomial so
    derivatives can be taken analytically instead of through the FFT.
    """

    grid: PhaseGrid
    values: np.ndarray
    time_tag: float | None = None
    midpoint_values: np.ndarray | None = field(default=None, repr=False)
    source_poly: "Poly2 | None" = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        n = self.grid.n_points
        if self.values.shape != (n, n):
            raise GridMismatchError(f"values shape {self.values.shape} != grid ({n}, {n})")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("symbol field contains non-finite values")

    # -- norms and quadrature ------------------------------------------------

    def integral(self) -> float | complex:
        s = self.values.sum() * self.grid.cell_area
        return complex(s) if np.iscomplexobj(self.values) else float(s)

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum() * self.grid.cell_area)

    def l2_norm(self) -> float:
        return float(math.sqrt((np.abs(self.values) ** 2).sum() * self.grid.cell_area))

    def boundary_mass_fraction(self) -> float:
        """L1 fraction sitting in the outer 5% band, measured after removing the
        band's median level.  The offset makes the gate about decaying tails:
        a constant field periodizes exactly and must not trip it."""
        n = self.grid.n_points
        band = max(1, math.ceil(0.05 * n))
        mask = np.zeros((n, n), dtype=bool)
        mask[:band] = mask[-band:] = True
        mask[:, :band] = mask[:, -band:] = True
        level = np.median(self.values[mask].real) if not np.iscomplexobj(self.values) else np.median(self.values[mask])
        shifted = np.abs(self.values - level)
        total = shifted.sum()
        if total == 0.0:
            return 0.0
        return float(shifted[mask].sum() / total)

    def require_boundary_gate(self, threshold=DEFAULT_BOUNDARY_MASS, when=None):
        if threshold is None:
            return
        frac = self.boundary_mass_fraction()
        if frac > threshold:
            raise BoundaryMassError(frac, threshold, when=when)

    def is_real(self, tol=1e-12) -> bool:
        if not np.iscomplexobj(self.values):
            return True
        scale = np.max(np.abs(self.values)) or 1.0
        return bool(np.max(np.abs(self.values.imag)) <= tol * scale)

    def copy_with(self, values, time_tag=None, midpoint_values=None, source_poly=None) -> "SymbolField":
        return SymbolField(self.grid, values, time_tag=time_tag,
                           midpoint_values=midpoint_values, source_poly=source_poly)

    def mean_x2(self) -> float:
        """Second moment of the x-marginal, <x^2> = int x^2 a / int a."""
        x = self.grid.x_nodes
        marg = self.values.real.sum(axis=1)
        return float((x**2 * marg).sum() / marg.sum())


def sample_symbol(expr, grid: PhaseGrid, time_tag=None) -> SymbolField:
    """Pointwise-exact sampling of an analytic expression on grid and midpoint nodes.

    expr needs an evaluate(x, xi) method (HamiltonianSpec, AffineForm, Poly2,
    GaussianMixture adapters, ...).  Polynomial sources are remembered so that
    later derivatives are exact rather than trigonometric.
    """
    x, xi = grid.meshes()
    xm, xim = grid.mid_meshes()
    vals = np.asarray(expr.evaluate(x, xi), dtype=float)
    mid = np.asarray(expr.evaluate(xm, xim), dtype=float)
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape).copy()
        mid = np.broadcast_to(mid, xm.shape).copy()
    poly = None
    if isinstance(expr, Poly2):
        poly = expr
    elif isinstance(expr, (HamiltonianSpec, AffineForm)):
        poly = expr.poly()
    return SymbolField(grid, vals, time_tag=time_tag, midpoint_values=mid, source_poly=poly)


# ---------------------------------------------------------------------------
# spectral calculus


def _nyquist_safe_phase(k: np.ndarray, order: int) -> np.ndarray:
    """(i k)^order with the Nyquist mode zeroed for odd orders (keeps reality)."""
    phase = (1j * k) ** order
    if order % 2 == 1:
        nyq = np.argmin(k) if k.size else None  # most negative entry is the Nyquist slot
        phase = phase.copy()
        phase[nyq] = 0.0
    return phase


def spectral_derivative(a: SymbolField, order, boundary_threshold=DEFAULT_BOUNDARY_MASS) -> SymbolField:
    """Derivative d_x^{order[0]} d_xi^{order[1]} a.

    Fields sampled from polynomials are differentiated analytically (their
    periodization is a sawtooth, which the FFT cannot handle); everything else
    uses trigonometric interpolation, exact for band-limited fields, guarded
    by the boundary-mass gate.
    """
    ox, oxi = int(order[0]), int(order[1])
    if ox < 0 or oxi < 0 or ox + oxi > 8:
        raise ConfigError(f"derivative order {order} out of range (|alpha| <= 8)")
    if ox == 0 and oxi == 0:
        return a.copy_with(a.values.copy(), time_tag=a.time_tag,
                           midpoint_values=None if a.midpoint_values is None else a.midpoint_values.copy(),
                           source_poly=a.source_poly)
    if a.source_poly is not None:
        poly = a.source_poly
        for _ in range(ox):
            poly = poly.diff_x()
        for _ in range(oxi):
            poly = poly.diff_xi()
        return sample_symbol(poly, a.grid, time_tag=a.time_tag)
    if boundary_threshold is not None:
        a.require_boundary_gate(boundary_threshold)
    kx, kxi = a.grid.wavenumbers()
    spec = np.fft.fft2(a.values)
    if ox:
        spec *= _nyquist_safe_phase(kx, ox)[:, None]
    if oxi:
        spec *= _nyquist_safe_phase(kxi, oxi)[None, :]
    out = np.fft.ifft2(spec)
    if not np.iscomplexobj(a.values):
        out = out.real
    return a.copy_with(out, time_tag=a.time_tag)


def sobolev_norm(a: SymbolField, r: int, scale: float, boundary_threshold=DEFAULT_BOUNDARY_MASS) -> float:
    """L1-based semiclassical Sobolev norm sum_{|alpha|<=r} ||(scale * d)^alpha a||_L1."""
    if r < 0 or r > 4:
        raise ConfigError(f"sobolev order r={r} out of range (0 <= r <= 4)")
    total = 0.0
    for ox in range(r + 1):
        for oxi in range(r + 1 - ox):
            d = spectral_derivative(a, (ox, oxi), boundary_threshold=boundary_threshold)
            total += scale ** (ox + oxi) * d.l1_norm()
    return float(total)


_BINOM = [[math.comb(j, i) for i in range(j + 1)] for j in range(9)]


def moyal_product(a: SymbolField, b: SymbolField, order: int, h: float,
                  boundary_threshold=DEFAULT_BOUNDARY_MASS) -> SymbolField:
    """Truncated Moyal product sum_{j<order} (1/j!) (h/2i)^j sigma(D)^j (a x b)|_diag.

    The j = 1 term is (h/2i) {a, b} with {a, b} = d_xi a d_x b - d_x a d_xi b,
    so quantize(a) quantize(b) ~ quantize(moyal(a, b, N)) in the Weyl calculus.
    """
    if a.grid != b.grid:
        raise GridMismatchError("moyal product needs both fields on the same grid")
    if not (1 <= order <= 4):
        raise ConfigError(f"moyal truncation order must be in 1..4, got {order}")
    out = np.zeros(a.values.shape, dtype=complex)
    for j in range(order):
        bidiff = np.zeros_like(out)
        for i in range(j + 1):
            da = spectral_derivative(a, (i, j - i), boundary_threshold).values
            db = spectral_derivative(b, (j - i, i), boundary_threshold).values
            bidiff += ((-1) ** i) * _BINOM[j][i] * da * db
        out += (h / 2j) ** j / math.factorial(j) * bidiff
    return SymbolField(a.grid, out, time_tag=a.time_tag)


# ---------------------------------------------------------------------------
# Hamiltonian flows


def flow_map(v: VectorFieldSpec, t: float, points, escape_radius=DEFAULT_ESCAPE_RADIUS) -> np.ndarray:
    """RK4 integration of zdot = v(z) for time t over an array of phase points.

    points has shape (..., 2); fixed substep h_t = min(1e-3, |t|/100) keeps the
    local error comfortably below 1e-10 per unit time for the polynomial fields
    used here, and determinism is preferred over adaptivity.
    """
    if abs(t) > 20.0:
        raise ConfigError(f"|t| = {abs(t)} exceeds the supported flow horizon 20")
    z = np.array(points, dtype=float)
    if z.shape[-1] != 2:
        raise ValueError("points must have trailing dimension 2")
    if t == 0.0:
        return z

    h_t = min(1e-3, abs(t) / 100.0)
    n_steps = max(1, math.ceil(abs(t) / h_t - 1e-12))
    dt = t / n_steps

    def rhs(zz):
        vx, vxi = v.evaluate(zz[..., 0], zz[..., 1])
        return np.stack([vx, vxi], axis=-1)

    for _ in range(n_steps):
        k1 = rhs(z)
        k2 = rhs(z + 0.5 * dt * k1)
        k3 = rhs(z + 0.5 * dt * k2)
        k4 = rhs(z + dt * k3)
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if escape_radius is not None:
            r2 = z[..., 0] ** 2 + z[..., 1] ** 2
            worst = np.max(r2)
            if not np.isfinite(worst) or worst > escape_radius**2:
                raise FlowEscapeError(
                    f"trajectory radius {math.sqrt(max(worst, 0.0)):.3g} exceeded escape radius {escape_radius:g}"
                )
    return z
