"""Sweeps over the fractional order, shape classification and sufficient conditions.

Every sweep is computed at motility ``d = 1`` and rescaled exactly through
``lambda_1(d, s) = d^s lambda_1(1, s)``.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import BoxDomain
from .environment import GalerkinSystem, Weight
from .errors import CertificateRejected, ValidationError
from .pencil import lambda1_limit_s0, solve

# Bessel zero j_{0,1}
J01 = 2.404825557695773

CLASSIFY_TOL = 1e-9


def default_s_grid() -> np.ndarray:
    return np.arange(1, 101) / 100.0


class Shape(str, enum.Enum):
    INCREASING = "Increasing"
    DECREASING = "Decreasing"
    SINGLE_INTERIOR_MAX = "SingleInteriorMax"
    HAS_INTERIOR_MIN = "HasInteriorMin"
    OTHER = "Other"


def classify_curve(values, tol: float = CLASSIFY_TOL) -> Shape:
    """Shape of a sampled curve from the signs of its first differences.

    Differences below ``tol * max|values|`` are treated as flat and dropped.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return Shape.OTHER
    diffs = np.diff(v)
    signs = np.sign(diffs[np.abs(diffs) > tol * np.abs(v).max()])
    if signs.size == 0:
        return Shape.OTHER
    runs = signs[np.r_[True, signs[1:] != signs[:-1]]]
    if len(runs) == 1:
        return Shape.INCREASING if runs[0] > 0 else Shape.DECREASING
    if np.any((runs[:-1] < 0) & (runs[1:] > 0)):
        return Shape.HAS_INTERIOR_MIN
    if len(runs) == 2:
        return Shape.SINGLE_INTERIOR_MAX
    return Shape.OTHER


def _check_grid(s_grid) -> np.ndarray:
    s = np.asarray(s_grid, dtype=float).ravel()
    if s.size == 0:
        raise ValidationError("s grid is empty")
    if not (np.all(s > 0) and np.all(s <= 1)):
        raise ValidationError("s grid must lie in (0, 1]")
    if np.any(np.diff(s) <= 0):
        raise ValidationError("s grid must be strictly increasing")
    return s


@dataclass(frozen=True, eq=False)
class SSweep:
    s_grid: np.ndarray
    lambda1: np.ndarray
    neg_lambda_minus1: np.ndarray
    d: float
    lambda1_at_0: float
    classification: Shape
    lambda1_unit: np.ndarray = field(repr=False, default=None)

    def at_motility(self, d: float) -> "SSweep":
        """Same sweep rescaled to another motility."""
        if not d > 0:
            raise ValidationError(f"motility d must be positive, got {d}")
        lam = d ** self.s_grid * self.lambda1_unit
        return SSweep(self.s_grid, lam, self.neg_lambda_minus1, float(d), self.lambda1_at_0,
                      classify_curve(lam), self.lambda1_unit)

    def abstract_condition(self) -> np.ndarray:
        """Per-grid-point flags ``-lambda_{-1}(1, s) > lambda_1(1, s)``."""
        return self.neg_lambda_minus1 > self.lambda1_unit


def _unit_solves(system: GalerkinSystem, s: np.ndarray, threads: int | None, minus1: bool = True):
    """``lambda_1(1, s)`` and, if requested, ``-lambda_{-1}(1, s)`` at every grid point."""
    def one(si):
        sl = solve(system, 1.0, float(si), vectors=False, require_minus1=minus1)
        return sl.lambda1, (-sl.lambda_minus1 if minus1 else np.nan)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, s))
    else:
        out = [one(si) for si in s]
    lam = np.array([o[0] for o in out])
    neg = np.array([o[1] for o in out]) if minus1 else None
    return lam, neg


def sweep_s(system: GalerkinSystem, d: float = 1.0, s_grid=None, threads: int | None = None) -> SSweep:
    """``lambda_1(d, s)`` and ``-lambda_{-1}(1, s)`` along ``s_grid``."""
    s = _check_grid(default_s_grid() if s_grid is None else s_grid)
    lam_unit, neg = _unit_solves(system, s, threads)
    base = SSweep(s, lam_unit, neg, 1.0, lambda1_limit_s0(system), classify_curve(lam_unit), lam_unit)
    return base if d == 1.0 else base.at_motility(d)


@dataclass(frozen=True)
class CriticalMotility:
    """``d* = lambda_1(1, 0+) / lambda_1(1, 1)`` with the infimum dichotomy."""

    d_star: float
    lambda1_s1: float
    lambda1_s0: float

    def infimum(self, d: float) -> tuple[float, float]:
        """``(inf_s lambda_1(d, s), minimizing s)``; ``s = 0`` stands for ``0+``."""
        if not d > 0:
            raise ValidationError(f"motility d must be positive, got {d}")
        if d <= self.d_star:
            return d * self.lambda1_s1, 1.0
        return self.lambda1_s0, 0.0


def critical_d(system: GalerkinSystem) -> CriticalMotility:
    lam1 = solve(system, 1.0, 1.0, vectors=False, require_minus1=False).lambda1
    lam0 = lambda1_limit_s0(system)
    return CriticalMotility(lam0 / lam1, lam1, lam0)


# -- constants and sufficient conditions -----------------------------------

@dataclass(frozen=True)
class DirichletBallConstants:
    N: int
    lam1_dir_B1: float
    sphere_area: float


_DIRICHLET = {
    1: (math.pi**2 / 4, 2.0),
    2: (J01**2, 2 * math.pi),
    3: (math.pi**2, 4 * math.pi),
}


def dirichlet_ball_constants(N: int) -> DirichletBallConstants:
    if N not in _DIRICHLET:
        raise ValidationError(f"Dirichlet ball constants tabulated for N = 1, 2, 3 only, got {N}")
    lam, area = _DIRICHLET[N]
    return DirichletBallConstants(N, lam, area)


def average_threshold(M: float, rho: float, delta: float, N: int, mu1: float) -> float | None:
    """Constant ``A`` bounding how negative ``int m`` may be; ``None`` if undefined.

    ``A = (2|dB_1| / lam)^(1/2) mu1 delta^2 rho^(2+N/2) / (M lam - mu1 delta rho^2)``
    with ``lam`` the first Dirichlet eigenvalue of the unit ball.  The
    denominator is nonpositive exactly when the fragmentation condition holds.
    """
    c = dirichlet_ball_constants(N)
    denom = M * c.lam1_dir_B1 - mu1 * delta * rho**2
    if denom <= 0:
        return None
    return math.sqrt(2 * c.sphere_area / c.lam1_dir_B1) * mu1 * delta**2 * rho ** (2 + N / 2) / denom


@dataclass(frozen=True)
class Certificate:
    """Claim that ``m >= delta`` on ``B_rho(x0)`` inside the box and ``m >= -M``."""

    x0: tuple[float, ...]
    rho: float
    delta: float
    M: float

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        for name in ("rho", "delta", "M"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"certificate {name} must be positive, got {v}")
            object.__setattr__(self, name, v)


def _ball_samples(x0: np.ndarray, rho: float, n: int = 24) -> np.ndarray:
    """Points filling the closed ball: a cube lattice clipped to the ball plus its boundary."""
    N = len(x0)
    t = np.linspace(-1.0, 1.0, n)
    cube = np.stack(np.meshgrid(*([t] * N), indexing="ij"), axis=-1).reshape(-1, N)
    inner = cube[np.sum(cube**2, axis=1) <= 1.0]
    if N == 1:
        shell = np.array([[-1.0], [1.0]])
    else:
        g = np.random.default_rng(0).standard_normal((64 * N, N))
        shell = g / np.linalg.norm(g, axis=1, keepdims=True)
    # stay a hair inside: region boundaries are measure-zero
    return x0 + rho * (1 - 1e-9) * np.vstack([inner, shell])


def verify_certificate(weight: Weight, domain: BoxDomain, certificate: Certificate) -> Certificate:
    """Sample-check a certificate; raises :class:`CertificateRejected` on failure."""
    x0 = np.asarray(certificate.x0, dtype=float)
    if x0.shape != (domain.dim,):
        raise CertificateRejected(f"center must have {domain.dim} coordinates")
    lengths = np.asarray(domain.lengths)
    if np.any(x0 - certificate.rho < -1e-12 * lengths) or np.any(x0 + certificate.rho > lengths * (1 + 1e-12)):
        raise CertificateRejected("ball B_rho(x0) is not contained in the domain")
    inside = weight(_ball_samples(x0, certificate.rho))
    if inside.min() < certificate.delta:
        raise CertificateRejected(f"m drops to {inside.min():.6g} < delta = {certificate.delta:.6g} in the ball")
    low = min(weight.values())
    if low < -certificate.M:
        raise CertificateRejected(f"m reaches {low:.6g} < -M = {-certificate.M:.6g}")
    return certificate


@dataclass(frozen=True)
class Comparison:
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class ConditionReport:
    s_grid: tuple[float, ...]
    abstract_condition: tuple[Comparison, ...]
    reduced_condition: Comparison
    fragmentation_condition: Comparison
    average_condition: Comparison | None
    A: float | None
    constants_used: dict

    @property
    def abstract_holds_everywhere(self) -> bool:
        return all(c.holds for c in self.abstract_condition)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["abstract_holds_everywhere"] = self.abstract_holds_everywhere
        return out


def check_conditions(weight: Weight, domain: BoxDomain, system: GalerkinSystem, certificate: Certificate,
                     s_grid=None, threads: int | None = None) -> ConditionReport:
    """Evaluate every sufficient condition with the two numbers compared.

    * abstract: ``-lambda_{-1}(1, s) > lambda_1(1, s)`` per grid point;
    * reduced: ``lambda_1(1, 1) < mu1 / M``;
    * fragmentation: ``(delta / M) rho^2 mu1 > lam_Dir(B_1)``;
    * average: ``-A < int m < 0`` (only when ``A`` is defined).
    """
    verify_certificate(weight, domain, certificate)
    c = dirichlet_ball_constants(domain.dim)
    mu1 = system.mu1
    sw = sweep_s(system, 1.0, s_grid, threads)
    abstract = tuple(Comparison(float(a), float(b), bool(a > b))
                     for a, b in zip(sw.neg_lambda_minus1, sw.lambda1_unit))
    lam11 = float(sw.lambda1_unit[-1]) if sw.s_grid[-1] == 1.0 else critical_d(system).lambda1_s1
    M, rho, delta = certificate.M, certificate.rho, certificate.delta
    reduced = Comparison(lam11, mu1 / M, lam11 < mu1 / M)
    frag_lhs = delta / M * rho**2 * mu1
    fragmentation = Comparison(frag_lhs, c.lam1_dir_B1, frag_lhs > c.lam1_dir_B1)
    A = average_threshold(M, rho, delta, domain.dim, mu1)
    average = None
    if A is not None:
        integral = system.report.integral if system.report is not None else system.m00 * math.sqrt(domain.volume)
        average = Comparison(integral, -A, -A < integral < 0)
    constants = {"lam1_dir_B1": c.lam1_dir_B1, "sphere_area": c.sphere_area, "mu1": mu1}
    return ConditionReport(tuple(float(v) for v in sw.s_grid), abstract, reduced, fragmentation,
                           average, A, constants)


# -- monotone regimes -------------------------------------------------------

@dataclass(frozen=True)
class MonotoneRegime:
    d_upper: float
    d_lower: float | None
    a: float
    resolved: bool
    iterations: int


def monotone_regime_bounds(system: GalerkinSystem, a: float = 0.2, s_grid=None,
                           max_iter: int = 60, threads: int | None = None) -> MonotoneRegime:
    """``1/mu1`` (increasing above it) and an empirical ``d`` below which the
    sweep over ``[a, 1]`` classifies Decreasing.

    The bracket is found by shrinking ``d`` by decades, then bisected in
    ``log d``; ``d_lower`` is the largest motility verified Decreasing.
    """
    if not 0 < a < 1:
        raise ValidationError(f"a must lie in (0, 1), got {a}")
    s = default_s_grid() if s_grid is None else _check_grid(s_grid)
    s = s[s >= a - 1e-12]
    if s.size < 2:
        raise ValidationError("need at least two grid points in [a, 1]")
    lam_unit, _ = _unit_solves(system, s, threads, minus1=False)
    d_upper = 1.0 / system.mu1

    def decreasing(d):
        return classify_curve(d**s * lam_unit) is Shape.DECREASING

    hi = d_upper
    if decreasing(hi):
        return MonotoneRegime(d_upper, hi, a, True, 0)
    lo = hi
    for _ in range(40):
        lo /= 10
        if decreasing(lo):
            break
    else:
        return MonotoneRegime(d_upper, None, a, False, 0)
    it = 0
    for it in range(1, max_iter + 1):
        mid = math.sqrt(lo * hi)
        if decreasing(mid):
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 1e-12:
            break
    return MonotoneRegime(d_upper, lo, a, True, it)

