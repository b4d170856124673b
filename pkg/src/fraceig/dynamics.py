"""Logistic fractional reaction-diffusion ``u_t + d^s (-Lap)^s u = m u - u^2``.

Time stepping is exponential Euler in coefficient space: the diffusion is
integrated exactly through ``exp(-(d mu_k)^s dt)`` and the reaction, evaluated
on the system's quadrature nodes, enters through ``phi_1(-L dt) dt``.  Fixed
points of the scheme are exact steady states of the truncated problem, for
every ``dt``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .basis import eval_mode_grid
from .environment import GalerkinSystem
from .errors import BlowUp, ValidationError

BLOWUP_FACTOR = 1e12
DRIFT_TOL = 1e-4


class Verdict(str, enum.Enum):
    SURVIVED = "Survived"
    EXTINCT = "Extinct"
    UNDECIDED = "Undecided"


@dataclass(frozen=True, eq=False)
class SimConfig:
    """``initial`` is a scalar (constant state) or values at the system's quadrature nodes."""

    d: float
    s: float
    dt: float
    T: float
    initial: object = 1.0
    survival_floor: float | None = None
    sample_every: int = 1
    nonlinear: bool = True

    def __post_init__(self):
        if not self.d > 0:
            raise ValidationError(f"motility d must be positive, got {self.d}")
        if not 0 < self.s <= 1:
            raise ValidationError(f"fractional order s must lie in (0, 1], got {self.s}")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not self.T >= self.dt:
            raise ValidationError("horizon T must be at least dt")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ValidationError("sample_every must be a positive integer")


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    masses: np.ndarray
    final_state: np.ndarray
    final_coeffs: np.ndarray
    verdict: Verdict
    survival_floor: float
    clipped_mass: float = 0.0
    drift: float = float("nan")
    info: dict = field(default_factory=dict)


def _initial_values(config: SimConfig, n_nodes: int) -> np.ndarray:
    u0 = np.asarray(config.initial, dtype=float)
    if u0.ndim == 0:
        u0 = np.full(n_nodes, float(u0))
    if u0.shape != (n_nodes,):
        raise ValidationError(f"initial state needs {n_nodes} node values, got shape {u0.shape}")
    if not np.all(np.isfinite(u0)) or np.any(u0 < 0):
        raise ValidationError("initial state must be finite and nonnegative")
    return u0


def _transforms(system: GalerkinSystem):
    if system.basis is None or system.rule is None or system.m_values is None:
        raise ValidationError("simulation needs a system assembled from a weight")
    V = eval_mode_grid(system.basis, system.rule)
    return V, system.rule.weights, system.m_values


def _decide(times, masses, floor, T):
    final = masses[-1]
    if final < floor:
        return Verdict.EXTINCT, float("nan")
    tail = masses[times >= 0.9 * T - 1e-12]
    drift = float(np.max(np.abs(tail - final)) / final)
    return (Verdict.SURVIVED if drift < DRIFT_TOL else Verdict.UNDECIDED), drift


def simulate(system: GalerkinSystem, config: SimConfig) -> Trajectory:
    """Integrate from ``config.initial`` up to ``config.T``.

    Grid values are clipped at zero before the reaction is evaluated; the
    total clipped mass is reported.  Raises :class:`BlowUp` when the mass
    exceeds ``1e12`` times the initial mass.
    """
    V, w, m = _transforms(system)
    u0 = _initial_values(config, len(w))
    mass0 = float(w @ u0)
    if not mass0 > 0:
        raise ValidationError("initial state must have positive mass")
    floor = config.survival_floor if config.survival_floor is not None else 1e-6 * mass0
    L = (config.d * system.mu) ** config.s
    L[0] = 0.0
    h = config.dt
    E = np.exp(-L * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        Phi = np.where(L > 0, -np.expm1(-L * h) / L, h)
    steps = int(round(config.T / h))
    c = V @ (w * u0)
    # the constant mode carries the whole integral of u
    c0_to_mass = float(w @ V[0])
    times, masses = [0.0], [mass0]
    clipped = 0.0
    for n in range(1, steps + 1):
        u = c @ V
        neg = u < 0
        if neg.any():
            clipped += float(-(w[neg] @ u[neg]))
            u = np.where(neg, 0.0, u)
        f = m * u - u * u if config.nonlinear else m * u
        c = E * c + Phi * (V @ (w * f))
        if n % config.sample_every == 0 or n == steps:
            mass = c[0] * c0_to_mass
            if not np.isfinite(mass) or abs(mass) > BLOWUP_FACTOR * mass0:
                raise BlowUp(f"mass {mass:.3g} at t = {n * h:.6g}; reduce dt")
            times.append(n * h)
            masses.append(mass)
    times = np.array(times)
    masses = np.array(masses)
    final = c @ V
    verdict, drift = _decide(times, masses, floor, times[-1])
    return Trajectory(times, masses, final, c, verdict, float(floor), clipped, drift,
                      {"steps": steps, "dt": h, "d": config.d, "s": config.s})


def steady_state_residual(state, system: GalerkinSystem, d: float, s: float, relative: bool = False) -> float:
    """``|| d^s (-Lap)^s u - m u + u^2 ||`` in the truncated coefficient norm.

    ``state`` holds values at the system's quadrature nodes.  With
    ``relative`` the result is divided by ``|| m u ||`` (0 stays 0).
    """
    V, w, m = _transforms(system)
    u = np.asarray(state, dtype=float)
    if u.shape != (len(w),):
        raise ValidationError(f"state needs {len(w)} node values, got shape {u.shape}")
    c = V @ (w * u)
    L = (d * system.mu) ** s
    L[0] = 0.0
    mu_hat = V @ (w * m * u)
    res = float(np.linalg.norm(L * c - mu_hat + V @ (w * u * u)))
    if relative:
        scale = float(np.linalg.norm(mu_hat))
        return res / scale if scale > 0 else res
    return res
