"""Bang-bang environment design by iterated rearrangement.

For a fixed eigenfunction the functional ``int m psi^2`` over weights with
values in ``[-m_under, m_bar]`` and prescribed average is maximized by
``m_bar`` on a superlevel set of ``psi^2`` and ``-m_under`` elsewhere.  Since
the Galerkin matrix of a grid-sampled weight is assembled with the very same
grid, ``c^T M c`` equals that quadrature sum exactly, so each
solve -> rearrange step cannot increase ``lambda_1``.

Eigen-solves run at ``d = 1`` and are rescaled by ``d^s``: the selected sets
are then bit-identical across motilities.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import Basis, BoxDomain, synthesize
from .environment import Weight, assemble_weight_matrix
from .errors import RearrangementDegenerate, ValidationError
from .pencil import solve
from .quadrature import QuadratureRule, QuadSpec, quadrature_grid

# relative spread of psi^2 below which no superlevel set can be chosen
DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class BangBangParams:
    """Extreme values ``m_bar``, ``-m_under`` and average ``m0`` of the admissible class."""

    m_bar: float
    m_under: float
    m0: float
    volume: float

    def __post_init__(self):
        if not (self.m_bar > 0 and self.m_under > 0):
            raise ValidationError("m_bar and m_under must be positive")
        if not -self.m_under < self.m0 < 0:
            raise ValidationError(f"m0 must lie in (-m_under, 0), got {self.m0}")
        if not self.volume > 0:
            raise ValidationError("domain volume must be positive")

    @classmethod
    def for_domain(cls, domain: BoxDomain, m_bar: float, m_under: float, m0: float) -> "BangBangParams":
        return cls(float(m_bar), float(m_under), float(m0), domain.volume)

    @property
    def target_measure(self) -> float:
        """``|D| = |Omega| (m_under + m0) / (m_under + m_bar)``."""
        return self.volume * (self.m_under + self.m0) / (self.m_under + self.m_bar)


def default_design_grid(domain: BoxDomain, cutoff: int) -> QuadratureRule:
    """Uniform two-point Gauss grid: every node carries the same weight."""
    return quadrature_grid(domain, QuadSpec(8 * (cutoff + 1), 2))


def _select(order: np.ndarray, weights: np.ndarray, target: float) -> np.ndarray:
    """Mask of the first ``k`` nodes of ``order`` whose mass is closest to ``target``."""
    cum = np.concatenate([[0.0], np.cumsum(weights[order])])
    k = int(np.argmin(np.abs(cum - target)))
    mask = np.zeros(len(weights), dtype=bool)
    mask[order[:k]] = True
    return mask


def _bang_bang(grid: QuadratureRule, mask: np.ndarray, params: BangBangParams, label: str) -> Weight:
    values = np.where(mask, params.m_bar, -params.m_under)
    return Weight.from_samples(grid, values, label=label)


def superlevel_mask(psi_values, grid: QuadratureRule, params: BangBangParams) -> np.ndarray:
    """Nodes of the superlevel set of ``psi^2`` whose mass matches ``|D|``.

    Nodes are ranked by decreasing ``psi^2``, ties by node order.
    """
    psi2 = np.asarray(psi_values, dtype=float) ** 2
    if psi2.shape != (len(grid),):
        raise ValidationError(f"expected {len(grid)} values, got shape {psi2.shape}")
    top = psi2.max()
    if not top > 0 or top - psi2.min() <= DEGENERATE_TOL * top:
        raise RearrangementDegenerate("psi^2 is constant on the grid")
    order = np.argsort(-psi2, kind="stable")
    return _select(order, grid.weights, params.target_measure)


def rearrange_step(psi_values, grid: QuadratureRule, params: BangBangParams) -> Weight:
    """Bang-bang weight ``m_bar`` on the ``psi^2`` superlevel set, ``-m_under`` elsewhere."""
    return _bang_bang(grid, superlevel_mask(psi_values, grid, params), params, "rearranged")


def slab_weight(grid: QuadratureRule, params: BangBangParams, axis: int = 0) -> Weight:
    """Initial guess: ``m_bar`` on ``{x_axis < t}`` with the target mass."""
    order = np.argsort(grid.nodes[:, axis], kind="stable")
    return _bang_bang(grid, _select(order, grid.weights, params.target_measure), params, "slab")


@dataclass
class RearrangementTrace:
    iterates: list = field(default_factory=list)
    converged: bool = False
    final_D_mass: float = float("nan")
    masks: list = field(default_factory=list)
    d: float = 1.0
    s: float = 1.0

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([lam for _, lam in self.iterates])

    @property
    def final_weight(self) -> Weight:
        return self.iterates[-1][0]

    @property
    def final_mask(self) -> np.ndarray:
        return self.masks[-1]

    def best(self) -> tuple[Weight, float]:
        i = int(np.argmin(self.lambdas))
        return self.iterates[i]

    def nonincreasing(self, slack: float = 1e-10) -> bool:
        lam = self.lambdas
        return bool(np.all(lam[1:] <= lam[:-1] * (1 + slack)))


def optimize_weight(domain: BoxDomain, params: BangBangParams, basis: Basis, d: float = 1.0,
                    s: float = 1.0, tol: float = 1e-10, max_iter: int = 50,
                    grid: QuadratureRule | None = None, initial: Weight | None = None) -> RearrangementTrace:
    """Alternate eigen-solve and rearrangement until the set stops moving.

    Stops when the mask is a fixed point, when ``|delta lambda_1| < tol lambda_1``,
    or after ``max_iter`` rearrangements; ``converged`` is false only in the last case.
    """
    if basis.domain != domain:
        raise ValidationError("basis was built for a different domain")
    if not d > 0:
        raise ValidationError(f"motility d must be positive, got {d}")
    if grid is None:
        grid = default_design_grid(domain, basis.cutoff)
    if initial is None:
        weight = slab_weight(grid, params)
    else:
        if initial.samples is None or initial.samples.rule is not grid:
            raise ValidationError("initial weight must be sampled on the design grid")
        weight = initial
    scale = d**s
    trace = RearrangementTrace(d=float(d), s=float(s))
    mask = weight.samples.values == params.m_bar
    for it in range(max_iter + 1):
        system = assemble_weight_matrix(weight, basis)
        sl = solve(system, 1.0, s, require_minus1=False)
        lam = scale * sl.lambda1
        trace.iterates.append((weight, lam))
        trace.masks.append(mask)
        if it > 0:
            prev = trace.iterates[-2][1]
            if np.array_equal(mask, trace.masks[-2]) or abs(prev - lam) < tol * lam:
                trace.converged = True
                break
        if it == max_iter:
            break
        psi = synthesize(basis, grid.nodes, sl.coeffs1)
        mask = superlevel_mask(psi, grid, params)
        weight = _bang_bang(grid, mask, params, "rearranged")
    trace.final_D_mass = float(grid.weights[trace.masks[-1]].sum())
    return trace


def bathtub_value(psi_values, grid: QuadratureRule, weight_values) -> float:
    """``sum_q w_q m_q psi_q^2``: the functional the rearrangement maximizes."""
    psi2 = np.asarray(psi_values, dtype=float) ** 2
    return float(np.sum(grid.weights * np.asarray(weight_values, dtype=float) * psi2))


def mask_mass(grid: QuadratureRule, mask) -> float:
    return float(grid.weights[np.asarray(mask, dtype=bool)].sum())


def grid_average(grid: QuadratureRule, weight: Weight) -> float:
    vals = weight(grid.nodes)
    return float(grid.weights @ vals / grid.weights.sum())

