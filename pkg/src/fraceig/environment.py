"""Piecewise-constant environments and the Galerkin weight matrix.

A :class:`Weight` is a background value overridden by an ordered list of
boxes and balls (the last region containing a point wins), or by a table of
samples on a tensor quadrature grid.  :func:`assemble_weight_matrix` turns a
weight and a :class:`~fraceig.basis.Basis` into ``M[j, k] = int m phi_j phi_k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .basis import Basis, BoxDomain, analyze
from .errors import NotInClassM, ValidationError
from .quadrature import QuadratureRule, QuadSpec, default_spec, fitted_rule, quadrature_grid

# relative slack for the strict inequalities defining the admissible class
CLASS_TOL = 1e-10


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
            raise ValidationError(f"invalid box {lo} -> {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, x: np.ndarray) -> np.ndarray:
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.radius > 0:
            raise ValidationError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, x: np.ndarray) -> np.ndarray:
        return np.sum((x - np.asarray(self.center)) ** 2, axis=-1) < self.radius**2


@dataclass(frozen=True, eq=False)
class SampledTable:
    """Weight values at the nodes of a tensor rule.

    Off-node evaluation returns the value at the nearest node along each
    axis, which makes the table a piecewise-constant function on cells.
    """

    rule: QuadratureRule
    values: np.ndarray

    def __post_init__(self):
        if not self.rule.is_tensor:
            raise ValidationError("sampled weights need a tensor-product grid")
        vals = np.array(self.values, dtype=float).ravel()
        if vals.shape != (len(self.rule),):
            raise ValidationError(f"expected {len(self.rule)} samples, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("sampled weight values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        idx = []
        for i, (nodes, _) in enumerate(self.rule.axes):
            mids = 0.5 * (nodes[1:] + nodes[:-1])
            idx.append(np.searchsorted(mids, x[:, i]))
        return self.values[np.ravel_multi_index(tuple(idx), self.rule.shape)]


@dataclass(frozen=True, eq=False)
class Weight:
    """Environment ``m``: background value, overriding regions, or samples."""

    background: float = 0.0
    shapes: tuple = ()
    samples: SampledTable | None = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "background", float(self.background))
        shapes = tuple((region, float(value)) for region, value in self.shapes)
        for region, value in shapes:
            if not isinstance(region, (Box, Ball)):
                raise ValidationError(f"unsupported region {region!r}")
            if not math.isfinite(value):
                raise ValidationError("region values must be finite")
        object.__setattr__(self, "shapes", shapes)

    @classmethod
    def constant(cls, c: float) -> "Weight":
        return cls(background=c, label=f"constant {c:g}")

    @classmethod
    def from_samples(cls, rule: QuadratureRule, values, label: str = "") -> "Weight":
        return cls(samples=SampledTable(rule, values), label=label)

    @property
    def regions(self):
        return [r for r, _ in self.shapes]

    def values(self) -> list[float]:
        if self.samples is not None:
            return sorted(set(self.samples.values.tolist()))
        return [self.background] + [v for _, v in self.shapes]

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.samples is not None:
            return self.samples(x)
        out = np.full(len(x), self.background)
        for region, value in self.shapes:
            out[region.contains(x)] = value
        return out


def eval_weight(weight: Weight, x) -> float:
    """Value of ``m`` at a single point."""
    return float(weight(np.asarray(x, dtype=float).reshape(1, -1))[0])


def weight_rule(weight: Weight, domain: BoxDomain, spec: QuadSpec) -> QuadratureRule:
    """Quadrature rule adapted to the weight's discontinuities."""
    if weight.samples is not None:
        return weight.samples.rule
    if weight.shapes:
        return fitted_rule(domain, weight.regions, spec)
    return quadrature_grid(domain, spec)


@dataclass(frozen=True)
class WeightReport:
    integral: float
    average: float
    sup_m: float
    inf_m: float
    positive_mass: float
    l2_norm_sq: float
    sup_measure: float
    measure: float
    in_class_M: bool
    tolerance: float
    ball_certificate: object = None

    def require_class_m(self):
        if not self.in_class_M:
            raise NotInClassM(
                f"weight not in class M: integral={self.integral:.6g}, "
                f"positive mass={self.positive_mass:.6g} (tolerance {self.tolerance:.3g})"
            )
        return self


def _report(rule: QuadratureRule, m: np.ndarray, domain: BoxDomain, certificate=None) -> WeightReport:
    w = rule.weights
    integral = float(w @ m)
    sup_m, inf_m = float(m.max()), float(m.min())
    tol = CLASS_TOL * domain.volume * max(abs(sup_m), abs(inf_m))
    positive = float(w @ np.maximum(m, 0.0))
    return WeightReport(
        integral=integral,
        average=integral / domain.volume,
        sup_m=sup_m,
        inf_m=inf_m,
        positive_mass=positive,
        l2_norm_sq=float(w @ m**2),
        sup_measure=float(w[m == sup_m].sum()),
        measure=float(w.sum()),
        in_class_M=bool(integral < -tol and positive > tol),
        tolerance=tol,
        ball_certificate=certificate,
    )


def analyze_weight(weight: Weight, domain: BoxDomain, quadrature: QuadSpec | None = None,
                   certificate=None) -> WeightReport:
    """Integral, average, extrema and class membership of ``m``.

    Does not raise for weights outside the class; call
    :meth:`WeightReport.require_class_m` for that.  A certificate, when
    given, is verified first (see :func:`fraceig.analysis.verify_certificate`).
    """
    if quadrature is None:
        quadrature = QuadSpec(8)
    rule = weight_rule(weight, domain, quadrature)
    if certificate is not None:
        from .analysis import verify_certificate

        verify_certificate(weight, domain, certificate)
    return _report(rule, weight(rule.nodes), domain, certificate)


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """Weight matrix ``M`` plus Laplacian eigenvalues ``mu`` for one weight.

    ``positive_moments[j]`` is the quadrature integral of ``phi_j`` over
    ``{m > 0}``; it fixes the sign of the principal eigenfunction.  Hand-built
    systems (see :meth:`from_matrices`) carry no basis or rule.
    """

    weight_matrix: np.ndarray
    mu: np.ndarray
    basis: Basis | None = None
    quadrature: dict = field(default_factory=dict)
    rule: QuadratureRule | None = None
    m_values: np.ndarray | None = None
    positive_moments: np.ndarray | None = None
    report: WeightReport | None = None

    def __post_init__(self):
        for name in ("weight_matrix", "mu", "m_values", "positive_moments"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @classmethod
    def from_matrices(cls, weight_matrix, mu) -> "GalerkinSystem":
        M = np.asarray(weight_matrix, dtype=float)
        mu = np.asarray(mu, dtype=float)
        if M.shape != (len(mu), len(mu)):
            raise ValidationError("weight matrix and mu have inconsistent sizes")
        if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(np.abs(M).max(), 1.0)):
            raise ValidationError("weight matrix must be symmetric")
        return cls(0.5 * (M + M.T), mu, quadrature={"rule": "explicit"})

    @property
    def size(self) -> int:
        return len(self.mu)

    @property
    def mu1(self) -> float:
        return float(self.mu[1])

    @property
    def m00(self) -> float:
        return float(self.weight_matrix[0, 0])


def _gram_tensor(basis: Basis, rule: QuadratureRule, values: np.ndarray) -> np.ndarray:
    """``sum_q values[q] * prod_i f_{a_i}(x_qi) f_{b_i}(x_qi)`` for all (a_i, b_i).

    Contracts one axis at a time, grouping nodes by their leading
    coordinates; works for tensor and fitted rules alike.  Returns the flat
    array indexed by ``(a_0, b_0, a_1, b_1, ...)``.
    """
    N = basis.domain.dim
    keys = rule.nodes
    F = values[:, None]
    for axis in reversed(range(N)):
        A = basis.axis_values(axis, keys[:, axis])
        na, rows = A.shape
        if axis == 0:
            P = (A[:, None, :] * A[None, :, :]).reshape(na * na, rows)
            return (P @ F).ravel()
        uniq, inv = np.unique(keys[:, :axis], axis=0, return_inverse=True)
        inv = inv.ravel()
        order = np.argsort(inv, kind="stable")
        S = F.shape[1]
        out = np.zeros((len(uniq), na * na * S))
        block = max(1, 2_000_000 // (na * na * S))
        for start in range(0, rows, block):
            idx = order[start:start + block]
            g = inv[idx]
            Pb = (A[:, None, idx] * A[None, :, idx]).reshape(na * na, len(idx)).T
            PF = (Pb[:, :, None] * F[idx][:, None, :]).reshape(len(idx), -1)
            starts = np.flatnonzero(np.r_[True, g[1:] != g[:-1]])
            out[g[starts]] += np.add.reduceat(PF, starts, axis=0)
        F, keys = out, uniq
    raise AssertionError("unreachable")


def _pair_index(basis: Basis) -> np.ndarray:
    n_axis = [len(basis.axis_functions(i)) for i in range(basis.domain.dim)]
    ai = basis.axis_index
    flat = np.zeros((basis.size, basis.size), dtype=np.intp)
    stride = 1
    for i in reversed(range(basis.domain.dim)):
        n = n_axis[i]
        flat += (ai[:, None, i] * n + ai[None, :, i]) * stride
        stride *= n * n
    return flat


def min_nodes_per_dim(basis: Basis) -> int:
    return 2 * basis.cutoff + 2


def assemble_weight_matrix(weight: Weight, basis: Basis, quadrature: QuadSpec | None = None,
                           override: bool = False) -> GalerkinSystem:
    """Galerkin weight matrix ``M[j, k] = sum_q w_q m(x_q) phi_j(x_q) phi_k(x_q)``.

    Raises :class:`NotInClassM` for weights outside the admissible class
    unless ``override`` is set (diagnostic use: constant weights and the like).
    """
    domain = basis.domain
    if quadrature is None:
        quadrature = default_spec(domain, basis.cutoff)
    elif not isinstance(quadrature, QuadSpec):
        quadrature = QuadSpec(*quadrature)
    rule = weight_rule(weight, domain, quadrature)
    if rule.is_tensor:
        per_dim = min(rule.shape)
    else:
        per_dim = quadrature.nodes_per_dim()
    if per_dim < min_nodes_per_dim(basis):
        raise ValidationError(
            f"{per_dim} nodes per dimension cannot resolve cutoff {basis.cutoff} "
            f"(need at least {min_nodes_per_dim(basis)})"
        )
    m = weight(rule.nodes)
    report = _report(rule, m, domain)
    if not override:
        report.require_class_m()
    T = _gram_tensor(basis, rule, rule.weights * m)
    M = T[_pair_index(basis)]
    M = 0.5 * (M + M.T)
    positive = analyze(basis, rule.nodes, rule.weights * (m > 0))
    meta = dict(rule.meta)
    meta["nodes"] = len(rule)
    return GalerkinSystem(M, basis.mu, basis, meta, rule, m, positive, report)
