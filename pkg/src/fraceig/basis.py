"""Explicit Laplacian eigenpairs on hyperrectangles.

Neumann modes on ``(0, l_1) x ... x (0, l_N)`` are products of cosines,
periodic modes are products of real cos/sin pairs.  A :class:`Basis` is the
full tensor set of modes with every per-axis frequency at most ``cutoff``,
ordered by Laplacian eigenvalue so that the constant mode comes first.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

MAX_DIM = 3

# points this far outside the box (relative to the side length) are still accepted
_CLOSURE_SLACK = 1e-12


class Boundary(str, enum.Enum):
    NEUMANN = "neumann"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class BoxDomain:
    """Hyperrectangle ``(0, l_1) x ... x (0, l_N)`` with a boundary flavor."""

    lengths: tuple[float, ...]
    boundary: Boundary = Boundary.NEUMANN

    def __post_init__(self):
        lengths = tuple(float(l) for l in np.atleast_1d(self.lengths))
        if not 1 <= len(lengths) <= MAX_DIM:
            raise ValidationError(f"dimension must be between 1 and {MAX_DIM}, got {len(lengths)}")
        if not all(np.isfinite(l) and l > 0 for l in lengths):
            raise ValidationError(f"side lengths must be positive and finite, got {lengths}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def scaled(self, t: float) -> "BoxDomain":
        return BoxDomain(tuple(t * l for l in self.lengths), self.boundary)

    def contains(self, x, slack: float = _CLOSURE_SLACK) -> np.ndarray:
        """Boolean mask of points lying in the closure of the box."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        l = np.asarray(self.lengths)
        return np.all((x >= -slack * l) & (x <= l * (1 + slack)), axis=-1)


@dataclass(frozen=True)
class ModeIndex:
    """Multi-index ``k`` plus a per-axis ``"cos"``/``"sin"`` tag."""

    k: tuple[int, ...]
    parity: tuple[str, ...]

    def __post_init__(self):
        if len(self.k) != len(self.parity):
            raise ValidationError("k and parity must have the same length")
        for ki, p in zip(self.k, self.parity):
            if ki < 0:
                raise ValidationError("mode indices must be nonnegative")
            if p not in ("cos", "sin"):
                raise ValidationError(f"unknown parity tag {p!r}")
            if p == "sin" and ki == 0:
                raise ValidationError("sin tag requires k_i >= 1")


def _axis_functions(boundary: Boundary, cutoff: int) -> list[tuple[int, str]]:
    """1D functions along one axis, as (frequency index, tag)."""
    if boundary is Boundary.NEUMANN:
        return [(k, "cos") for k in range(cutoff + 1)]
    out = [(0, "cos")]
    for k in range(1, cutoff + 1):
        out += [(k, "cos"), (k, "sin")]
    return out


def _axis_eigenvalue(boundary: Boundary, k: int, length: float) -> float:
    if boundary is Boundary.NEUMANN:
        return (k * np.pi / length) ** 2
    return (2 * np.pi * k / length) ** 2


def _axis_norm(k: int, length: float) -> float:
    return np.sqrt((1.0 if k == 0 else 2.0) / length)


@dataclass(frozen=True, eq=False)
class Basis:
    """Truncated, L2-orthonormal Laplacian eigenbasis on a box.

    ``axis_index[j, i]`` points into the list of 1D functions of axis ``i``
    used by mode ``j``; it is what the fast evaluation and assembly paths
    work with.
    """

    domain: BoxDomain
    cutoff: int
    modes: tuple[ModeIndex, ...]
    mu: np.ndarray
    norms: np.ndarray
    axis_index: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.modes)

    @property
    def size(self) -> int:
        return len(self.modes)

    @property
    def mu1(self) -> float:
        """First positive Laplacian eigenvalue."""
        return float(self.mu[1])

    def axis_functions(self, axis: int) -> list[tuple[int, str]]:
        return _axis_functions(self.domain.boundary, self.cutoff)

    def axis_values(self, axis: int, x) -> np.ndarray:
        """Normalized 1D factors of axis ``axis`` at coordinates ``x``.

        Returns an array of shape ``(n_axis_functions, len(x))``.
        """
        x = np.asarray(x, dtype=float)
        length = self.domain.lengths[axis]
        funcs = self.axis_functions(axis)
        k = np.array([f[0] for f in funcs], dtype=float)
        is_sin = np.array([f[1] == "sin" for f in funcs])
        scale = np.pi / length if self.domain.boundary is Boundary.NEUMANN else 2 * np.pi / length
        phase = np.outer(k * scale, x)
        vals = np.where(is_sin[:, None], np.sin(phase), np.cos(phase))
        c = np.array([_axis_norm(f[0], length) for f in funcs])
        return c[:, None] * vals


def enumerate_modes(domain: BoxDomain, cutoff: int) -> Basis:
    """Build the truncated eigenbasis with every per-axis index ``<= cutoff``.

    Modes are sorted by eigenvalue, then lexicographically by ``k``, then
    cos before sin, so the constant mode is always first.
    """
    if int(cutoff) != cutoff or cutoff < 1:
        raise ValidationError(f"cutoff must be an integer >= 1, got {cutoff}")
    cutoff = int(cutoff)
    if domain.dim > MAX_DIM:
        raise ValidationError(f"dimension {domain.dim} not supported")
    funcs = _axis_functions(domain.boundary, cutoff)
    entries = []
    for combo in itertools.product(range(len(funcs)), repeat=domain.dim):
        k = tuple(funcs[a][0] for a in combo)
        parity = tuple(funcs[a][1] for a in combo)
        mu = sum(_axis_eigenvalue(domain.boundary, ki, li) for ki, li in zip(k, domain.lengths))
        norm = float(np.prod([_axis_norm(ki, li) for ki, li in zip(k, domain.lengths)]))
        # tie comparison on mu must not depend on summation order
        key = (float(f"{mu:.12e}"), k, tuple(p == "sin" for p in parity))
        entries.append((key, ModeIndex(k, parity), mu, norm, combo))
    entries.sort(key=lambda e: e[0])
    mu = np.array([e[2] for e in entries])
    mu[0] = 0.0
    mu.setflags(write=False)
    norms = np.array([e[3] for e in entries])
    norms.setflags(write=False)
    axis_index = np.array([e[4] for e in entries], dtype=np.intp).reshape(len(entries), domain.dim)
    axis_index.setflags(write=False)
    return Basis(domain, cutoff, tuple(e[1] for e in entries), mu, norms, axis_index)


def _as_points(basis: Basis, x) -> np.ndarray:
    pts = np.asarray(getattr(x, "nodes", x), dtype=float)
    if pts.ndim == 1 and basis.domain.dim == 1 and pts.shape != (1,):
        pts = pts[:, None]
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != basis.domain.dim:
        raise ValidationError(f"points must have {basis.domain.dim} coordinates, got shape {pts.shape}")
    return pts


def eval_mode(basis: Basis, mode: int, x) -> float:
    """Value of the normalized eigenfunction ``phi_mode`` at the point ``x``."""
    if not 0 <= mode < basis.size:
        raise ValidationError(f"mode {mode} out of range for a basis of size {basis.size}")
    pt = np.asarray(x, dtype=float).reshape(1, basis.domain.dim)
    if not basis.domain.contains(pt)[0]:
        raise ValidationError(f"point {tuple(pt[0])} lies outside the domain")
    val = 1.0
    for i in range(basis.domain.dim):
        val *= basis.axis_values(i, pt[:, i])[basis.axis_index[mode, i], 0]
    return float(val)


def eval_mode_grid(basis: Basis, grid, modes=None) -> np.ndarray:
    """Table ``V[j, q] = phi_j(x_q)``.

    ``grid`` is a quadrature rule (anything with ``.nodes``) or an array of
    points.  ``modes`` optionally restricts the rows; an empty selection
    gives an empty table.
    """
    pts = _as_points(basis, grid)
    if not np.all(basis.domain.contains(pts)):
        raise ValidationError("grid nodes must lie in the domain")
    rows = np.arange(basis.size) if modes is None else np.asarray(modes, dtype=np.intp)
    out = np.ones((len(rows), len(pts)))
    for i in range(basis.domain.dim):
        out *= basis.axis_values(i, pts[:, i])[basis.axis_index[rows, i]]
    return out


# nodes per chunk when streaming over large rules
CHUNK = 4096


def synthesize(basis: Basis, points, coeffs) -> np.ndarray:
    """Pointwise values of ``sum_j coeffs[j] phi_j`` (chunked over points)."""
    pts = _as_points(basis, points)
    coeffs = np.asarray(coeffs, dtype=float)
    out = np.empty(len(pts))
    for start in range(0, len(pts), CHUNK):
        sl = slice(start, start + CHUNK)
        out[sl] = coeffs @ eval_mode_grid(basis, pts[sl])
    return out


def analyze(basis: Basis, points, values) -> np.ndarray:
    """``sum_q values[q] phi_j(x_q)`` for every mode ``j`` (chunked over points).

    With ``values = w * f`` this is the quadrature projection of ``f``.
    """
    pts = _as_points(basis, points)
    values = np.asarray(values, dtype=float)
    out = np.zeros(basis.size)
    for start in range(0, len(pts), CHUNK):
        sl = slice(start, start + CHUNK)
        out += eval_mode_grid(basis, pts[sl]) @ values[sl]
    return out
