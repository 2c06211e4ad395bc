"""Analytics of the learned dual signal on the (M, S) plane.

A decomposition becomes a trajectory of states ``(m_t, s_t)``. From it we
build a kernel density grid, the transition edge list, a per-cell mean
displacement field and a recurrent forecast that follows that field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .types import DegenerateInputError, DualSignal, InvalidInputError, OutOfDomainError


@dataclass(frozen=True)
class StatePoint:
    m: float
    s: float
    t: int

    def __post_init__(self):
        if not (np.isfinite(self.m) and np.isfinite(self.s)):
            raise InvalidInputError(f"state at t={self.t} is not finite")
        if self.s < 0:
            raise InvalidInputError(f"state at t={self.t} has negative dispersion {self.s}")


@dataclass(frozen=True)
class Transition:
    t_from: int
    t_to: int
    m: float
    s: float
    dm: float
    ds: float


@dataclass(frozen=True)
class DensityGrid:
    """Cell masses on an ``nm x ns`` grid; ``cells[i, j]`` covers ``m_axis[i:i+2] x s_axis[j:j+2]``."""

    m_axis: np.ndarray
    s_axis: np.ndarray
    cells: np.ndarray
    bandwidth: Tuple[float, float]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.cells.shape

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        return _centers(self.m_axis), _centers(self.s_axis)

    def cell_of(self, m: float, s: float) -> Tuple[int, int]:
        return _locate(self.m_axis, self.s_axis, m, s)

    def to_dict(self) -> dict:
        return {
            "m_axis": self.m_axis.tolist(),
            "s_axis": self.s_axis.tolist(),
            "cells": self.cells.tolist(),
            "bandwidth": list(self.bandwidth),
        }


@dataclass(frozen=True)
class VectorField:
    """Mean displacement per cell.

    ``support`` counts the edges originating in each cell. Cells without
    support are either marked ``interpolated`` (filled by inverse-distance
    weighting) or hold NaN vectors.
    """

    m_axis: np.ndarray
    s_axis: np.ndarray
    vectors: np.ndarray
    support: np.ndarray
    interpolated: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        return (self.support == 0) & ~self.interpolated

    def to_dict(self) -> dict:
        return {
            "m_axis": self.m_axis.tolist(),
            "s_axis": self.s_axis.tolist(),
            "dm": np.where(np.isnan(self.vectors[..., 0]), None, self.vectors[..., 0]).tolist(),
            "ds": np.where(np.isnan(self.vectors[..., 1]), None, self.vectors[..., 1]).tolist(),
            "support": self.support.tolist(),
            "interpolated": self.interpolated.tolist(),
        }


def _centers(edges: np.ndarray) -> np.ndarray:
    return 0.5 * (edges[:-1] + edges[1:])


def _locate(m_axis, s_axis, m, s) -> Tuple[int, int]:
    if not (m_axis[0] <= m <= m_axis[-1] and s_axis[0] <= s <= s_axis[-1]):
        raise OutOfDomainError(
            f"point ({m}, {s}) lies outside the grid [{m_axis[0]}, {m_axis[-1]}] x [{s_axis[0]}, {s_axis[-1]}]"
        )
    i = min(int(np.searchsorted(m_axis, m, side="right")) - 1, m_axis.size - 2)
    j = min(int(np.searchsorted(s_axis, s, side="right")) - 1, s_axis.size - 2)
    return max(i, 0), max(j, 0)


def states(signal: DualSignal, start: int = 0) -> List[StatePoint]:
    """The trajectory of ``(m_t, s_t)`` in time order, ``t`` counted from ``start``."""
    return [
        StatePoint(float(m), float(s), t) for t, (m, s) in enumerate(zip(signal.mean, signal.dispersion), start=start)
    ]


def _coords(points) -> Tuple[np.ndarray, np.ndarray]:
    pts = list(points)
    m = np.array([p.m for p in pts], dtype=float)
    s = np.array([p.s for p in pts], dtype=float)
    return m, s


def silverman_bandwidth(values: np.ndarray) -> float:
    return float(1.06 * np.std(values, ddof=1) * values.size ** (-0.2))


def density_grid(points: Sequence[StatePoint], grid: Tuple[int, int] = (50, 50), bandwidth=None, padding: float = 1.0) -> DensityGrid:
    """Gaussian kernel density on a regular grid, normalized to total mass 1.

    The grid spans the points plus ``padding`` bandwidths on each side and the
    density is evaluated at cell centers. ``bandwidth`` is a pair (or a
    scalar for both axes); by default Silverman's rule is applied per axis. An
    axis without spread borrows a tiny bandwidth from the other one.
    """
    m, s = _coords(points)
    nm, ns = grid
    if nm < 2 or ns < 2:
        raise InvalidInputError(f"grid needs at least 2 cells per axis, got {grid}")
    if m.size < 2:
        raise InvalidInputError("density needs at least 2 points")
    if np.ptp(m) == 0 and np.ptp(s) == 0:
        raise DegenerateInputError("all states are identical; the bandwidth would be zero")
    if bandwidth is None:
        bm, bs = silverman_bandwidth(m), silverman_bandwidth(s)
        bm = bm if bm > 0 else 1e-3 * bs
        bs = bs if bs > 0 else 1e-3 * bm
    else:
        bm, bs = (bandwidth, bandwidth) if np.isscalar(bandwidth) else bandwidth
        if not (bm > 0 and bs > 0):
            raise InvalidInputError(f"bandwidths must be positive, got {(bm, bs)}")
    m_axis = np.linspace(m.min() - padding * bm, m.max() + padding * bm, nm + 1)
    s_axis = np.linspace(s.min() - padding * bs, s.max() + padding * bs, ns + 1)
    km = np.exp(-0.5 * ((_centers(m_axis)[None, :] - m[:, None]) / bm) ** 2)
    ks = np.exp(-0.5 * ((_centers(s_axis)[None, :] - s[:, None]) / bs) ** 2)
    cells = km.T @ ks
    cells = cells / cells.sum()
    return DensityGrid(m_axis, s_axis, cells, (float(bm), float(bs)))


def transitions(points: Sequence[StatePoint]) -> List[Transition]:
    """Edges ``t -> t+1`` with their exact displacements."""
    pts = list(points)
    if len(pts) < 2:
        raise InvalidInputError("transitions need at least 2 points")
    return [Transition(a.t, b.t, a.m, a.s, b.m - a.m, b.s - a.s) for a, b in zip(pts[:-1], pts[1:])]


def vector_field(edges: Sequence[Transition], grid, idw_power: float = 2.0, fill: bool = True) -> VectorField:
    """Mean displacement of the edges originating in each cell.

    ``grid`` is a :class:`DensityGrid` or a pair of axis edge arrays. Edge
    origins outside the grid are assigned to the nearest border cell. With
    ``fill`` unsupported cells are interpolated by inverse-distance weighting
    over supported cell centers, distances measured in cell units.
    """
    edges = list(edges)
    if not edges:
        raise InvalidInputError("vector field needs at least one edge")
    if isinstance(grid, DensityGrid):
        m_axis, s_axis = grid.m_axis, grid.s_axis
    else:
        m_axis, s_axis = (np.asarray(a, dtype=float) for a in grid)
    nm, ns = m_axis.size - 1, s_axis.size - 1
    total = np.zeros((nm, ns, 2))
    support = np.zeros((nm, ns), dtype=int)
    for e in edges:
        i = int(np.clip(np.searchsorted(m_axis, e.m, side="right") - 1, 0, nm - 1))
        j = int(np.clip(np.searchsorted(s_axis, e.s, side="right") - 1, 0, ns - 1))
        total[i, j] += (e.dm, e.ds)
        support[i, j] += 1
    vectors = np.full((nm, ns, 2), np.nan)
    has = support > 0
    vectors[has] = total[has] / support[has][:, None]
    interpolated = np.zeros((nm, ns), dtype=bool)
    if fill and not has.all():
        ii, jj = np.meshgrid(np.arange(nm), np.arange(ns), indexing="ij")
        src = np.column_stack([ii[has], jj[has]]).astype(float)
        dst = np.column_stack([ii[~has], jj[~has]]).astype(float)
        d = np.sqrt(((dst[:, None, :] - src[None, :, :]) ** 2).sum(axis=2))
        wts = d ** (-idw_power)
        wts /= wts.sum(axis=1, keepdims=True)
        vectors[~has] = wts @ vectors[has]
        interpolated = ~has
    return VectorField(m_axis, s_axis, vectors, support, interpolated)


def _bilinear(field: VectorField, m: float, s: float) -> np.ndarray:
    cm, cs = _centers(field.m_axis), _centers(field.s_axis)

    def bracket(c, v):
        if c.size == 1 or v <= c[0]:
            return 0, 0, 0.0
        if v >= c[-1]:
            return c.size - 1, c.size - 1, 0.0
        k = int(np.searchsorted(c, v, side="right")) - 1
        return k, k + 1, (v - c[k]) / (c[k + 1] - c[k])

    i0, i1, a = bracket(cm, m)
    j0, j1, b = bracket(cs, s)
    corners = [(i0, j0, (1 - a) * (1 - b)), (i1, j0, a * (1 - b)), (i0, j1, (1 - a) * b), (i1, j1, a * b)]
    acc, mass = np.zeros(2), 0.0
    for i, j, wt in corners:
        v = field.vectors[i, j]
        if wt > 0 and np.all(np.isfinite(v)):
            acc += wt * v
            mass += wt
    if mass == 0:
        # empty cells are never treated as zero displacement
        raise OutOfDomainError(f"no field support near ({m}, {s})")
    return acc / mass


def forecast_next(current: StatePoint, field: VectorField, density: Optional[DensityGrid] = None, steps: int = 1) -> List[StatePoint]:
    """Follow the field from ``current`` for ``steps`` steps.

    The field vector at each position is interpolated bilinearly between cell
    centers; dispersion is clamped at zero. Only the starting point has to
    lie on the grid; later positions read the nearest border values.
    """
    if density is not None and not (
        np.array_equal(density.m_axis, field.m_axis) and np.array_equal(density.s_axis, field.s_axis)
    ):
        raise InvalidInputError("field and density must share a grid")
    if steps < 0:
        raise InvalidInputError(f"steps must be non-negative, got {steps}")
    _locate(field.m_axis, field.s_axis, current.m, current.s)
    out = []
    m, s, t = current.m, current.s, current.t
    for _ in range(steps):
        dm, ds = _bilinear(field, m, s)
        m, s, t = m + dm, max(0.0, s + ds), t + 1
        out.append(StatePoint(float(m), float(s), t))
    return out


def _equal_frequency_bins(x: np.ndarray, bins: int) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    labels = np.empty(x.size, dtype=int)
    labels[order] = np.arange(x.size) * bins // x.size
    return labels


def mutual_information(m_series, s_series, bins: int = 4) -> float:
    """Plug-in mutual information (nats) over equal-frequency bins.

    Ties are broken by position, so every bin receives ``T / bins`` samples
    up to rounding.
    """
    m = np.asarray(m_series, dtype=float)
    s = np.asarray(s_series, dtype=float)
    if m.shape != s.shape or m.ndim != 1:
        raise InvalidInputError("series must be one-dimensional and of equal length")
    if bins < 2:
        raise InvalidInputError(f"bins must be >= 2, got {bins}")
    if m.size < bins:
        raise InvalidInputError(f"need at least {bins} samples for {bins} bins")
    if np.ptp(m) == 0 or np.ptp(s) == 0:
        raise DegenerateInputError("mutual information is undefined for a constant series")
    a = _equal_frequency_bins(m, bins)
    b = _equal_frequency_bins(s, bins)
    joint = np.zeros((bins, bins))
    np.add.at(joint, (a, b), 1.0)
    joint /= m.size
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    # fsum makes the result independent of term order, hence exactly symmetric
    mi = math.fsum((joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])).tolist())
    return max(mi, 0.0)
