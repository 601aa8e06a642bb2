"""Rapidities, the enumerated Liouvillian spectrum, the gap and EP scans.

Every Liouvillian eigenvalue of a quadratic model has the form
``lambda = -2 sum_r m_r beta_r`` with ``m_r >= 0`` integers and
``beta_r`` the eigenvalues of ``X`` (at a defective eigenvalue every slot
of the Jordan chain reuses the block eigenvalue). The spectrum is
infinite, so it is enumerated up to a total order ``sum m_r <= max_order``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math
from typing import Callable, Iterable, Mapping

import numpy as np

from .numerics import (DEFAULT_CLUSTER_TOL, DEFAULT_RANK_TOL, EigenClusters, JordanSpec,
                       cluster_values, eig, jordan_structure)

__all__ = [
    "SpectrumEntry",
    "LiouvillianSpectrum",
    "EPPoint",
    "beta_spectrum",
    "enumerate_liouvillian",
    "liouvillian_gap",
    "ep_scan",
    "parameter_grid",
]

DEFAULT_MAX_ORDER = 6
DEFAULT_MAX_ENTRIES = 200_000


def beta_spectrum(X, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> EigenClusters:
    """Eigenvalues of ``X`` with clustering (see :func:`numerics.eig`)."""
    return eig(X, cluster_tol)


@dataclass(frozen=True)
class SpectrumEntry:
    """One distinct Liouvillian eigenvalue.

    ``representative`` is one multi-index ``m`` (one entry per slot of
    ``X``) with ``lambda = -2 sum m_r beta_r``; ``collisions`` counts
    additional occupation patterns over distinct rapidities that land
    on the same value.
    """

    value: complex
    multiplicity: int
    representative: tuple
    collisions: int = 0


@dataclass(frozen=True)
class LiouvillianSpectrum:
    """Enumerated Liouvillian eigenvalues up to a total order.

    Attributes
    ----------
    entries : tuple of SpectrumEntry
        Sorted by decreasing real part, then imaginary part.
    max_order : int
    validity : {"rigorous", "formal"}
        ``rigorous`` when every ``Re beta > 0``; ``formal`` otherwise.
    truncated : bool
        Set when the enumeration hit ``max_entries``.
    betas : ndarray
        Slot eigenvalues used for the enumeration.
    """

    entries: tuple
    max_order: int
    validity: str
    truncated: bool = False
    betas: np.ndarray = field(default_factory=lambda: np.zeros(0, complex), compare=False)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries], dtype=complex)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([e.multiplicity for e in self.entries], dtype=int)

    @property
    def collision_count(self) -> int:
        return int(sum(e.collisions for e in self.entries))

    def rows(self):
        """``(re_lambda, im_lambda, multiplicity)`` tuples."""
        return [(e.value.real, e.value.imag, e.multiplicity) for e in self.entries]


def _compositions(total_max: int, parts: int):
    """All tuples of ``parts`` nonnegative ints with sum <= total_max."""
    if parts == 0:
        yield ()
        return
    for first in range(total_max + 1):
        for rest in _compositions(total_max - first, parts - 1):
            yield (first,) + rest


def enumerate_liouvillian(betas, jordan: JordanSpec | None = None,
                          max_order: int = DEFAULT_MAX_ORDER,
                          tol: float = DEFAULT_CLUSTER_TOL,
                          max_entries: int = DEFAULT_MAX_ENTRIES) -> LiouvillianSpectrum:
    """Enumerate ``lambda = -2 sum m_r beta_r`` for ``sum m_r <= max_order``.

    Parameters
    ----------
    betas : EigenClusters or array_like
        Rapidities. Clusters (or, when given, the Jordan structure)
        define the distinct values; every slot in a group uses the
        group's eigenvalue.
    jordan : JordanSpec, optional
        Takes precedence over the clustering of ``betas``.
    max_order : int
        Total order cutoff.
    tol : float
        Relative tolerance; values are merged within
        ``tol * 2 * max_order * max|beta|``.
    max_entries : int
        Cap on the number of occupation patterns visited.

    Returns
    -------
    LiouvillianSpectrum
    """
    if max_order < 0:
        raise ValueError("max_order must be nonnegative")
    if jordan is not None:
        distinct = np.array(jordan.eigenvalues, dtype=complex)
        mult = np.array([sum(b) for b in jordan.block_sizes], dtype=int)
    elif isinstance(betas, EigenClusters):
        distinct = betas.representatives
        mult = betas.multiplicities
    else:
        vals = np.asarray(betas, dtype=complex).reshape(-1)
        scale = float(np.abs(vals).max(initial=0.0))
        groups = cluster_values(vals, tol * scale)
        distinct = np.array([vals[list(g)].mean() for g in groups], dtype=complex)
        mult = np.array([len(g) for g in groups], dtype=int)
    order = np.lexsort((distinct.imag, distinct.real))
    distinct, mult = distinct[order], mult[order]
    slots = np.repeat(distinct, mult)
    scale = float(np.abs(distinct).max(initial=0.0))
    validity = "rigorous" if np.all(distinct.real > tol * scale) else "formal"

    values, weights, reps = [], [], []
    truncated = False
    for count, a in enumerate(_compositions(max_order, distinct.size)):
        if count >= max_entries:
            truncated = True
            break
        w = 1
        for aj, gj in zip(a, mult):
            w *= math.comb(aj + gj - 1, gj - 1)
        values.append(-2.0 * complex(np.dot(a, distinct)))
        weights.append(w)
        m = []
        for aj, gj in zip(a, mult):
            m.extend([aj] + [0] * (gj - 1))
        reps.append(tuple(m))
    values = np.array(values, dtype=complex)
    merge_tol = tol * 2 * max(max_order, 1) * max(scale, 1e-300)
    groups = cluster_values(values, merge_tol)
    entries = []
    for g in groups:
        g = list(g)
        # representative: lowest total order, then lexicographic
        best = min(g, key=lambda i: (sum(reps[i]), reps[i]))
        v = values[best]
        if abs(v.real) <= merge_tol:
            v = complex(0.0, v.imag)
        if abs(v.imag) <= merge_tol:
            v = complex(v.real, 0.0)
        entries.append(SpectrumEntry(v, int(sum(weights[i] for i in g)), reps[best], len(g) - 1))
    entries.sort(key=lambda e: (-round(e.value.real, 12), round(e.value.imag, 12)))
    return LiouvillianSpectrum(tuple(entries), int(max_order), validity, truncated, slots)


def liouvillian_gap(betas) -> float:
    """``2 * min Re beta`` clamped at zero."""
    values = betas.values if isinstance(betas, EigenClusters) else np.asarray(betas, complex)
    if np.size(values) == 0:
        return 0.0
    return max(0.0, 2.0 * float(np.min(np.real(values))))


@dataclass(frozen=True)
class EPPoint:
    """A grid point where ``X`` is not diagonalizable."""

    params: dict
    jordan: JordanSpec


def parameter_grid(axes: Mapping[str, Iterable[float]]):
    """Cartesian product of named axes, last axis varying fastest."""
    names = list(axes)
    values = [list(axes[k]) for k in names]
    return [dict(zip(names, combo)) for combo in itertools.product(*values)]


def ep_scan(family: Callable[..., np.ndarray] | str, grid, tol: float = DEFAULT_RANK_TOL,
            fixed: Mapping | None = None):
    """Scan a parameter grid for exceptional points of ``X``.

    Parameters
    ----------
    family : callable or str
        Either ``family(**params) -> X`` or a preset name.
    grid : mapping of axes or iterable of dicts
        Axes are expanded with :func:`parameter_grid`.
    tol : float
        Rank threshold passed to :func:`numerics.jordan_structure`.
    fixed : mapping, optional
        Extra parameters passed at every point.

    Returns
    -------
    list of EPPoint
        Points with a Jordan block of size at least 2, in grid order.
        Low-confidence decisions are kept on ``EPPoint.jordan``.
    """
    import warnings

    from .errors import LowConfidenceWarning
    from .model import build_structure, preset

    if isinstance(family, str):
        name = family

        def family(**p):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return build_structure(preset(name, **p)[0]).X

    points = parameter_grid(grid) if isinstance(grid, Mapping) else list(grid)
    if not points:
        raise ValueError("grid is empty")
    fixed = dict(fixed or {})
    found = []
    for p in points:
        X = family(**fixed, **p)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LowConfidenceWarning)
            js = jordan_structure(X, tol)
        if not js.is_diagonalizable:
            found.append(EPPoint(dict(p), js))
    return found
