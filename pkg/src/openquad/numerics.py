"""Dense complex linear algebra used by the rest of the package.

Eigenvalue clustering, numerical Jordan structure, the matrix
exponential and a Kronecker-vectorized Sylvester solver. Everything here
is a pure function of its inputs; matrices are plain ``complex128``
numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np
import scipy.linalg as sla

from .errors import LowConfidenceWarning, NoUniqueSolutionError

__all__ = [
    "DEFAULT_CLUSTER_TOL",
    "DEFAULT_RANK_TOL",
    "EigenClusters",
    "JordanSpec",
    "SylvesterInfo",
    "as_matrix",
    "eig",
    "jordan_structure",
    "expm",
    "solve_sylvester",
    "cluster_values",
]

DEFAULT_CLUSTER_TOL = 1e-8
DEFAULT_RANK_TOL = 1e-10


def as_matrix(A, name: str = "A", square: bool = True) -> np.ndarray:
    """Validate and convert ``A`` to a 2-d ``complex128`` array.

    Raises
    ------
    ValueError
        If ``A`` is not 2-d, not square (when ``square``), or contains
        NaN/Inf entries.
    """
    arr = np.array(A, dtype=np.complex128, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _sort_key(values: np.ndarray) -> np.ndarray:
    # deterministic order: ascending real part, then imaginary part
    return np.lexsort((np.round(values.imag, 12), np.round(values.real, 12)))


def cluster_values(values, radius: float) -> tuple[tuple[int, ...], ...]:
    """Partition indices of ``values`` into clusters of nearby points.

    Connected components of the graph ``|v_i - v_j| < radius`` are
    used when their diameter is below ``radius``; wider components are
    split greedily around leaders with radius ``radius / 2`` so that
    members of every returned cluster are pairwise closer than
    ``radius``.
    """
    values = np.asarray(values, dtype=np.complex128)
    n = values.size
    if n == 0:
        return ()
    radius = max(float(radius), np.finfo(float).tiny)
    dist = np.abs(values[:, None] - values[None, :])
    unseen = np.ones(n, dtype=bool)
    clusters = []
    for start in range(n):
        if not unseen[start]:
            continue
        comp = [start]
        unseen[start] = False
        head = 0
        while head < len(comp):
            i = comp[head]
            head += 1
            nb = np.flatnonzero(unseen & (dist[i] < radius))
            unseen[nb] = False
            comp.extend(nb.tolist())
        comp = sorted(comp)
        sub = dist[np.ix_(comp, comp)]
        if sub.max() < radius:
            clusters.append(tuple(comp))
            continue
        left = list(comp)
        while left:
            lead = left[0]
            members = [j for j in left if dist[lead, j] < radius / 2]
            clusters.append(tuple(members))
            left = [j for j in left if j not in members]
    clusters.sort(key=lambda c: min(c))
    return tuple(clusters)


@dataclass(frozen=True)
class EigenClusters:
    """Eigenvalues of a matrix grouped into numerically coincident clusters.

    Attributes
    ----------
    values : ndarray
        All eigenvalues, sorted by real then imaginary part.
    clusters : tuple of tuple of int
        Partition of ``range(len(values))``.
    condition : float
        Condition number of the eigenvector matrix (``inf`` when the
        eigenvectors are numerically dependent).
    cluster_tol : float
        Absolute clustering radius that was used.
    """

    values: np.ndarray
    clusters: tuple
    condition: float
    cluster_tol: float

    def __post_init__(self):
        self.values.setflags(write=False)

    def __len__(self):
        return self.values.size

    @property
    def representatives(self) -> np.ndarray:
        """Mean value of each cluster."""
        return np.array([self.values[list(c)].mean() for c in self.clusters])

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([len(c) for c in self.clusters], dtype=int)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def eig(A, tol_rel: float = DEFAULT_CLUSTER_TOL) -> EigenClusters:
    """Eigenvalues of a square matrix with clustering.

    Parameters
    ----------
    A : array_like
        Square matrix with finite entries.
    tol_rel : float
        Clustering radius relative to the spectral norm of ``A``.

    Returns
    -------
    EigenClusters
    """
    A = as_matrix(A)
    n = A.shape[0]
    if n == 0:
        return EigenClusters(np.zeros(0, complex), (), 1.0, 0.0)
    w, V = sla.eig(A)
    order = _sort_key(w)
    w = w[order]
    V = V[:, order]
    norm = np.linalg.norm(A, 2)
    radius = tol_rel * norm
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(V)) if n else 1.0
    if not np.isfinite(cond):
        cond = float("inf")
    return EigenClusters(w, cluster_values(w, radius), cond, float(radius))


@dataclass(frozen=True)
class JordanSpec:
    """Numerical Jordan structure of a matrix.

    Attributes
    ----------
    eigenvalues : tuple of complex
        Distinct eigenvalues (cluster means).
    block_sizes : tuple of tuple of int
        Jordan block sizes for each eigenvalue, sorted descending.
    low_confidence : bool
        Set when a rank decision was close to its threshold or the
        nullity sequence was inconsistent with the cluster size.
    """

    eigenvalues: tuple
    block_sizes: tuple
    low_confidence: bool = False
    notes: tuple = field(default=(), compare=False)

    @property
    def dimension(self) -> int:
        return int(sum(sum(b) for b in self.block_sizes))

    @property
    def max_block_size(self) -> int:
        return max((max(b) for b in self.block_sizes if b), default=0)

    @property
    def is_diagonalizable(self) -> bool:
        return self.max_block_size <= 1

    def items(self):
        return list(zip(self.eigenvalues, self.block_sizes))

    def slots(self) -> np.ndarray:
        """Eigenvalue repeated once per Jordan-chain slot."""
        out = []
        for lam, sizes in self.items():
            out.extend([lam] * sum(sizes))
        return np.array(out, dtype=complex)

    def as_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "block_sizes": [list(b) for b in self.block_sizes],
            "low_confidence": bool(self.low_confidence),
        }


def _rank(P: np.ndarray, thr: float):
    s = sla.svdvals(P)
    rank = int(np.count_nonzero(s > thr))
    above = s[s > thr]
    below = s[s <= thr]
    ambiguous = False
    if above.size and below.size and below[0] > 0:
        ambiguous = above[-1] / below[0] < 10.0
    return rank, ambiguous


def _blocks_from_ranks(A, beta, mult, norm, tol):
    """Block sizes of ``beta`` from nullities of powers of ``A - beta I``."""
    n = A.shape[0]
    B = A - beta * np.eye(n)
    P = np.eye(n, dtype=complex)
    nullities = [0]
    ambiguous = False
    for k in range(1, mult + 1):
        P = P @ B
        r, amb = _rank(P, tol * max(norm, np.finfo(float).tiny) ** k)
        ambiguous |= amb
        nu = n - r
        nullities.append(nu)
        if nu >= mult:
            break
    if nullities[-1] != mult:
        return None, ambiguous
    ge = np.diff(nullities)  # ge[k-1] = number of blocks of size >= k
    if np.any(ge < 0) or np.any(np.diff(ge) > 0):
        return None, ambiguous
    exact = np.append(ge[:-1] - ge[1:], ge[-1])
    sizes = []
    for k in range(len(exact), 0, -1):
        sizes.extend([k] * int(exact[k - 1]))
    return tuple(sizes), ambiguous


def jordan_structure(A, tol: float = DEFAULT_RANK_TOL,
                     cluster_tol: float = DEFAULT_CLUSTER_TOL) -> JordanSpec:
    """Infer Jordan block sizes from ranks of ``(A - beta I)^k``.

    Eigenvalues are first grouped with the generous radius
    ``max(sqrt(tol), cluster_tol) * ||A||``, because a defective
    eigenvalue of a block of size ``p`` splits by roughly
    ``eps**(1/p)`` in floating point. For each group the mean is taken
    as the eigenvalue and ranks are decided by singular-value
    thresholding at ``tol * ||A||**k``. Groups whose nullity sequence is
    inconsistent are re-split with the fine ``cluster_tol`` radius and,
    failing that, reported as semisimple with ``low_confidence`` set.

    Parameters
    ----------
    A : array_like
        Square matrix.
    tol : float
        Relative singular-value threshold.
    cluster_tol : float
        Fine clustering radius relative to ``||A||``.
    """
    A = as_matrix(A)
    n = A.shape[0]
    norm = np.linalg.norm(A, 2) if n else 0.0
    if n == 0:
        return JordanSpec((), ())
    w = sla.eigvals(A)
    w = w[_sort_key(w)]
    coarse = cluster_values(w, max(np.sqrt(tol), cluster_tol) * norm)
    groups = []
    low = False
    notes = []
    for cl in coarse:
        vals = w[list(cl)]
        sizes, amb = _blocks_from_ranks(A, vals.mean(), len(cl), norm, tol)
        low |= amb
        if sizes is not None:
            groups.append((complex(vals.mean()), sizes))
            continue
        for sub in cluster_values(vals, cluster_tol * norm):
            sv = vals[list(sub)]
            s2, amb2 = _blocks_from_ranks(A, sv.mean(), len(sub), norm, tol)
            low |= amb2
            if s2 is None:
                low = True
                notes.append(f"inconsistent nullities near {complex(sv.mean()):.6g}")
                s2 = (1,) * len(sub)
            groups.append((complex(sv.mean()), s2))
    groups.sort(key=lambda g: (round(g[0].real, 12), round(g[0].imag, 12)))
    if low:
        warnings.warn("jordan_structure: rank decision close to threshold",
                      LowConfidenceWarning, stacklevel=2)
    return JordanSpec(tuple(g[0] for g in groups), tuple(g[1] for g in groups),
                      bool(low), tuple(notes))


def expm(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with Pade approximants.

    Thin wrapper over :func:`scipy.linalg.expm` that validates the input
    and turns overflow into an error naming the 1-norm of ``A``.

    Raises
    ------
    OverflowError
        If the result is not finite.
    """
    A = as_matrix(A)
    with np.errstate(over="ignore", invalid="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        E = sla.expm(A)
    if not np.all(np.isfinite(E)):
        norm = np.linalg.norm(A, 1)
        raise OverflowError(f"matrix exponential overflowed for ||A||_1 = {norm:.6e}")
    return E


@dataclass(frozen=True)
class SylvesterInfo:
    """Diagnostics returned by :func:`solve_sylvester` with ``full_output``."""

    residual: float
    min_separation: float
    rcond: float


def solve_sylvester(A, B, C, sing_tol: float = 1e-12, full_output: bool = False):
    """Solve ``A Z + Z B = C`` by Kronecker vectorization.

    The system ``(I (x) A + B^T (x) I) vec(Z) = vec(C)`` with
    column-stacking ``vec`` is solved directly. Cost is O((mn)^3), fine
    for the at most 16x16 structure matrices used here.

    Parameters
    ----------
    A : (m, m) array_like
    B : (n, n) array_like
    C : (m, n) array_like
    sing_tol : float
        The system is declared singular when the reciprocal condition
        number of the Kronecker matrix is below this value.
    full_output : bool
        Also return a :class:`SylvesterInfo`.

    Raises
    ------
    NoUniqueSolutionError
        When some ``alpha_i + beta_j`` vanishes numerically.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C", square=False)
    m, n = A.shape[0], B.shape[0]
    if C.shape != (m, n):
        raise ValueError(f"C must have shape {(m, n)}, got {C.shape}")
    alphas = sla.eigvals(A)
    betas = sla.eigvals(B)
    sep = float(np.abs(alphas[:, None] + betas[None, :]).min()) if m and n else np.inf
    K = np.kron(np.eye(n), A) + np.kron(B.T, np.eye(m))
    s = sla.svdvals(K)
    rcond = float(s[-1] / s[0]) if s.size and s[0] > 0 else 0.0
    if s.size and rcond <= sing_tol:
        raise NoUniqueSolutionError("no unique stationary solution", sep)
    z = np.linalg.solve(K, C.reshape(-1, order="F")) if s.size else np.zeros(0)
    Z = z.reshape((m, n), order="F")
    residual = float(np.linalg.norm(A @ Z + Z @ B - C))
    if full_output:
        return Z, SylvesterInfo(residual, sep, rcond)
    return Z
