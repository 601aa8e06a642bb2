"""PT-symmetry checks at the level of the model and of the matrix ``iX``.

Two notions are covered:

* the Liouvillian criterion on the model: the Hamiltonian is invariant
  under reflection plus complex conjugation, and the bath set is closed
  under the pairing ``(l, k) -> (P k, P l)`` which swaps gain and loss;
* conventional PT (or anti-PT) symmetry of ``iX`` for a given parity.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .model import QuadraticModel
from .numerics import EigenClusters, as_matrix

__all__ = [
    "ParitySpec",
    "SymmetryReport",
    "reflection",
    "check_huber",
    "check_matrix_pt",
    "check_all",
    "classify_beta_pt",
]

DEFAULT_TOL = 1e-10
PARITY_KINDS = ("reflection", "sector_swap")


def reflection(n: int) -> np.ndarray:
    """Index reflection ``i -> n-1-i`` as an ``n x n`` permutation matrix."""
    return np.fliplr(np.eye(n))


@dataclass(frozen=True)
class ParitySpec:
    """Parity acting on the ``2n``-dimensional space of ``X``.

    ``reflection`` is ``blockdiag(P_n, P_n)``; ``sector_swap`` is
    ``[[0, P_n], [P_n, 0]]``.
    """

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in PARITY_KINDS:
            raise ValueError(f"parity kind must be one of {PARITY_KINDS}, got {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be positive")

    def matrix(self) -> np.ndarray:
        Pn = reflection(self.n)
        Z = np.zeros_like(Pn)
        if self.kind == "reflection":
            return np.block([[Pn, Z], [Z, Pn]])
        return np.block([[Z, Pn], [Pn, Z]])


@dataclass(frozen=True)
class SymmetryReport:
    """Symmetry verdicts with their residuals.

    A verdict of ``None`` means the check was not run or is not
    applicable (complex bath vectors for the bath criterion). Each
    boolean is true iff its residual is at most ``tol``.
    """

    huber_hamiltonian: Optional[bool] = None
    huber_baths: Optional[bool] = None
    matrix_pt: Optional[bool] = None
    matrix_anti_pt: Optional[bool] = None
    residuals: dict = field(default_factory=dict)
    tol: float = DEFAULT_TOL
    parity: Optional[str] = None
    diagnostics: tuple = ()

    def merge(self, other: "SymmetryReport") -> "SymmetryReport":
        """Combine with a report holding the complementary fields."""
        kw = {}
        for name in ("huber_hamiltonian", "huber_baths", "matrix_pt", "matrix_anti_pt", "parity"):
            mine = getattr(self, name)
            kw[name] = mine if mine is not None else getattr(other, name)
        kw["residuals"] = {**other.residuals, **self.residuals}
        kw["diagnostics"] = self.diagnostics + other.diagnostics
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {
            "huber_hamiltonian": self.huber_hamiltonian,
            "huber_baths": self.huber_baths,
            "matrix_pt": self.matrix_pt,
            "matrix_anti_pt": self.matrix_anti_pt,
            "residuals": {k: self.residuals[k] for k in sorted(self.residuals)},
            "tol": self.tol,
            "parity": self.parity,
            "diagnostics": list(self.diagnostics),
        }


def _rel(num: float, scale: float) -> float:
    return float(num / scale) if scale > 0 else float(num)


def check_huber(model: QuadraticModel, tol: float = DEFAULT_TOL) -> SymmetryReport:
    """Liouvillian PT criterion on a quadratic model.

    ``huber_hamiltonian`` holds when ``H = P H* P`` and ``K = P K* P``.
    ``huber_baths`` holds when every bath ``(l, k)`` has a partner
    (possibly itself) equal to ``(P k, P l)``. Bath vectors must be real;
    otherwise the bath verdict is ``None`` (not applicable).
    Residuals are relative to ``||H|| + ||K||`` and to the largest bath
    amplitude respectively.
    """
    P = reflection(model.n)
    H, K = model.H, model.K
    res_h = max(np.linalg.norm(H - P @ H.conj() @ P), np.linalg.norm(K - P @ K.conj() @ P))
    res_h = _rel(res_h, np.linalg.norm(H) + np.linalg.norm(K))
    residuals = {"huber_hamiltonian": res_h}
    diagnostics = []

    baths = model.baths
    scale = max((np.linalg.norm(b.l) + np.linalg.norm(b.k) for b in baths), default=0.0)
    real = all(b.is_real(tol * max(scale, 1.0)) for b in baths)
    if not real:
        verdict_b = None
        residuals["huber_baths"] = None
        diagnostics.append("complex bath vectors: bath criterion not applicable")
    else:
        worst = 0.0
        unmatched = []
        for mu, b in enumerate(baths):
            tl, tk = P @ b.k.real, P @ b.l.real
            best = min(np.linalg.norm(c.l.real - tl) + np.linalg.norm(c.k.real - tk) for c in baths)
            best = _rel(best, scale)
            if best > tol:
                unmatched.append(mu)
            worst = max(worst, best)
        residuals["huber_baths"] = worst
        verdict_b = worst <= tol
        if unmatched:
            diagnostics.append(f"baths without a PT partner: {unmatched}")
    return SymmetryReport(huber_hamiltonian=res_h <= tol, huber_baths=verdict_b,
                          residuals=residuals, tol=tol, diagnostics=tuple(diagnostics))


def check_matrix_pt(X, parity="reflection", tol: float = DEFAULT_TOL) -> SymmetryReport:
    """Conventional PT and anti-PT symmetry of ``iX``.

    ``iX`` commutes with PT iff ``P X* P = -X`` and anticommutes iff
    ``P X* P = X``. Residuals are normalized by ``||X||``.

    Parameters
    ----------
    X : (2n, 2n) array_like
    parity : ParitySpec or {"reflection", "sector_swap"}
    tol : float
    """
    X = as_matrix(X, "X")
    dim = X.shape[0]
    if isinstance(parity, str):
        if dim % 2:
            raise ValueError(f"X must have even dimension, got {dim}")
        parity = ParitySpec(parity, dim // 2)
    if 2 * parity.n != dim:
        raise ValueError(f"parity acts on dimension {2 * parity.n}, X has dimension {dim}")
    P = parity.matrix()
    T = P @ X.conj() @ P
    scale = np.linalg.norm(X)
    pt = _rel(np.linalg.norm(T + X), scale)
    apt = _rel(np.linalg.norm(T - X), scale)
    return SymmetryReport(matrix_pt=pt <= tol, matrix_anti_pt=apt <= tol,
                          residuals={"matrix_pt": pt, "matrix_anti_pt": apt},
                          tol=tol, parity=parity.kind)


def check_all(model: QuadraticModel, X=None, parity="reflection",
              tol: float = DEFAULT_TOL) -> SymmetryReport:
    """Run both the model criterion and the matrix check."""
    if X is None:
        from .model import build_structure
        X = build_structure(model).X
    return check_huber(model, tol).merge(check_matrix_pt(X, parity, tol))


def classify_beta_pt(betas, tol: float = DEFAULT_TOL) -> str:
    """Classify the eigenvalues of a PT-symmetric ``iX``.

    Returns
    -------
    {"unbroken", "broken", "mixed"}
        ``unbroken`` when every ``|Re beta| <= tol * ||beta||``;
        ``broken`` when every beta with nonzero real part has a partner
        with opposite real part and equal imaginary part; otherwise
        ``mixed``.
    """
    values = betas.values if isinstance(betas, EigenClusters) else np.asarray(betas, complex)
    values = np.asarray(values, dtype=complex).reshape(-1)
    scale = float(np.linalg.norm(values))
    thr = tol * scale
    re, im = values.real, values.imag
    if np.all(np.abs(re) <= thr):
        return "unbroken"
    for i in np.flatnonzero(np.abs(re) > thr):
        ok = np.any((np.abs(re + re[i]) <= thr) & (np.abs(im - im[i]) <= thr))
        if not ok:
            return "mixed"
    return "broken"
