"""Quadratic bosonic models and their third-quantization structure matrices.

A model is fixed by a Hermitian ``H``, a symmetric ``K`` and a list of
linear bath operators ``L_mu = l_mu . a + k_mu . a^dag``. The bath
amplitudes carry the square root of the rate, so a loss channel of rate
``G`` on mode 0 is ``l = (sqrt(G), 0, ...)``, ``k = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
import json
import math
import os
import warnings

import numpy as np

from .errors import ModelError, PhaseWarning, UnknownPresetError, ValidityWarning
from .numerics import as_matrix

__all__ = [
    "BathVector",
    "QuadraticModel",
    "StructureMatrices",
    "HPFrame",
    "PRESETS",
    "build_bath_matrices",
    "build_structure",
    "preset",
    "rabi_critical_coupling",
    "hp_observable",
    "hp_occupation",
    "model_from_dict",
    "model_to_dict",
    "load_model",
    "dump_model",
]

HERMITIAN_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _vector(v, n=None, name="vector") -> np.ndarray:
    arr = np.array(v, dtype=np.complex128, copy=True).reshape(-1)
    if n is not None and arr.size != n:
        raise ModelError(f"{name} must have length {n}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite entries")
    return _frozen(arr)


@dataclass(frozen=True)
class BathVector:
    """Linear bath operator ``L = l . a + k . a^dag``.

    Amplitudes are sqrt-rate scaled; there is no separate rate field.
    """

    l: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        l = _vector(self.l, name="l")
        k = _vector(self.k, l.size, name="k")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "k", k)

    @property
    def n(self) -> int:
        return self.l.size

    @classmethod
    def annihilation(cls, n: int, site: int, rate: float) -> "BathVector":
        """Channel ``sqrt(rate) a_site``."""
        l = np.zeros(n, complex)
        l[site] = _sqrt_rate(rate)
        return cls(l, np.zeros(n, complex))

    @classmethod
    def creation(cls, n: int, site: int, rate: float) -> "BathVector":
        """Channel ``sqrt(rate) a_site^dag``."""
        k = np.zeros(n, complex)
        k[site] = _sqrt_rate(rate)
        return cls(np.zeros(n, complex), k)

    def is_real(self, tol: float = 1e-10) -> bool:
        return bool(np.all(np.abs(self.l.imag) <= tol) and np.all(np.abs(self.k.imag) <= tol))


def _sqrt_rate(rate) -> float:
    rate = float(rate)
    if not math.isfinite(rate) or rate < 0:
        raise ModelError(f"rates must be finite and nonnegative, got {rate}")
    return math.sqrt(rate)


@dataclass(frozen=True)
class QuadraticModel:
    """Open quadratic bosonic system.

    ``H_sys = a^dag H a + (a^dag K a^dag + h.c.)/2`` with Hermitian ``H``
    and symmetric ``K`` (checked to 1e-12 absolute), plus linear baths.
    """

    H: np.ndarray
    K: np.ndarray
    baths: tuple = ()

    def __post_init__(self):
        try:
            H = as_matrix(self.H, "H")
            K = as_matrix(self.K, "K")
        except ValueError as exc:
            raise ModelError(str(exc)) from None
        if H.shape != K.shape:
            raise ModelError(f"H and K must have the same shape, got {H.shape} and {K.shape}")
        if np.abs(H - H.conj().T).max(initial=0.0) > HERMITIAN_TOL:
            raise ModelError("H must be Hermitian")
        if np.abs(K - K.T).max(initial=0.0) > HERMITIAN_TOL:
            raise ModelError("K must be symmetric")
        baths = tuple(b if isinstance(b, BathVector) else BathVector(*b) for b in self.baths)
        for i, b in enumerate(baths):
            if b.n != H.shape[0]:
                raise ModelError(f"bath {i} has length {b.n}, expected {H.shape[0]}")
        object.__setattr__(self, "H", _frozen(H))
        object.__setattr__(self, "K", _frozen(K))
        object.__setattr__(self, "baths", baths)

    @property
    def n(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class StructureMatrices:
    """Bath matrices ``M, N, L`` and the ``2n x 2n`` matrices ``X, Y``.

    ``S0`` is the trace of ``X``.
    """

    M: np.ndarray
    N: np.ndarray
    L: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    S0: complex


@dataclass(frozen=True)
class HPFrame:
    """Holstein-Primakoff reference frame for mapping bosons to spins.

    Parameters
    ----------
    S : float
        Spin length, a positive integer or half-integer.
    orientations : tuple of {"up", "down"}
        Reference state per mode: ``"up"`` expands around ``|S>``,
        ``"down"`` around ``|-S>``.
    """

    S: float
    orientations: tuple

    def __post_init__(self):
        S = float(self.S)
        if not (S > 0 and math.isfinite(S) and abs(2 * S - round(2 * S)) < 1e-12):
            raise ModelError(f"S must be a positive half-integer, got {self.S}")
        ors = tuple(str(o) for o in self.orientations)
        bad = [o for o in ors if o not in ("up", "down")]
        if bad:
            raise ModelError(f"orientations must be 'up' or 'down', got {bad}")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "orientations", ors)

    @property
    def n(self) -> int:
        return len(self.orientations)


def build_bath_matrices(model: QuadraticModel):
    """Return ``(M, N, L)`` with ``M = sum l l^*``, ``N = sum k k^*``, ``L = sum l k^*``."""
    n = model.n
    M = np.zeros((n, n), complex)
    N = np.zeros((n, n), complex)
    L = np.zeros((n, n), complex)
    for b in model.baths:
        M += np.outer(b.l, b.l.conj())
        N += np.outer(b.k, b.k.conj())
        L += np.outer(b.l, b.k.conj())
    return M, N, L


def build_structure(model: QuadraticModel) -> StructureMatrices:
    """Assemble the third-quantization matrices ``X`` and ``Y``.

    ``X = 1/2 [[iH* - N* + M, -2iK - L + L^T], [2iK* - L* + L^H, -iH - N + M*]]``
    and ``Y = 1/2 [[-2iK* - L* - L^H, 2N], [2N^T, 2iK - L - L^T]]``.
    """
    M, N, L = build_bath_matrices(model)
    H, K = model.H, model.K
    Hc, Kc, Lc, Nc, Mc = H.conj(), K.conj(), L.conj(), N.conj(), M.conj()
    X = 0.5 * np.block([
        [1j * Hc - Nc + M, -2j * K - L + L.T],
        [2j * Kc - Lc + Lc.T, -1j * H - N + Mc],
    ])
    Y = 0.5 * np.block([
        [-2j * Kc - Lc - Lc.T, 2 * N],
        [2 * N.T, 2j * K - L - L.T],
    ])
    if np.abs(Y - Y.T).max(initial=0.0) > HERMITIAN_TOL * (1 + np.abs(Y).max(initial=0.0)):
        raise ModelError("Y is not symmetric; check K symmetry")
    mats = [_frozen(a) for a in (M, N, L, X, Y)]
    return StructureMatrices(*mats, S0=complex(np.trace(X)))


# ---------------------------------------------------------------------------
# presets

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)

PRESETS = {
    "afm_2spin": {
        "description": "open 2-spin model linearized around the AFM state |up, down>",
        "params": {"gamma_g": "gain rate on site A", "gamma_l": "loss rate on site B",
                   "g": "XX coupling", "S": "spin length for the HP frame (default 1000)"},
        "required": ("gamma_g", "gamma_l", "g"),
    },
    "fm_2spin_up": {
        "description": "open 2-spin model linearized around the FM state |up, up>",
        "params": {"gamma_g": "gain rate on site A", "gamma_l": "loss rate on site B",
                   "g": "XX coupling", "S": "spin length for the HP frame (default 1000)"},
        "required": ("gamma_g", "gamma_l", "g"),
    },
    "two_boson": {
        "description": "two coupled bosons with balanced loss on A and gain on B",
        "params": {"gamma": "loss/gain rate", "g": "hopping"},
        "required": ("gamma", "g"),
    },
    "rabi_normal": {
        "description": "open two-mode Rabi-type model in its normal phase",
        "params": {"omega": "mode frequency", "g": "coupling", "gamma": "loss/gain rate"},
        "required": ("omega", "g", "gamma"),
    },
}


def rabi_critical_coupling(omega: float, gamma: float) -> float:
    """Upper edge ``g_c = sqrt((1 + gamma^2/omega^2) / 2)`` of the normal phase."""
    return math.sqrt((1.0 + gamma ** 2 / omega ** 2) / 2.0)


def _spin_pair(gamma_g, gamma_l, g, S, fm: bool):
    if fm:
        H, K = g * SIGMA_X, np.zeros((2, 2), complex)
        baths = [BathVector.annihilation(2, 0, gamma_g), BathVector.creation(2, 1, gamma_l)]
        ors = ("up", "up")
    else:
        H, K = np.zeros((2, 2), complex), 0.5 * g * SIGMA_X
        baths = [BathVector.annihilation(2, 0, gamma_g), BathVector.annihilation(2, 1, gamma_l)]
        ors = ("up", "down")
    frame = HPFrame(S, ors) if S is not None else None
    return QuadraticModel(H, K, tuple(baths)), frame


def preset(name: str, **params):
    """Build a named model.

    Parameters
    ----------
    name : {"afm_2spin", "fm_2spin_up", "two_boson", "rabi_normal"}
    **params
        ``gamma_g, gamma_l, g`` (and optional ``S``) for the 2-spin
        presets, ``gamma, g`` for ``two_boson`` and ``omega, g, gamma``
        for ``rabi_normal``.

    Returns
    -------
    model : QuadraticModel
    frame : HPFrame or None

    Warns
    -----
    PhaseWarning
        ``rabi_normal`` with ``g >= g_c``; the model is still built.
    """
    if name not in PRESETS:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    info = PRESETS[name]
    missing = [p for p in info["required"] if p not in params]
    extra = [p for p in params if p not in info["params"]]
    if missing or extra:
        raise ModelError(f"preset {name!r}: missing {missing}, unexpected {extra}")
    p = {k: float(v) for k, v in params.items()}
    if name in ("afm_2spin", "fm_2spin_up"):
        return _spin_pair(p["gamma_g"], p["gamma_l"], p["g"], p.get("S", 1000.0),
                          fm=name == "fm_2spin_up")
    if name == "two_boson":
        model, _ = _spin_pair(p["gamma"], p["gamma"], p["g"], None, fm=True)
        return model, None
    omega, g, gamma = p["omega"], p["g"], p["gamma"]
    gc = rabi_critical_coupling(omega, gamma)
    if g >= gc:
        warnings.warn(f"rabi_normal: g={g} >= g_c={gc:.6g}, outside the normal phase",
                      PhaseWarning, stacklevel=2)
    r = omega * g ** 2 / 2
    H = np.array([[omega - r, -r], [-r, omega - r]], dtype=complex)
    K = -0.5 * r * np.ones((2, 2), dtype=complex)
    baths = (BathVector.annihilation(2, 0, gamma), BathVector.creation(2, 1, gamma))
    return QuadraticModel(H, K, baths), None


# ---------------------------------------------------------------------------
# Holstein-Primakoff mapping

def hp_observable(n_expect, frame: HPFrame, site: int, tol: float = 1e-8):
    """Normalized magnetization ``<S^z>/S`` from a boson occupation.

    ``1 - n/S`` for an up-vacuum site and ``-1 + n/S`` for a
    down-vacuum site. Accepts scalars or arrays.

    Warns
    -----
    ValidityWarning
        When ``n / (2S) >= 0.1`` anywhere, where the linearized mapping
        is no longer reliable.
    """
    n = np.asarray(n_expect)
    if np.iscomplexobj(n):
        if np.any(np.abs(n.imag) > tol):
            raise ValueError("occupation has a non-negligible imaginary part")
        n = n.real
    n = n.astype(float)
    if np.any(n < -tol):
        raise ValueError(f"occupation must be nonnegative, got min {n.min():.3e}")
    S = frame.S
    if np.any(n / (2 * S) >= 0.1):
        warnings.warn(f"n/(2S) reaches {np.max(n) / (2 * S):.3g}; HP mapping not reliable",
                      ValidityWarning, stacklevel=2)
    sign = 1.0 if frame.orientations[site] == "up" else -1.0
    out = sign * (1.0 - n / S)
    return float(out) if out.ndim == 0 else out


def hp_occupation(sz, frame: HPFrame, site: int) -> float:
    """Boson occupation for an absolute ``<S^z>`` value on ``site``."""
    S = frame.S
    n = S - sz if frame.orientations[site] == "up" else sz + S
    if n < 0 or n > 2 * S:
        raise ValueError(f"<S^z>={sz} is outside [-S, S] for S={S}")
    return float(n)


# ---------------------------------------------------------------------------
# model files

def _pairs(a):
    a = np.asarray(a)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [_pairs(row) for row in a]


def _from_pairs(obj, name):
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise ModelError(f"{name}: entries must be [re, im] number pairs") from None
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise ModelError(f"{name}: entries must be [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def model_to_dict(model: QuadraticModel, frame: HPFrame | None = None) -> dict:
    doc = {
        "n": model.n,
        "H": _pairs(model.H),
        "K": _pairs(model.K),
        "baths": [{"l": _pairs(b.l), "k": _pairs(b.k)} for b in model.baths],
    }
    if frame is not None:
        doc["hp"] = {"S": frame.S, "orientations": list(frame.orientations)}
    return doc


def model_from_dict(doc: dict):
    """Inverse of :func:`model_to_dict`; returns ``(model, frame_or_None)``."""
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    for key in ("n", "H", "K", "baths"):
        if key not in doc:
            raise ModelError(f"model document is missing field {key!r}")
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise ModelError(f"n must be a positive integer, got {n!r}")
    H = _from_pairs(doc["H"], "H")
    K = _from_pairs(doc["K"], "K")
    if H.shape != (n, n) or K.shape != (n, n):
        raise ModelError(f"H and K must be {n}x{n}")
    if not isinstance(doc["baths"], list):
        raise ModelError("baths must be a list")
    baths = []
    for i, b in enumerate(doc["baths"]):
        if not isinstance(b, dict) or "l" not in b or "k" not in b:
            raise ModelError(f"bath {i} must be an object with fields l and k")
        l = _from_pairs(b["l"], f"baths[{i}].l")
        k = _from_pairs(b["k"], f"baths[{i}].k")
        if l.shape != (n,) or k.shape != (n,):
            raise ModelError(f"bath {i} vectors must have length {n}")
        baths.append(BathVector(l, k))
    model = QuadraticModel(H, K, tuple(baths))
    frame = None
    if doc.get("hp") is not None:
        hp = doc["hp"]
        if not isinstance(hp, dict) or "S" not in hp or "orientations" not in hp:
            raise ModelError("hp must be an object with fields S and orientations")
        frame = HPFrame(hp["S"], tuple(hp["orientations"]))
        if frame.n != n:
            raise ModelError("hp.orientations length must equal n")
    return model, frame


def load_model(path: str | os.PathLike):
    """Read a JSON model file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file {path} is not valid JSON: {exc.msg}") from None
    return model_from_dict(doc)


def dump_model(model: QuadraticModel, path, frame: HPFrame | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, frame), fh, indent=2)
        fh.write("\n")
