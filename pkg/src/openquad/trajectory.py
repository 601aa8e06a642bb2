"""Finite-spin two-site Lindblad dynamics and quantum-jump unraveling.

The model is two spins ``S`` with

    H = (g / 2S) (S_A^+ S_B^- + S_A^- S_B^+)
    drho/dt = -i[H, rho] + (G_g / 2S) D[S_A^+] rho + (G_l / 2S) D[S_B^-] rho

and the dissipator convention ``D[c] rho = 2 c rho c^dag - c^dag c rho - rho c^dag c``.
With jump operators ``c_g = sqrt(G_g/2S) S_A^+`` and
``c_l = sqrt(G_l/2S) S_B^-`` the effective Hamiltonian is
``H_eff = H - i sum c^dag c`` and channel ``mu`` fires at rate
``2 ||c_mu psi||^2``.

Single-site basis order is ``m = S, S-1, ..., -S``; the joint index of
``|m_A> (x) |m_B>`` is ``(S - m_A) * (2S + 1) + (S - m_B)``.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
import math
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IntegrationError, ModelError, ValidityWarning

__all__ = [
    "SpinModel",
    "LindbladResult",
    "SteadyState",
    "TrajectoryEnsemble",
    "spin_operators",
    "lindblad_evolve",
    "steady_state",
    "mc_trajectories",
]

DEFAULT_MAX_S = 15
TRACE_DRIFT = 1e-6
JUMP_BOUND = 0.05
RNG_CHUNK = 1024


def spin_operators(S: float):
    """Dense ``(S^+, S^z)`` for spin ``S`` in the basis ``m = S..-S``."""
    d = int(round(2 * S)) + 1
    m = S - np.arange(d)
    Sp = np.zeros((d, d))
    for k in range(1, d):
        Sp[k - 1, k] = math.sqrt(S * (S + 1) - m[k] * (m[k] + 1))
    return Sp, np.diag(m)


@dataclass(frozen=True)
class SpinModel:
    """Two spins ``S`` with XX coupling ``g``, gain on A and loss on B."""

    S: float
    g: float
    gamma_g: float
    gamma_l: float

    def __post_init__(self):
        S = float(self.S)
        if not (S > 0 and abs(2 * S - round(2 * S)) < 1e-12):
            raise ModelError(f"S must be a positive half-integer, got {self.S}")
        for name in ("gamma_g", "gamma_l"):
            v = float(getattr(self, name))
            if not (v >= 0 and math.isfinite(v)):
                raise ModelError(f"{name} must be finite and nonnegative, got {v}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "g", float(self.g))

    @property
    def d1(self) -> int:
        return int(round(2 * self.S)) + 1

    @property
    def d(self) -> int:
        return self.d1 ** 2

    def index(self, m_a: float, m_b: float) -> int:
        """Joint basis index of ``|m_a> (x) |m_b>``."""
        ia, ib = self.S - m_a, self.S - m_b
        if not (0 <= ia < self.d1 and 0 <= ib < self.d1):
            raise ValueError(f"({m_a}, {m_b}) outside the spin-{self.S} range")
        return int(round(ia)) * self.d1 + int(round(ib))

    def product_state(self, m_a: float, m_b: float) -> np.ndarray:
        psi = np.zeros(self.d, complex)
        psi[self.index(m_a, m_b)] = 1.0
        return psi

    @cached_property
    def ops(self) -> dict:
        """Sparse operators: ``sp_a, sm_a, sp_b, sm_b, sz_a, sz_b, H, jumps, h_eff``."""
        Sp, Sz = spin_operators(self.S)
        I = sp.identity(self.d1, format="csr")
        Sp = sp.csr_matrix(Sp)
        Sm = Sp.T.tocsr()
        Sz = sp.csr_matrix(Sz)
        o = {
            "sp_a": sp.kron(Sp, I, format="csr"),
            "sm_a": sp.kron(Sm, I, format="csr"),
            "sp_b": sp.kron(I, Sp, format="csr"),
            "sm_b": sp.kron(I, Sm, format="csr"),
            "sz_a": sp.kron(Sz, I, format="csr"),
            "sz_b": sp.kron(I, Sz, format="csr"),
        }
        two_s = 2 * self.S
        H = (self.g / two_s) * (o["sp_a"] @ o["sm_b"] + o["sm_a"] @ o["sp_b"])
        jumps = [math.sqrt(self.gamma_g / two_s) * o["sp_a"],
                 math.sqrt(self.gamma_l / two_s) * o["sm_b"]]
        jumps = [sp.csr_matrix(c, dtype=complex) for c in jumps]
        h_eff = sp.csr_matrix(H, dtype=complex) - 1j * sum(c.conj().T @ c for c in jumps)
        o["H"] = sp.csr_matrix(H, dtype=complex)
        o["jumps"] = jumps
        o["h_eff"] = h_eff.tocsr()
        return o

    @cached_property
    def liouvillian(self) -> sp.csr_matrix:
        """Column-stacking superoperator: ``vec(drho/dt) = L vec(rho)``."""
        H = self.ops["H"]
        I = sp.identity(self.d, format="csr", dtype=complex)
        L = -1j * (sp.kron(I, H) - sp.kron(H.T, I))
        for c in self.ops["jumps"]:
            cdc = (c.conj().T @ c).tocsr()
            L = L + 2 * sp.kron(c.conj(), c) - sp.kron(I, cdc) - sp.kron(cdc.T, I)
        L = sp.csr_matrix(L)
        L.eliminate_zeros()
        return L


def _reachable(L: sp.csr_matrix, start: np.ndarray) -> np.ndarray:
    """Indices reachable from ``start`` along the sparsity graph of ``L``."""
    pattern = (L != 0).astype(np.int8).tocsr()
    mask = np.zeros(L.shape[0], dtype=bool)
    mask[start] = True
    frontier = mask.copy()
    while frontier.any():
        hit = (pattern @ frontier.astype(np.int8)) != 0
        frontier = hit & ~mask
        mask |= hit
    return np.flatnonzero(mask)


class _Reduced:
    """The Liouvillian restricted to the subspace reachable from ``rho0``."""

    def __init__(self, model: SpinModel, rho_vec: np.ndarray):
        d = model.d
        L = model.liouvillian
        self.idx = _reachable(L, np.flatnonzero(rho_vec != 0))
        self.L = L[self.idx][:, self.idx].tocsr()
        pos = np.full(d * d, -1)
        pos[self.idx] = np.arange(self.idx.size)
        rows, cols = self.idx % d, self.idx // d
        self.perm = pos[rows * d + cols]  # position of the transposed element
        if np.any(self.perm < 0):
            raise IntegrationError("reachable subspace is not closed under transposition")
        diag = np.flatnonzero(rows == cols)
        self.diag = diag
        self.diag_level = rows[diag]
        self.d = d
        self.norm = float(spla.norm(self.L, np.inf))

    def trace(self, v):
        return v[self.diag].sum()

    def hermitize(self, v):
        return 0.5 * (v + v[self.perm].conj())

    def expect_diag(self, v, diag_op):
        return float(np.real(np.dot(v[self.diag], diag_op[self.diag_level])))

    def dense(self, v):
        full = np.zeros(self.d * self.d, complex)
        full[self.idx] = v
        return full.reshape((self.d, self.d), order="F")

    def rk4(self, v, h):
        L = self.L
        k1 = L @ v
        k2 = L @ (v + 0.5 * h * k1)
        k3 = L @ (v + 0.5 * h * k2)
        k4 = L @ (v + h * k3)
        return v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_rho(model: SpinModel, rho0, max_S: float):
    if model.S > max_S:
        raise ModelError(f"S={model.S} exceeds the dense cap max_S={max_S}")
    rho = np.asarray(rho0, dtype=complex)
    if rho.ndim == 1:
        if abs(np.linalg.norm(rho) - 1) > 1e-10:
            raise ValueError("pure state must be normalized")
        rho = np.outer(rho, rho.conj())
    if rho.shape != (model.d, model.d):
        raise ValueError(f"rho0 must be {model.d}x{model.d}, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > 1e-10:
        raise ValueError("rho0 must be Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10:
        raise ValueError("rho0 must have unit trace")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("rho0 must be positive semidefinite")
    return rho


@dataclass(frozen=True)
class LindbladResult:
    """Observables of a Lindblad integration on a time grid.

    ``sz_a`` and ``sz_b`` are normalized by ``S``. ``min_eigenvalue``
    is the smallest eigenvalue of ``rho`` seen at the output times (NaN
    when positivity was not checked).
    """

    times: np.ndarray
    sz_a: np.ndarray
    sz_b: np.ndarray
    trace: np.ndarray
    purity: np.ndarray
    rho_final: np.ndarray
    dt: float
    subspace_dim: int
    min_eigenvalue: float = float("nan")


def _default_dt(norm: float, factor: float) -> float:
    return factor / norm if norm > 0 else 0.1


def _evolve_dt(model: SpinModel, red: "_Reduced") -> float:
    # coherent modes are undamped, so their phase error sets the step
    h_norm = 2.0 * float(spla.norm(model.ops["H"], np.inf))
    dt = _default_dt(red.norm, 0.1)
    if h_norm > 0:
        dt = min(dt, 0.02 / h_norm)
    return dt


def lindblad_evolve(model: SpinModel, rho0, times, dt: float | None = None,
                    t0: float = 0.0, max_S: float = DEFAULT_MAX_S,
                    check_positivity: bool = True) -> LindbladResult:
    """Integrate the master equation with fixed-step RK4.

    The vectorized Liouvillian is restricted to the subspace reachable
    from the support of ``rho0`` (block structure of the conserved
    quantities), which keeps ``S = 10`` cheap. After every step the
    state is re-symmetrized to a Hermitian matrix and the trace is
    checked; a drift above 1e-6 halves the step and restarts the
    current output interval.

    Parameters
    ----------
    model : SpinModel
    rho0 : (d, d) array_like or (d,) pure state
    times : array_like
        Strictly increasing output times, ``times[0] >= t0``.
    dt : float, optional
        Maximum step; default ``min(0.1 / ||L||_inf, 0.02 / (2 ||H||_inf))``
        with ``L`` restricted to the reachable space.
    max_S : float
        Refuse larger spins.
    check_positivity : bool
        Track the smallest eigenvalue of ``rho`` at output times.
    """
    rho = _check_rho(model, rho0, max_S)
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < t0:
        raise ValueError("times must be nonempty, strictly increasing and >= t0")
    red = _Reduced(model, rho.reshape(-1, order="F"))
    v = rho.reshape(-1, order="F")[red.idx]
    h_max = dt if dt is not None else _evolve_dt(model, red)
    sz_a = np.real(model.ops["sz_a"].diagonal()) / model.S
    sz_b = np.real(model.ops["sz_b"].diagonal()) / model.S
    out = {k: np.zeros(times.size) for k in ("sz_a", "sz_b", "trace", "purity")}
    min_eig = np.inf if check_positivity else np.nan
    t = t0
    for i, T in enumerate(times):
        span = T - t
        h_cap = h_max
        while span > 0:
            nsteps = max(1, math.ceil(span / h_cap - 1e-9))
            h = span / nsteps
            w = v
            ok = True
            for _ in range(nsteps):
                w = red.hermitize(red.rk4(w, h))
                if abs(red.trace(w) - 1.0) > TRACE_DRIFT:
                    ok = False
                    break
            if ok:
                v = w
                break
            h_cap = h / 2
            if h_cap < h_max / 2 ** 12:
                raise IntegrationError(f"trace drift persists at t={t:.6g} with dt={h_cap:.3e}")
            warnings.warn(f"lindblad_evolve: trace drift, halving dt to {h_cap:.3e}",
                          ValidityWarning, stacklevel=2)
            h_max = h_cap
        t = T
        out["sz_a"][i] = red.expect_diag(v, sz_a)
        out["sz_b"][i] = red.expect_diag(v, sz_b)
        out["trace"][i] = red.trace(v).real
        out["purity"][i] = float(np.vdot(v, v).real)
        if check_positivity:
            min_eig = min(min_eig, float(np.linalg.eigvalsh(red.dense(v)).min()))
    if check_positivity and min_eig < -1e-8:
        warnings.warn(f"lindblad_evolve: rho lost positivity (min eigenvalue {min_eig:.2e})",
                      ValidityWarning, stacklevel=2)
    return LindbladResult(times, out["sz_a"], out["sz_b"], out["trace"], out["purity"],
                          red.dense(v), float(h_max), int(red.idx.size), float(min_eig))


@dataclass(frozen=True)
class SteadyState:
    """Long-time limit of the master equation.

    ``residual`` is the trace norm of ``L(rho)`` at the end;
    ``converged`` is false when ``t_max`` was reached first.
    """

    rho: np.ndarray
    purity: float
    sz_a: float
    sz_b: float
    residual: float
    converged: bool
    t: float


def steady_state(model: SpinModel, tol: float = 1e-9, rho0=None, t_max: float = 5000.0,
                 dt: float | None = None, check_every: float = 1.0,
                 max_S: float = DEFAULT_MAX_S) -> SteadyState:
    """Integrate from ``rho0`` (default maximally mixed) until ``||drho/dt||_1 < tol``.

    The step defaults to ``1 / ||L||_inf``: a fixed point of the RK4 map
    is a zero of ``L`` regardless of step size, so only stability
    matters here.
    """
    if rho0 is None:
        rho0 = np.eye(model.d, dtype=complex) / model.d
    rho = _check_rho(model, rho0, max_S)
    red = _Reduced(model, rho.reshape(-1, order="F"))
    v = rho.reshape(-1, order="F")[red.idx]
    h = dt if dt is not None else _default_dt(red.norm, 1.0)
    per_check = max(1, int(round(check_every / h)))
    t = 0.0
    residual = np.inf
    while True:
        dv = red.L @ v
        residual = float(np.abs(np.linalg.eigvalsh(red.dense(dv))).sum())
        if residual < tol or t >= t_max:
            break
        for _ in range(per_check):
            v = red.hermitize(red.rk4(v, h))
        t += per_check * h
        if abs(red.trace(v) - 1.0) > TRACE_DRIFT:
            raise IntegrationError(f"trace drift {abs(red.trace(v) - 1):.2e} in steady_state")
    converged = residual < tol
    if not converged:
        warnings.warn(f"steady_state: not converged by t={t:.6g} (residual {residual:.2e})",
                      ValidityWarning, stacklevel=2)
    sz_a = red.expect_diag(v, np.real(model.ops["sz_a"].diagonal())) / model.S
    sz_b = red.expect_diag(v, np.real(model.ops["sz_b"].diagonal())) / model.S
    return SteadyState(red.dense(v), float(np.vdot(v, v).real), sz_a, sz_b, residual,
                       converged, t)


# ---------------------------------------------------------------------------
# quantum jumps

@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Quantum-jump trajectories and their ensemble statistics.

    Attributes
    ----------
    seed : int
        Base seed; trajectory ``i`` draws from the Philox stream keyed by
        ``(seed, i)``.
    trajectory_ids : ndarray
    times : ndarray
    series : dict
        Observable name -> array of shape ``(len(times), n_traj)``.
    jumps : ndarray
        Number of jumps per trajectory.
    dt : float
    scheme : str
    """

    seed: int
    trajectory_ids: np.ndarray
    times: np.ndarray
    series: dict
    jumps: np.ndarray
    dt: float
    scheme: str
    warnings: tuple = field(default=(), compare=False)

    @property
    def seeds(self) -> list:
        return [(self.seed, int(i)) for i in self.trajectory_ids]

    @property
    def n_traj(self) -> int:
        return int(self.trajectory_ids.size)

    def mean(self, name: str = "sz_a") -> np.ndarray:
        return self.series[name].mean(axis=1)

    def sem(self, name: str = "sz_a") -> np.ndarray:
        if self.n_traj < 2:
            return np.full(self.times.size, np.nan)
        return self.series[name].std(axis=1, ddof=1) / math.sqrt(self.n_traj)


def _rate_bound(model: SpinModel) -> float:
    total = 0.0
    for c in model.ops["jumps"]:
        cdc = (c.conj().T @ c).toarray()
        total += 2.0 * float(np.linalg.norm(cdc, 2))
    return total


def _propagator(model: SpinModel, h: float, scheme: str):
    heff = model.ops["h_eff"]
    if scheme == "exact":
        U = spla.expm((-1j * h * heff).tocsc())
        U = sp.csr_matrix(U)
        U.data[np.abs(U.data) < 1e-300] = 0
        U.eliminate_zeros()
        return U
    return (sp.identity(model.d, format="csr", dtype=complex) - 1j * h * heff).tocsr()


def _run_batch(model: SpinModel, psi0, times, ids, seed, dt_max, scheme, bound):
    n = len(ids)
    psi = np.repeat(psi0[:, None], n, axis=1).astype(complex)
    rngs = [np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, int(i)])))
            for i in ids]
    jumps_ops = model.ops["jumps"]
    sz_a = np.real(model.ops["sz_a"].diagonal()) / model.S
    sz_b = np.real(model.ops["sz_b"].diagonal()) / model.S
    rec_a = np.zeros((len(times), n))
    rec_b = np.zeros((len(times), n))
    njumps = np.zeros(n, dtype=int)
    notes = []
    buf = np.zeros((0, n, 2))
    pos = 0

    def uniforms():
        nonlocal buf, pos
        if pos >= buf.shape[0]:
            buf = np.stack([r.random((RNG_CHUNK, 2)) for r in rngs], axis=1)
            pos = 0
        u = buf[pos]
        pos += 1
        return u

    cache = {}

    def prop(h):
        key = round(h, 15)
        if key not in cache:
            cache[key] = _propagator(model, h, scheme)
        return cache[key]

    t = times[0]
    h_cap = dt_max
    for k, T in enumerate(times):
        span = T - t
        if span > 0:
            nsteps = max(1, math.ceil(span / h_cap - 1e-9))
            h = span / nsteps
            U = prop(h)
            for _ in range(nsteps):
                u = uniforms()
                phi = U @ psi
                if scheme == "exact":
                    nrm = np.einsum("ij,ij->j", phi.conj(), phi).real
                    p = 1.0 - nrm
                else:
                    p = 2 * h * sum(np.einsum("ij,ij->j", (c @ psi).conj(), c @ psi).real
                                    for c in jumps_ops)
                    nrm = np.einsum("ij,ij->j", phi.conj(), phi).real
                if p.max() > bound:
                    notes.append(f"jump probability {p.max():.3f} > {bound} at t~{t:.4g}")
                    h_cap = h / 2
                psi = phi / np.sqrt(nrm)
                hit = np.flatnonzero(u[:, 0] < p)
                if hit.size:
                    sub = psi[:, hit]
                    w = np.stack([np.einsum("ij,ij->j", (c @ sub).conj(), c @ sub).real
                                  for c in jumps_ops])
                    cum = np.cumsum(w, axis=0) / w.sum(axis=0)
                    chan = (u[hit, 1][None, :] > cum).sum(axis=0)
                    chan = np.minimum(chan, len(jumps_ops) - 1)
                    for j, ch in zip(hit, chan):
                        v = jumps_ops[ch] @ psi[:, j]
                        psi[:, j] = v / np.linalg.norm(v)
                    njumps[hit] += 1
            t = T
        prob = np.abs(psi) ** 2
        rec_a[k] = sz_a @ prob
        rec_b[k] = sz_b @ prob
    return rec_a, rec_b, njumps, notes


def mc_trajectories(model: SpinModel, psi0, times, n_traj: int, seed: int = 0,
                    dt: float | None = None, scheme: str = "exact",
                    jump_bound: float = JUMP_BOUND, n_jobs: int = 1) -> TrajectoryEnsemble:
    """Fixed-step quantum-jump unraveling.

    Each step propagates with the no-jump operator (the exact
    ``expm(-i H_eff dt)`` by default, or ``1 - i H_eff dt`` with
    ``scheme="euler"``), renormalizes, and fires a jump with probability
    equal to the norm lost; the channel is drawn with weights
    ``||c_mu psi||^2``. The default ``dt`` bounds the jump probability
    per step by ``jump_bound`` using ``sum_mu 2 ||c_mu^dag c_mu||``.

    Trajectory ``i`` uses its own Philox stream keyed by ``(seed, i)``,
    so results do not depend on ``n_traj``, ``n_jobs`` or batching.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if scheme not in ("exact", "euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi0.size != model.d:
        raise ValueError(f"psi0 must have length {model.d}")
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("psi0 must be normalized")
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size == 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be nonempty and strictly increasing")
    rate = _rate_bound(model)
    dt_max = dt if dt is not None else (jump_bound / rate if rate > 0 else 0.05)
    ids = np.arange(n_traj)
    if n_jobs > 1 and n_traj > 1:
        batches = np.array_split(ids, min(n_jobs, n_traj))
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            parts = list(ex.map(_run_batch, [model] * len(batches), [psi0] * len(batches),
                                [times] * len(batches), batches, [seed] * len(batches),
                                [dt_max] * len(batches), [scheme] * len(batches),
                                [jump_bound] * len(batches)))
    else:
        parts = [_run_batch(model, psi0, times, ids, seed, dt_max, scheme, jump_bound)]
    rec_a = np.concatenate([p[0] for p in parts], axis=1)
    rec_b = np.concatenate([p[1] for p in parts], axis=1)
    jumps = np.concatenate([p[2] for p in parts])
    notes = tuple(n for p in parts for n in p[3])
    if notes:
        warnings.warn(f"mc_trajectories: {notes[0]}; dt was halved", ValidityWarning,
                      stacklevel=2)
    return TrajectoryEnsemble(int(seed), ids, times, {"sz_a": rec_a, "sz_b": rec_b}, jumps,
                              float(dt_max), scheme, notes)
