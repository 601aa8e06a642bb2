"""First and second moment dynamics of quadratic bosonic systems.

With ``psi = (<a_1>..<a_n>, <a_1^dag>..<a_n^dag>)`` and the symmetric
second-moment matrix ``Z`` the equations of motion are linear:

    dpsi/dt = -2 X^T psi
    dZ/dt   = -2 (X^T Z + Z X) + 2 Y

Both are evaluated in closed form and, for the second moments, also by
fixed-step RK4 so that a silent failure of one route shows up as a
reported discrepancy.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad_vec, solve_ivp

from .errors import DiscrepancyWarning, NoUniqueSolutionError, NoUniqueStationaryError
from .model import HPFrame, hp_observable, hp_occupation
from .numerics import as_matrix, expm, solve_sylvester

__all__ = [
    "MomentState",
    "MomentSeries",
    "evolve_first",
    "evolve_second",
    "evolve",
    "stationary_second",
    "observable_series",
    "hp_initial_state",
    "second_moment_rhs",
]

NORM_CAP = 1e12
FIRST_TOL = 1e-8
SECOND_TOL = 1e-7
RK4_FACTOR = 1e-3
EIGEN_COND_MAX = 1e6


@dataclass(frozen=True)
class MomentState:
    """First and second moments at time ``t``.

    ``Z`` has blocks ``[[<a_i a_j>, <a_j^dag a_i>], [<a_i^dag a_j>, <a_i^dag a_j^dag>]]``.
    """

    psi: np.ndarray
    Z: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex).reshape(-1)
        Z = as_matrix(self.Z, "Z")
        if Z.shape[0] != psi.size or psi.size % 2:
            raise ValueError(f"psi has length {psi.size} but Z has shape {Z.shape}")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.psi.size // 2

    def occupations(self) -> np.ndarray:
        """``<a_i^dag a_i>`` for each mode."""
        n = self.n
        return np.array([self.Z[n + i, i] for i in range(n)])

    def structure_residual(self) -> float:
        """Largest violation of the physical-state block relations."""
        n = self.n
        Z = self.Z
        aa, ada, adad = Z[:n, :n], Z[n:, :n], Z[n:, n:]
        scale = 1.0 + np.abs(Z).max(initial=0.0) + np.abs(self.psi).max(initial=0.0)
        res = max(
            np.abs(ada - ada.conj().T).max(initial=0.0),
            np.abs(aa - aa.T).max(initial=0.0),
            np.abs(adad - aa.conj()).max(initial=0.0),
            np.abs(Z - Z.T).max(initial=0.0),
            np.abs(self.psi[n:] - self.psi[:n].conj()).max(initial=0.0),
        )
        return float(res / scale)

    def check_structure(self, tol: float = 1e-8) -> bool:
        return self.structure_residual() <= tol

    @classmethod
    def from_occupations(cls, occupations, alpha=None, t: float = 0.0) -> "MomentState":
        """State with ``<a_i^dag a_j> = delta_ij n_i`` and no anomalous terms.

        ``alpha`` sets the first moments ``<a_i>``.
        """
        occ = np.asarray(occupations, dtype=float).reshape(-1)
        n = occ.size
        a = np.zeros(n, complex) if alpha is None else np.asarray(alpha, complex).reshape(n)
        Z = np.zeros((2 * n, 2 * n), complex)
        Z[n:, :n] = np.diag(occ)
        Z[:n, n:] = np.diag(occ)
        return cls(np.concatenate([a, a.conj()]), Z, t)


def hp_initial_state(frame: HPFrame, sz, t: float = 0.0) -> MomentState:
    """Initial moments from absolute ``<S^z>`` values.

    ``sz`` is a scalar (used for every site, so all sites start with the
    same boson occupation) or one value per site. The state has no
    coherent part and no anomalous or cross correlations.
    """
    if np.ndim(sz) == 0:
        n0 = hp_occupation(float(sz), frame, 0)
        occ = [n0] * frame.n
    else:
        occ = [hp_occupation(float(s), frame, i) for i, s in enumerate(sz)]
    return MomentState.from_occupations(occ, t=t)


@dataclass(frozen=True)
class MomentSeries:
    """Moments on a time grid.

    Attributes
    ----------
    times : ndarray
    psi : ndarray or None
        Shape ``(T, 2n)``.
    Z : ndarray or None
        Shape ``(T, 2n, 2n)``.
    method : str
        Closed-form route used for ``Z`` (``"expm"`` for ``psi`` only).
    fallback : bool
        Eigen-resolution was requested or preferred but unsafe.
    discrepancy : float or None
        Largest relative deviation between the closed form and the
        independent integrator; ``None`` if not cross-checked.
    truncated : bool
        Evaluation stopped early after the norm cap; later rows are NaN.
    """

    times: np.ndarray
    psi: np.ndarray | None = None
    Z: np.ndarray | None = None
    method: str = "expm"
    fallback: bool = False
    discrepancy: float | None = None
    truncated: bool = False

    def states(self) -> list:
        T = len(self.times)
        dim = self.psi.shape[1] if self.psi is not None else self.Z.shape[1]
        out = []
        for i in range(T):
            psi = self.psi[i] if self.psi is not None else np.zeros(dim, complex)
            Z = self.Z[i] if self.Z is not None else np.zeros((dim, dim), complex)
            if np.all(np.isfinite(psi)) and np.all(np.isfinite(Z)):
                out.append(MomentState(psi, Z, self.times[i]))
        return out


def _times(times, t0):
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size == 0:
        raise ValueError("times must not be empty")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if times[0] < t0:
        raise ValueError("times must not precede the initial time")
    return times


def evolve_first(X, psi0, times, t0: float = 0.0, crosscheck: bool = True,
                 norm_cap: float = NORM_CAP) -> MomentSeries:
    """``psi(t) = expm(-2 X^T (t - t0)) psi0`` on a time grid.

    With ``crosscheck`` the result is compared against an adaptive
    Runge-Kutta (DOP853) solution; a relative deviation above 1e-8 is
    reported through :class:`DiscrepancyWarning` and the
    ``discrepancy`` field.
    """
    X = as_matrix(X, "X")
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi0.size != X.shape[0]:
        raise ValueError(f"psi0 has length {psi0.size}, X is {X.shape}")
    times = _times(times, t0)
    A = -2.0 * X.T
    out = np.full((times.size, psi0.size), np.nan + 0j)
    truncated = False
    for i, t in enumerate(times):
        v = expm(A * (t - t0)) @ psi0
        if np.linalg.norm(v) > norm_cap:
            truncated = True
            break
        out[i] = v
    discrepancy = None
    if crosscheck:
        valid = np.all(np.isfinite(out), axis=1)
        if valid.any():
            tv = times[valid]
            scale = np.linalg.norm(psi0)
            if scale == 0.0:
                ref = np.zeros((tv.size, psi0.size), complex)
            elif tv[-1] > t0:
                sol = solve_ivp(lambda t, y: A @ y, (t0, tv[-1]), psi0, method="DOP853",
                                t_eval=tv, rtol=1e-12, atol=1e-14 * scale)
                ref = sol.y.T
            else:
                ref = psi0[None, :]
            err = np.linalg.norm(out[valid] - ref, axis=1) / (1.0 + np.linalg.norm(ref, axis=1))
            discrepancy = float(err.max())
            if discrepancy > FIRST_TOL:
                warnings.warn(f"evolve_first: closed form and RK differ by {discrepancy:.2e}",
                              DiscrepancyWarning, stacklevel=2)
    if truncated:
        warnings.warn("evolve_first: norm cap exceeded, evaluation stopped early",
                      DiscrepancyWarning, stacklevel=2)
    return MomentSeries(times, psi=out, method="expm", discrepancy=discrepancy, truncated=truncated)


def second_moment_rhs(X, Y):
    """Right-hand side ``f(Z) = -2 (X^T Z + Z X) + 2 Y``."""
    XT = X.T

    def f(Z):
        return -2.0 * (XT @ Z + Z @ X) + 2.0 * Y
    return f


def _source_vanloan(X, Y, h):
    """``(E, I)`` with ``E = e^{-2hX^T}``, ``I = int_0^h e^{-2sX^T} 2Y e^{-2sX} ds``.

    Computed from one block exponential over a short step and doubled
    up, so that no growing factor ``e^{+2tX}`` ever appears.
    """
    m = X.shape[0]
    norm = np.linalg.norm(X, 2)
    k = max(0, math.ceil(math.log2(max(norm * abs(h) / 0.25, 1.0))))
    step = h / 2 ** k
    big = np.zeros((2 * m, 2 * m), complex)
    big[:m, :m] = -2.0 * X.T
    big[:m, m:] = 2.0 * Y
    big[m:, m:] = 2.0 * X
    B = expm(big * step)
    E = B[:m, :m]
    I = B[:m, m:] @ expm(-2.0 * X * step)
    for _ in range(k):
        I = E @ I @ E.T + I
        E = E @ E
    return E, I


def _closed_eigen(X, Y, Z0, dts):
    w, V = sla.eig(X)
    Vi = np.linalg.inv(V)
    W = V.T @ (2.0 * Y) @ V
    sig = w[:, None] + w[None, :]
    out = []
    for dt in dts:
        F = -np.expm1(-2.0 * dt * sig) / (2.0 * sig)
        Et = expm(-2.0 * X.T * dt)
        out.append(Et @ Z0 @ Et.T + Vi.T @ (W * F) @ Vi)
    return out


def _closed_vanloan(X, Y, Z0, dts):
    out = []
    for dt in dts:
        E, I = _source_vanloan(X, Y, dt) if dt > 0 else (np.eye(X.shape[0]), np.zeros_like(X))
        out.append(E @ Z0 @ E.T + I)
    return out


def _closed_quad(X, Y, Z0, dts, epsabs=1e-10):
    out = []
    XT = X.T
    for dt in dts:
        if dt == 0:
            out.append(Z0.copy())
            continue

        def integrand(s):
            Es = expm(-2.0 * XT * s)
            return (Es @ (2.0 * Y) @ Es.T).reshape(-1)
        re, _ = quad_vec(lambda s: integrand(s).real, 0.0, dt, epsabs=epsabs, epsrel=1e-12)
        im, _ = quad_vec(lambda s: integrand(s).imag, 0.0, dt, epsabs=epsabs, epsrel=1e-12)
        Et = expm(-2.0 * XT * dt)
        out.append(Et @ Z0 @ Et.T + (re + 1j * im).reshape(X.shape))
    return out


def _eigen_safe(X, tol=1e-8):
    w, V = sla.eig(X)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(V)
    # near a defective point the eigenvalues split by ~sqrt(eps) ||X||, so
    # resonances are judged against ||X||, not against the tiny eigenvalues
    scale = max(np.linalg.norm(X, 2), 1e-300)
    sep = np.abs(w[:, None] + w[None, :]).min()
    return bool(np.isfinite(cond) and cond < EIGEN_COND_MAX and sep > tol * scale)


def _rk4(f, Z0, t0, times, h_target, norm_cap):
    Z = Z0.copy()
    t = t0
    out = np.full((len(times),) + Z0.shape, np.nan + 0j)
    for i, T in enumerate(times):
        span = T - t
        if span > 0:
            nsteps = max(1, math.ceil(span / h_target))
            h = span / nsteps
            for _ in range(nsteps):
                k1 = f(Z)
                k2 = f(Z + 0.5 * h * k1)
                k3 = f(Z + 0.5 * h * k2)
                k4 = f(Z + h * k3)
                Z = Z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = T
        if np.linalg.norm(Z) > norm_cap:
            break
        out[i] = Z
    return out


def evolve_second(X, Y, Z0, times, t0: float = 0.0, method: str = "auto",
                  crosscheck: bool = True, rk4_h: float | None = None,
                  norm_cap: float = NORM_CAP) -> MomentSeries:
    """Second moments ``Z(t)`` from the Lyapunov differential equation.

    Closed form ``Z(t) = E Z0 E^T + int_0^t e^{-2sX^T} 2Y e^{-2sX} ds``
    with ``E = e^{-2tX^T}``. The integral is evaluated by

    ``"eigen"``
        analytic resolution in the eigenbasis of ``X``; only valid when
        ``X`` is well diagonalizable and no ``beta_i + beta_j`` vanishes,
    ``"vanloan"``
        a block matrix exponential over a short step, doubled up,
    ``"quad"``
        adaptive quadrature.

    ``"auto"`` uses ``"eigen"`` when safe and ``"vanloan"`` otherwise,
    setting ``fallback``. With ``crosscheck`` the result is compared with
    fixed-step RK4 (step ``1e-3 / ||X||`` unless ``rk4_h`` is given);
    deviations above ``1e-7 (1 + ||Z||)`` raise a
    :class:`DiscrepancyWarning`.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    Z0 = as_matrix(Z0, "Z0")
    if not (X.shape == Y.shape == Z0.shape):
        raise ValueError("X, Y and Z0 must have the same shape")
    times = _times(times, t0)
    dts = times - t0
    fallback = False
    if method == "auto":
        method = "eigen" if _eigen_safe(X) else "vanloan"
        fallback = method != "eigen"
    elif method == "eigen" and not _eigen_safe(X):
        warnings.warn("evolve_second: eigen-resolution is resonant or ill-conditioned, "
                      "falling back to the block exponential", DiscrepancyWarning, stacklevel=2)
        method, fallback = "vanloan", True
    routes = {"eigen": _closed_eigen, "vanloan": _closed_vanloan, "quad": _closed_quad}
    if method not in routes:
        raise ValueError(f"unknown method {method!r}")
    out = np.full((times.size,) + X.shape, np.nan + 0j)
    truncated = False
    for i, Z in enumerate(routes[method](X, Y, Z0, dts)):
        if not np.all(np.isfinite(Z)) or np.linalg.norm(Z) > norm_cap:
            truncated = True
            break
        out[i] = Z
    discrepancy = None
    if crosscheck:
        norm = np.linalg.norm(X, 2)
        h = rk4_h if rk4_h is not None else (RK4_FACTOR / norm if norm > 0 else 1.0)
        valid = np.all(np.isfinite(out), axis=(1, 2))
        if valid.any():
            ref = _rk4(second_moment_rhs(X, Y), Z0, t0, times[valid], h, norm_cap)
            ok = np.all(np.isfinite(ref), axis=(1, 2))
            diff = np.linalg.norm((out[valid] - ref)[ok], axis=(1, 2))
            rel = diff / (1.0 + np.linalg.norm(out[valid][ok], axis=(1, 2)))
            discrepancy = float(rel.max(initial=0.0))
            if discrepancy > SECOND_TOL:
                warnings.warn(f"evolve_second: closed form ({method}) and RK4 differ by "
                              f"{discrepancy:.2e}", DiscrepancyWarning, stacklevel=2)
    if truncated:
        warnings.warn("evolve_second: norm cap exceeded, evaluation stopped early",
                      DiscrepancyWarning, stacklevel=2)
    return MomentSeries(times, Z=out, method=method, fallback=fallback,
                        discrepancy=discrepancy, truncated=truncated)


def evolve(X, Y, state0: MomentState, times, crosscheck: bool = True,
           method: str = "auto") -> MomentSeries:
    """Evolve both moments of ``state0`` (times measured from ``state0.t``)."""
    first = evolve_first(X, state0.psi, times, t0=state0.t, crosscheck=crosscheck)
    second = evolve_second(X, Y, state0.Z, times, t0=state0.t, method=method,
                           crosscheck=crosscheck)
    disc = [d for d in (first.discrepancy, second.discrepancy) if d is not None]
    return MomentSeries(second.times, psi=first.psi, Z=second.Z, method=second.method,
                        fallback=second.fallback, discrepancy=max(disc) if disc else None,
                        truncated=first.truncated or second.truncated)


def stationary_second(X, Y, sing_tol: float = 1e-12) -> np.ndarray:
    """Stationary second moments: solve ``X^T Z + Z X = Y``.

    Raises
    ------
    NoUniqueStationaryError
        When some ``beta_i + beta_j`` vanishes, as happens throughout the
        PT-unbroken phase.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    try:
        return solve_sylvester(X.T, X, Y, sing_tol=sing_tol)
    except NoUniqueSolutionError as exc:
        raise NoUniqueStationaryError("no unique stationary covariance",
                                      exc.min_separation) from None


def observable_series(states, frame: HPFrame | None = None) -> dict:
    """Named observables along a list of states (or a :class:`MomentSeries`).

    Returns a dict with ``"t"`` and, per mode ``i``, ``"a_i"`` (``<a_i>``)
    and ``"n_i"`` (``<a_i^dag a_i>``); with a frame also ``"sz_i"``
    (``<S_i^z>/S``). Values are complex arrays except ``t`` and ``sz_i``.
    """
    if isinstance(states, MomentSeries):
        states = states.states()
    states = list(states)
    if not states:
        return {"t": np.zeros(0)}
    n = states[0].n
    out = {"t": np.array([s.t for s in states])}
    for i in range(n):
        out[f"a_{i}"] = np.array([s.psi[i] for s in states])
        out[f"n_{i}"] = np.array([s.Z[n + i, i] for s in states])
    if frame is not None:
        if frame.n != n:
            raise ValueError(f"frame has {frame.n} sites, states have {n} modes")
        for i in range(n):
            occ = out[f"n_{i}"]
            out[f"sz_{i}"] = np.asarray(hp_observable(occ, frame, i), dtype=float).reshape(-1)
    return out
