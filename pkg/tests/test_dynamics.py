import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from openquad.dynamics import (MomentSeries, MomentState, evolve, evolve_first, evolve_second,
                               hp_initial_state, observable_series, second_moment_rhs,
                               stationary_second)
from openquad.errors import DiscrepancyWarning, NoUniqueStationaryError
from openquad.model import BathVector, HPFrame, QuadraticModel, build_structure, preset
from oracles import expm_series, fock_moments, sylvester_bartels_stewart


def S_of(name, **p):
    return build_structure(preset(name, **p)[0])


def random_lossy(seed, n=2):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    B = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    ls = [np.sqrt(2) * np.eye(n)[i] + 0.1 * (rng.normal(size=n) + 1j * rng.normal(size=n))
          for i in range(n)]
    ks = [0.15 * (rng.normal(size=n) + 1j * rng.normal(size=n)) for _ in range(n)]
    H, K = (A + A.conj().T) / 2, 0.05 * (B + B.T)
    return H, K, ls, ks, QuadraticModel(H, K, tuple(BathVector(l, k) for l, k in zip(ls, ks)))


def test_moments_match_truncated_fock_space():
    H, K, ls, ks, m = random_lossy(1)
    s = build_structure(m)
    ts = np.linspace(0, 2, 5)
    P, Z = fock_moments(H, K, ls, ks, np.array([0.4 + 0.2j, -0.3j]), ts, cutoff=14)
    ser = evolve(s.X, s.Y, MomentState(P[0], Z[0]), ts)
    assert np.abs(ser.psi - P).max() < 1e-5
    assert np.abs(ser.Z - Z).max() < 1e-4


def test_first_moments_match_series_expm():
    s = S_of("fm_2spin_up", gamma_g=0.5, gamma_l=0.45, g=1.0)
    psi0 = np.array([1, 2j, 1, -2j])
    ts = np.linspace(0, 5, 11)
    ser = evolve_first(s.X, psi0, ts)
    for t, p in zip(ts, ser.psi):
        assert np.allclose(p, expm_series(-2 * s.X.T * t) @ psi0, atol=1e-11)
    assert ser.discrepancy < 1e-8


@pytest.mark.parametrize("method", ["eigen", "vanloan", "quad"])
def test_second_moment_routes_agree(method):
    s = S_of("afm_2spin", gamma_g=2.0, gamma_l=1.0, g=0.8)
    Z0 = MomentState.from_occupations([3.0, 1.0]).Z
    ts = np.array([0.0, 0.5, 2.0, 6.0])
    ref = evolve_second(s.X, s.Y, Z0, ts, method="vanloan", crosscheck=False).Z
    got = evolve_second(s.X, s.Y, Z0, ts, method=method)
    assert np.abs(got.Z - ref).max() < 1e-9
    assert got.discrepancy < 1e-7


def test_second_moment_rhs_consistency():
    s = S_of("two_boson", gamma=0.5, g=1.0)
    Z0 = MomentState.from_occupations([2.0, 1.0]).Z
    f = second_moment_rhs(s.X, s.Y)
    h = 1e-5
    ser = evolve_second(s.X, s.Y, Z0, [h], crosscheck=False)
    fd = (ser.Z[0] - Z0) / h
    assert np.abs(fd - f(Z0)).max() < 1e-3


def test_eigen_fallback_at_exceptional_point():
    s = S_of("fm_2spin_up", gamma_g=1.2, gamma_l=0.8, g=1.0)
    Z0 = MomentState.from_occupations([1.0, 1.0]).Z
    ser = evolve_second(s.X, s.Y, Z0, [1.0, 2.0])
    assert ser.fallback and ser.method == "vanloan"
    with pytest.warns(DiscrepancyWarning):
        evolve_second(s.X, s.Y, Z0, [1.0], method="eigen")


def test_pt_phase_uses_fallback_and_stays_accurate():
    s = S_of("two_boson", gamma=0.5, g=1.0)
    Z0 = MomentState.from_occupations([100.0, 100.0]).Z
    ser = evolve_second(s.X, s.Y, Z0, np.linspace(0, 10, 11))
    assert ser.fallback
    assert ser.discrepancy < 1e-7


@given(st.floats(0.3, 3), st.floats(0.3, 3), st.floats(0.05, 0.25))
def test_stationary_matches_bartels_stewart(gg, gl, g):
    s = S_of("afm_2spin", gamma_g=gg, gamma_l=gl, g=g)
    Z = stationary_second(s.X, s.Y)
    assert np.abs(Z - sylvester_bartels_stewart(s.X.T, s.X, s.Y)).max() < 1e-10
    assert np.linalg.norm(s.X.T @ Z + Z @ s.X - s.Y) < 1e-10
    st_ = MomentState(np.zeros(4), Z)
    assert st_.check_structure()
    assert np.all(st_.occupations().real > -1e-12)


def test_stationary_non_unique_in_pt_phase():
    s = S_of("two_boson", gamma=0.5, g=1.0)
    with pytest.raises(NoUniqueStationaryError) as exc:
        stationary_second(s.X, s.Y)
    assert exc.value.min_separation < 1e-10


def test_relaxation_to_stationary():
    s = S_of("afm_2spin", gamma_g=2.0, gamma_l=2.0, g=1.0)
    Zss = stationary_second(s.X, s.Y)
    Z0 = MomentState.from_occupations([5.0, 5.0]).Z
    ser = evolve_second(s.X, s.Y, Z0, [40.0])
    assert np.abs(ser.Z[0] - Zss).max() < 1e-12


@given(st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0, 10))
def test_structure_preserved(gg, gl, g, n0):
    s = S_of("fm_2spin_up", gamma_g=gg, gamma_l=gl, g=g)
    st0 = MomentState.from_occupations([n0, n0], alpha=[1.0, 0.5j])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DiscrepancyWarning)
        ser = evolve(s.X, s.Y, st0, np.linspace(0, 3, 4))
    for state in ser.states():
        assert state.structure_residual() < 1e-9


def test_hp_observables_afm():
    m, frame = preset("afm_2spin", gamma_g=2.0, gamma_l=2.0, g=1.0)
    s = build_structure(m)
    st0 = hp_initial_state(frame, 0.9 * frame.S)
    # a scalar <S^z> gives every site the same boson occupation
    assert np.allclose(st0.occupations(), [100.0, 100.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        obs = observable_series(evolve(s.X, s.Y, st0, np.linspace(0, 10, 6)), frame)
    assert obs["sz_0"][0] == pytest.approx(0.9)
    assert set(obs) == {"t", "a_0", "a_1", "n_0", "n_1", "sz_0", "sz_1"}


def test_input_validation():
    s = S_of("two_boson", gamma=0.5, g=1.0)
    with pytest.raises(ValueError):
        evolve_first(s.X, np.zeros(4), [1.0, 0.5])
    with pytest.raises(ValueError):
        evolve_first(s.X, np.zeros(3), [1.0])
    with pytest.raises(ValueError):
        evolve_second(s.X, s.Y, np.zeros((4, 4)), [1.0], method="magic")
    with pytest.raises(ValueError):
        evolve_first(s.X, np.zeros(4), [0.5], t0=1.0)
    with pytest.raises(ValueError):
        MomentState(np.zeros(3), np.zeros((4, 4)))


def test_norm_cap_truncates():
    s = S_of("two_boson", gamma=3.0, g=1.0)
    with pytest.warns(DiscrepancyWarning):
        ser = evolve_first(s.X, np.ones(4), np.linspace(0, 40, 5), norm_cap=1e6)
    assert ser.truncated and np.isnan(ser.psi[-1]).all()
    assert len(ser.states()) < 5
