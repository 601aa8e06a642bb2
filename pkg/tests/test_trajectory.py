import warnings

import numpy as np
import pytest

from openquad.errors import ModelError
from openquad.trajectory import (SpinModel, lindblad_evolve, mc_trajectories, spin_operators,
                                 steady_state)
from oracles import lindblad_dense_expm, spin_matrices, steady_sparse_direct


def test_spin_operators_match_ladder_formula():
    for S in (0.5, 1, 1.5, 3):
        Sp, Sz = spin_operators(S)
        Rp, _, Rz = spin_matrices(S)
        assert np.allclose(Sp, Rp) and np.allclose(Sz, Rz)
        # [S+, S-] = 2 Sz
        assert np.allclose(Sp @ Sp.T - Sp.T @ Sp, 2 * Sz)


def test_model_validation_and_indexing():
    with pytest.raises(ModelError):
        SpinModel(0.3, 1, 1, 1)
    with pytest.raises(ModelError):
        SpinModel(1, 1, -1, 1)
    m = SpinModel(1, 1.0, 0.5, 0.5)
    assert m.d == 9 and m.index(1, 1) == 0 and m.index(-1, -1) == 8
    with pytest.raises(ValueError):
        m.index(2, 0)


@pytest.mark.parametrize("S,gg,gl,g", [(1, 0.5, 0.5, 1.0), (1, 1.5, 1.5, 1.0),
                                       (1.5, 0.7, 0.3, 0.8), (1, 0.0, 0.0, 1.0)])
def test_lindblad_matches_dense_exponential(S, gg, gl, g):
    m = SpinModel(S, g, gg, gl)
    psi0 = m.product_state(-S, S)
    rho0 = np.outer(psi0, psi0.conj())
    times = np.linspace(0, 6, 13)
    res = lindblad_evolve(m, rho0, times)
    ra, rb, rhos = lindblad_dense_expm(S, g, gg, gl, rho0, times)
    assert np.abs(res.sz_a - ra / S).max() < 1e-8
    assert np.abs(res.sz_b - rb / S).max() < 1e-8
    assert np.abs(res.rho_final - rhos[-1]).max() < 1e-8
    assert np.abs(res.trace - 1).max() < 1e-8
    assert res.min_eigenvalue > -1e-8


def test_lindblad_mixed_initial_state():
    m = SpinModel(1, 1.0, 0.8, 0.4)
    rng = np.random.default_rng(0)
    A = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    rho0 = A @ A.conj().T
    rho0 /= np.trace(rho0)
    times = [0.5, 2.0]
    res = lindblad_evolve(m, rho0, times)
    ra, _, _ = lindblad_dense_expm(1, 1.0, 0.8, 0.4, rho0, times)
    assert np.abs(res.sz_a - ra).max() < 1e-8
    assert res.subspace_dim == 81


def test_lindblad_reduces_to_reachable_space():
    m = SpinModel(2, 1.0, 0.5, 0.5)
    res = lindblad_evolve(m, m.product_state(-2, 2), [1.0])
    assert res.subspace_dim < m.d ** 2


def test_lindblad_input_checks():
    m = SpinModel(1, 1.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        lindblad_evolve(m, np.ones(9), [1.0])
    with pytest.raises(ValueError):
        lindblad_evolve(m, np.diag([2.0] + [0] * 8), [1.0])
    with pytest.raises(ValueError):
        lindblad_evolve(m, m.product_state(0, 0), [1.0, 0.5])
    with pytest.raises(ModelError):
        lindblad_evolve(SpinModel(16, 1, 1, 1), np.zeros(33 ** 2), [1.0])


@pytest.mark.parametrize("G", [0.5, 1.5])
def test_steady_state_matches_direct_solve(G):
    m = SpinModel(2, 1.0, G, G)
    ss = steady_state(m)
    ra, rb = steady_sparse_direct(2, 1.0, G, G)
    assert ss.converged and ss.residual < 1e-9
    assert ss.sz_a == pytest.approx(ra, abs=1e-7)
    assert ss.sz_b == pytest.approx(rb, abs=1e-7)


def test_unitary_trajectories_match_lindblad():
    m = SpinModel(2, 1.0, 0.0, 0.0)
    psi0 = m.product_state(-2, 2)
    times = np.linspace(0, 5, 11)
    ens = mc_trajectories(m, psi0, times, 3, seed=1)
    lr = lindblad_evolve(m, psi0, times)
    assert np.all(ens.jumps == 0)
    for j in range(3):
        assert np.abs(ens.series["sz_a"][:, j] - lr.sz_a).max() < 1e-9


def test_trajectories_reproducible_and_independent_of_batching():
    m = SpinModel(1, 1.0, 0.7, 0.7)
    psi0 = m.product_state(-1, 1)
    times = np.linspace(0, 4, 9)
    a = mc_trajectories(m, psi0, times, 6, seed=7)
    b = mc_trajectories(m, psi0, times, 6, seed=7)
    c = mc_trajectories(m, psi0, times, 3, seed=7)
    d = mc_trajectories(m, psi0, times, 6, seed=7, n_jobs=2)
    assert np.array_equal(a.series["sz_a"], b.series["sz_a"])
    assert np.array_equal(a.jumps, b.jumps)
    assert np.array_equal(a.series["sz_a"][:, :3], c.series["sz_a"])
    assert np.array_equal(a.series["sz_a"], d.series["sz_a"])
    e = mc_trajectories(m, psi0, times, 6, seed=8)
    assert not np.array_equal(a.series["sz_a"], e.series["sz_a"])
    assert a.seeds[2] == (7, 2)


@pytest.mark.parametrize("scheme", ["exact", "euler"])
def test_small_ensemble_consistent_with_lindblad(scheme):
    m = SpinModel(1, 1.0, 0.8, 0.8)
    psi0 = m.product_state(-1, 1)
    times = np.linspace(0, 6, 7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ens = mc_trajectories(m, psi0, times, 400, seed=3, scheme=scheme)
    lr = lindblad_evolve(m, psi0, times)
    sem = ens.sem("sz_a")
    assert np.all(np.abs(ens.mean("sz_a") - lr.sz_a)[1:] <= 4 * sem[1:])


def test_jump_probability_bound():
    m = SpinModel(1, 1.0, 1.0, 1.0)
    ens = mc_trajectories(m, m.product_state(-1, 1), [0.0, 1.0], 2)
    assert ens.dt * 2 * 2 * 1.0 <= 0.05 + 1e-12  # sum_mu 2||c^dag c|| = 4 here
    assert np.isnan(mc_trajectories(m, m.product_state(-1, 1), [0.0, 1.0], 1).sem()).all()


def test_mc_input_checks():
    m = SpinModel(1, 1.0, 1.0, 1.0)
    psi0 = m.product_state(-1, 1)
    with pytest.raises(ValueError):
        mc_trajectories(m, psi0, [0, 1], 0)
    with pytest.raises(ValueError):
        mc_trajectories(m, psi0, [0, 1], 1, scheme="rk")
    with pytest.raises(ValueError):
        mc_trajectories(m, 2 * psi0, [0, 1], 1)
