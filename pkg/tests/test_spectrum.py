import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from openquad.model import build_structure, preset
from openquad.numerics import jordan_structure
from openquad.spectrum import (beta_spectrum, enumerate_liouvillian, ep_scan, liouvillian_gap,
                               parameter_grid)


def X_of(name, **p):
    return build_structure(preset(name, **p)[0]).X


def brute_force(slots, max_order):
    """Every multi-index over individual slots, no grouping."""
    vals = {}
    for m in itertools.product(range(max_order + 1), repeat=len(slots)):
        if sum(m) <= max_order:
            lam = -2 * complex(np.dot(m, slots))
            key = (round(lam.real, 9), round(lam.imag, 9))
            vals[key] = vals.get(key, 0) + 1
    return vals


def test_afm_low_orders():
    sp = enumerate_liouvillian(beta_spectrum(X_of("afm_2spin", gamma_g=2, gamma_l=2, g=1)),
                               max_order=1)
    assert [(e.value.real, e.multiplicity) for e in sp.entries] == \
        [(0.0, 1), (pytest.approx(-1.0), 2), (pytest.approx(-3.0), 2)]
    assert sp.validity == "rigorous" and not sp.truncated


@pytest.mark.parametrize("betas,order", [
    ([0.5, 0.5, 1.5, 1.5], 3),
    ([0.1 + 0.3j, 0.1 - 0.3j, 0.2, 0.7], 3),
    ([0.25, 0.5], 5),
])
def test_enumeration_matches_brute_force(betas, order):
    sp = enumerate_liouvillian(np.array(betas, complex), max_order=order)
    want = brute_force(np.array(betas, complex), order)
    got = {(round(v.real, 9), round(v.imag, 9)): m
           for v, m in zip(sp.values, sp.multiplicities)}
    assert got == want


def test_collisions_are_merged_and_counted():
    sp = enumerate_liouvillian(np.array([0.5, 1.0]), max_order=2)
    e = [x for x in sp.entries if abs(x.value + 2.0) < 1e-12][0]
    assert e.multiplicity == 2 and e.collisions == 1
    assert sp.collision_count >= 1


def test_formal_validity_and_truncation():
    sp = enumerate_liouvillian(np.array([0.5j, -0.5j]), max_order=2)
    assert sp.validity == "formal"
    sp = enumerate_liouvillian(np.arange(1, 7) * 0.1, max_order=6, max_entries=10)
    assert sp.truncated
    with pytest.raises(ValueError):
        enumerate_liouvillian([1.0], max_order=-1)


def test_jordan_slots_reuse_block_eigenvalue():
    X = X_of("fm_2spin_up", gamma_g=1.2, gamma_l=0.8, g=1.0)
    js = jordan_structure(X)
    sp = enumerate_liouvillian(beta_spectrum(X), js, max_order=2)
    assert np.allclose(sp.values, [0, -0.2, -0.4], atol=1e-7)
    assert list(sp.multiplicities) == [1, 4, 10]


@given(st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=4), st.integers(0, 3))
def test_enumeration_counts(betas, order):
    sp = enumerate_liouvillian(np.array(betas), max_order=order)
    # number of multi-indices with total <= order over all slots
    n = len(betas)
    assert sp.multiplicities.sum() == math.comb(order + n, n)
    assert np.any(np.abs(sp.values) < 1e-12)


@given(st.floats(0.05, 3), st.floats(0.05, 3), st.floats(0.05, 3))
def test_gap_is_twice_min_real_beta(gg, gl, g):
    b = beta_spectrum(X_of("afm_2spin", gamma_g=gg, gamma_l=gl, g=g))
    assert liouvillian_gap(b) == pytest.approx(max(0.0, 2 * b.values.real.min()), abs=1e-14)


def test_gap_clamped():
    assert liouvillian_gap(np.array([-1.0, 2.0])) == 0.0
    assert liouvillian_gap(np.array([])) == 0.0


def test_parameter_grid_order():
    g = parameter_grid({"a": [1, 2], "b": [3, 4]})
    assert g == [{"a": 1, "b": 3}, {"a": 1, "b": 4}, {"a": 2, "b": 3}, {"a": 2, "b": 4}]


def test_ep_scan_callable_and_preset():
    def fam(t):
        return np.array([[0.0, 1.0], [t, 0.0]])
    hits = ep_scan(fam, {"t": [1.0, 0.0, 0.5]})
    assert [h.params for h in hits] == [{"t": 0.0}]
    hits = ep_scan("two_boson", {"gamma": [0.5, 1.0, 1.5]}, fixed={"g": 1.0})
    assert [h.params["gamma"] for h in hits] == [1.0]
    assert all(max(b) == 2 for b in hits[0].jordan.block_sizes)
    with pytest.raises(ValueError):
        ep_scan("two_boson", [])
