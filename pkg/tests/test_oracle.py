import math

import numpy as np
import pytest

from hexfock import (compare, dense_exchange, dense_exchange_screened,
                     generate_cluster)
from hexfock.basis import Atom, BasisSystem, GaussianShell
from hexfock.integrals import InvalidArgumentError, eri_quartet


def _single_shell_system():
    sh = GaussianShell(center=[0.0, 0.0, 0.0], primitives=[(1.0, 1.0)])
    return BasisSystem(shells=[sh], atoms=[Atom("H", sh.center)])


def test_dense_zero_density():
    system = generate_cluster(1, seed=1)
    K = dense_exchange(system, np.zeros((4, 4)))
    assert not np.any(K)


def test_dense_single_shell_one_term():
    system = _single_shell_system()
    sh = system.shells[0]
    q = eri_quartet(sh, sh, sh, sh).values[0, 0, 0, 0]
    P = np.array([[0.8]])
    K = dense_exchange(system, P)
    assert K[0, 0] == pytest.approx(-0.5 * 0.8 * q, rel=1e-13)


def test_dense_output_symmetric():
    system = generate_cluster(1, seed=5)
    rng = np.random.default_rng(0)
    P = rng.normal(size=(4, 4))
    P = 0.5 * (P + P.T)
    K = dense_exchange(system, P)
    assert np.abs(K - K.T).max() <= 1e-13


def test_dense_dimension_mismatch():
    system = generate_cluster(1, seed=1)
    with pytest.raises(InvalidArgumentError):
        dense_exchange(system, np.eye(3))
    with pytest.raises(InvalidArgumentError):
        dense_exchange_screened(system, np.eye(3), 0.0)


def test_screened_zero_threshold_equals_dense():
    system = generate_cluster(2, seed=3)
    rng = np.random.default_rng(2)
    n = system.n_functions
    P = rng.normal(size=(n, n))
    P = 0.5 * (P + P.T)
    K_ref = dense_exchange(system, P)
    K, skipped = dense_exchange_screened(system, P, 0.0)
    assert np.abs(K - K_ref).max() <= 1e-13
    assert skipped == 0.0


def test_screened_infinite_threshold_zero_matrix():
    system = generate_cluster(1, seed=1)
    P = np.eye(4)
    K, skipped = dense_exchange_screened(system, P, math.inf)
    assert not np.any(K)
    assert skipped > 0.0


def test_screened_error_bounded_by_skipped_sum():
    system = generate_cluster(3, seed=3)
    n = system.n_functions
    rng = np.random.default_rng(11)
    P = rng.normal(size=(n, n))
    P = 0.5 * (P + P.T)
    K_ref = dense_exchange(system, P)
    for tau in (1e-8, 1e-5, 1e-3):
        K, skipped = dense_exchange_screened(system, P, tau)
        assert np.abs(K - K_ref).max() <= skipped + 1e-15


def test_screened_quartet_log():
    system = generate_cluster(1, seed=1)
    P = np.full((4, 4), 0.5)
    log = []
    dense_exchange_screened(system, P, 0.0, quartet_log=log)
    ns = system.n_shells
    assert len(log) == ns ** 4
    assert all(len(t) == 4 for t in log)


def test_compare_cases():
    r = compare(np.zeros((4, 4)), np.eye(4))
    assert r.max_abs_diff == 1.0
    assert r.frobenius_diff == pytest.approx(2.0)
    assert r.relative_frobenius == pytest.approx(1.0)
    same = compare(np.eye(3), np.eye(3))
    assert same.max_abs_diff == 0.0
    assert same.frobenius_diff == 0.0
    assert same.relative_frobenius == 0.0
    with pytest.raises(InvalidArgumentError):
        compare(np.eye(3), np.eye(4))


def test_compare_worst_element_location():
    a = np.zeros((3, 3))
    b = np.zeros((3, 3))
    b[2, 1] = -4.0
    r = compare(a, b)
    assert (r.worst_row, r.worst_col) == (2, 1)
    assert r.max_abs_diff == 4.0
    d = r.to_dict()
    assert set(d) == {"max_abs_diff", "frobenius_diff", "relative_frobenius",
                      "worst_row", "worst_col"}
