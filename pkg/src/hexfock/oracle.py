"""Brute-force exchange references and matrix comparison utilities.

These references exercise the same integral code as the tree drivers, so a
disagreement points at traversal or symmetry logic rather than integral
arithmetic (which has its own quadrature-based tests). Performance is a
non-goal; intended for systems up to a few hundred functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BasisSystem
from .exchange_naive import screening_test
from .integrals import (InvalidArgumentError, build_pair_data, diagonal_values,
                        eri_cross, eri_elementwise)

_BRA_CHUNK = 512


@dataclass
class ComparisonReport:
    max_abs_diff: float
    frobenius_diff: float
    relative_frobenius: float
    worst_row: int
    worst_col: int

    def to_dict(self) -> dict:
        return {
            "max_abs_diff": self.max_abs_diff,
            "frobenius_diff": self.frobenius_diff,
            "relative_frobenius": self.relative_frobenius,
            "worst_row": self.worst_row,
            "worst_col": self.worst_col,
        }


def _all_pairs(system: BasisSystem):
    n = system.n_shells
    return [(i, j) for i in range(n) for j in range(n)]


def dense_exchange(system: BasisSystem, P: np.ndarray) -> np.ndarray:
    """K_ms = -1/2 sum_nl P_nl (mn|ls) over every shell quartet, unscreened."""
    n = system.n_functions
    P = np.asarray(P, dtype=float)
    if P.shape != (n, n):
        raise InvalidArgumentError("density dimension does not match system")
    pairs = _all_pairs(system)
    ket = build_pair_data(system.shells, pairs)
    K = np.zeros((n, n))
    ns = system.n_shells
    fn_of = np.asarray([sh.function_offset for sh in system.shells])
    for lo in range(0, len(pairs), _BRA_CHUNK):
        chunk = pairs[lo:lo + _BRA_CHUNK]
        bra = build_pair_data(system.shells, chunk)
        e = eri_cross(bra, ket)  # (chunk, ns*ns)
        v = e.reshape(len(chunk), ns, ns)  # (a, lam, sig)
        pg = P[np.ix_(bra.j_fn, fn_of)]  # (a, lam); s shells: 1 fn per shell
        contrib = -0.5 * np.einsum("als,al->as", v, pg)
        np.add.at(K, bra.i_fn, contrib)
    return K


def dense_exchange_screened(system: BasisSystem, P: np.ndarray, tau_2e: float,
                            mode: str = "schwarz", quartet_log: list | None = None):
    """Per-shell-quartet screened reference (the direct-SCF baseline).

    A quartet (mn|ls) is evaluated iff its Almlof-Ahlrichs bound
    f(Q_mn) * |P_nl| * f(Q_ls) exceeds tau_2e. Returns (K, skipped_bound_sum);
    quartet_log, when given, collects the evaluated (mu, nu, lam, sig) tuples.
    """
    n = system.n_functions
    ns = system.n_shells
    P = np.asarray(P, dtype=float)
    if P.shape != (n, n):
        raise InvalidArgumentError("density dimension does not match system")
    pairs = _all_pairs(system)
    pd = build_pair_data(system.shells, pairs)
    # Q evaluated in canonical (i <= j) orientation, matching the tree caches
    # bit for bit so screening decisions agree exactly across implementations
    canon = build_pair_data(system.shells,
                            [(min(i, j), max(i, j)) for i, j in pairs])
    q = diagonal_values(canon).reshape(ns, ns)  # Q_ij = (ij|ij)
    fq = np.sqrt(q) if mode == "schwarz" else q
    fn_of = np.asarray([sh.function_offset for sh in system.shells])
    p_abs = np.abs(P[np.ix_(fn_of, fn_of)])
    # bound[i,j,k,l] = (fq[i,j] * |P|[j,k]) * fq[k,l], associated exactly as
    # in the drivers' leaf tests
    bound = (fq[:, :, None, None] * p_abs[None, :, :, None]) \
        * fq[None, None, :, :]
    keep = bound > tau_2e
    skipped_bound_sum = 0.5 * float(bound[~keep].sum())
    idx = np.argwhere(keep)
    K = np.zeros((n, n))
    for lo in range(0, len(idx), 200000):
        part = idx[lo:lo + 200000]
        i, j, k, l = part.T
        vals = eri_elementwise(pd, pd, i * ns + j, k * ns + l)
        contrib = -0.5 * P[fn_of[j], fn_of[k]] * vals
        np.add.at(K, (fn_of[i], fn_of[l]), contrib)
    if quartet_log is not None:
        quartet_log.extend(map(tuple, idx.tolist()))
    return K, skipped_bound_sum


def compare(A: np.ndarray, B: np.ndarray) -> ComparisonReport:
    """Elementwise difference metrics between two same-shaped matrices."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise InvalidArgumentError(f"shape mismatch {A.shape} vs {B.shape}")
    diff = np.abs(A - B)
    worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
    frob = float(np.linalg.norm(A - B))
    ref = float(np.linalg.norm(B))
    rel = frob / ref if ref > 0.0 else (0.0 if frob == 0.0 else math.inf)
    return ComparisonReport(
        max_abs_diff=float(diff[worst]),
        frobenius_diff=frob,
        relative_frobenius=rel,
        worst_row=int(worst[0]),
        worst_col=int(worst[1]),
    )
