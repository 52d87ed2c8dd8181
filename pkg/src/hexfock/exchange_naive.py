"""Naive hextree recursion for the exchange matrix, without permutational
symmetry.

Each task is a (bra pair node, density node, ket pair node) triple; it is
culled when the blocked Almlof-Ahlrichs bound falls below tau_2e or when any
participating node is absent or overlap-pruned, and otherwise expands into
the 16 child triples of the blocked contraction. Leaf tasks contract dense
ERI blocks into K.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .integrals import InvalidArgumentError, eri_cross, eri_elementwise
from .quadtree import MatrixQuadtree, ShellPairNode, leaf_cache


class LogicError(RuntimeError):
    """Internal traversal invariant violated; indicates a driver bug."""


@dataclass
class TraversalCounters:
    tasks_visited: int = 0
    tasks_culled_screening: int = 0
    tasks_culled_absent: int = 0
    leaf_contractions: int = 0
    eri_shell_quartets: int = 0
    quartets_culled_leaf: int = 0
    tasks_expanded: int = 0
    children_spawned: int = 0
    culled_bound_ledger: float = 0.0

    def to_dict(self) -> dict:
        return {
            "tasks_visited": self.tasks_visited,
            "tasks_culled_screening": self.tasks_culled_screening,
            "tasks_culled_absent": self.tasks_culled_absent,
            "leaf_contractions": self.leaf_contractions,
            "eri_shell_quartets": self.eri_shell_quartets,
            "quartets_culled_leaf": self.quartets_culled_leaf,
            "tasks_expanded": self.tasks_expanded,
            "children_spawned": self.children_spawned,
            "culled_bound_ledger": self.culled_bound_ledger,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def merge(self, other: "TraversalCounters") -> None:
        self.tasks_visited += other.tasks_visited
        self.tasks_culled_screening += other.tasks_culled_screening
        self.tasks_culled_absent += other.tasks_culled_absent
        self.leaf_contractions += other.leaf_contractions
        self.eri_shell_quartets += other.eri_shell_quartets
        self.quartets_culled_leaf += other.quartets_culled_leaf
        self.tasks_expanded += other.tasks_expanded
        self.children_spawned += other.children_spawned
        self.culled_bound_ledger += other.culled_bound_ledger


def _sorted_product(a: float, b: float, c: float) -> float:
    # multiply in value order so transposed blocks yield bit-identical bounds
    lo, mid, hi = sorted((a, b, c))
    return lo * mid * hi


def screening_test(bra_norm: float, p_norm: float, ket_norm: float,
                   tau_2e: float, mode: str = "schwarz") -> bool:
    """True when the blocked Almlof-Ahlrichs bound says: cull this task.

    literal multiplies the diagonal-block Frobenius norms as-is; schwarz
    takes their square roots first (the provably sound form).
    """
    if bra_norm < 0.0 or p_norm < 0.0 or ket_norm < 0.0:
        raise InvalidArgumentError("screening norms must be non-negative")
    if mode == "schwarz":
        bra_norm = math.sqrt(bra_norm)
        ket_norm = math.sqrt(ket_norm)
    elif mode != "literal":
        raise InvalidArgumentError(f"unknown screening mode {mode!r}")
    return _sorted_product(bra_norm, p_norm, ket_norm) <= tau_2e


def culled_task_bound(bra: ShellPairNode, p_norm: float, ket: ShellPairNode,
                      transpose_bra: bool = False,
                      transpose_ket: bool = False) -> float:
    """Rigorous max-abs bound on the K contribution of one culled task.

    |sum_qr P_qr (pq|rs)| <= ||P||_F * sqrt(sum_q (pq|pq)) * sqrt(sum_r (rs|rs))
    via Cauchy-Schwarz over (q, r); the row/column sums are bounded by the
    cached per-node maxima.
    """
    bra_sum = bra.colsum_max if transpose_bra else bra.rowsum_max
    ket_sum = ket.rowsum_max if transpose_ket else ket.colsum_max
    return 0.5 * p_norm * math.sqrt(max(bra_sum, 0.0)) * math.sqrt(max(ket_sum, 0.0))


def _check_same_partition(bra, ket, p):
    roots = {id(bra.row), id(bra.col), id(ket.row), id(ket.col), id(p.row), id(p.col)}
    if len(roots) != 1:
        raise InvalidArgumentError("bra, ket and P must be built over the same partition")


class _NaiveTraversal:
    """One traversal's mutable state: its K accumulator and counters."""

    def __init__(self, n: int, tau_2e: float, mode: str,
                 evaluate: bool, want_log: bool):
        self.K = np.zeros((n, n))
        self.c = TraversalCounters()
        self.tau_2e = tau_2e
        self.mode = mode
        self.evaluate = evaluate
        self.qlog = [] if want_log else None
        self.spawn = None  # set to a list to defer depth-1 tasks to workers

    def visit(self, b, p, k, depth=1):
        c = self.c
        c.tasks_visited += 1
        if b is None or p is None or k is None or b.pruned or k.pruned:
            c.tasks_culled_absent += 1
            return
        if screening_test(b.diag_norm, p.norm, k.diag_norm, self.tau_2e, self.mode):
            c.tasks_culled_screening += 1
            c.culled_bound_ledger += culled_task_bound(b, p.norm, k)
            return
        if b.is_leaf and k.is_leaf:
            c.leaf_contractions += 1
            self._contract(b, p, k)
            return
        c.tasks_expanded += 1
        n_a = len(b.row.children())
        n_c = len(b.col.children())
        n_d = len(k.row.children())
        n_b = len(k.col.children())
        # fixed child order (bra, then P, then ket) for deterministic fp sums
        for a in range(n_a):
            for cc in range(n_c):
                bch = b.child(a, cc)
                for d in range(n_d):
                    pch = p.child(cc, d)
                    for bb in range(n_b):
                        c.children_spawned += 1
                        if self.spawn is not None and depth == 0:
                            self.spawn.append((bch, pch, k.child(d, bb)))
                        else:
                            self.visit(bch, pch, k.child(d, bb), depth + 1)

    def _contract(self, b, p, k):
        """Leaf task: per-quartet screening, then block ERI contraction.

        The per-quartet test is the conventional direct-SCF form of the
        blocked bound; it keeps tau_2e's meaning at quartet granularity and
        makes the quartet counter independent of leaf blocking.
        """
        c = self.c
        A = leaf_cache(b)
        B = leaf_cache(k)
        ma, mb = A["pd"].n_pairs, B["pd"].n_pairs
        if self.mode == "schwarz":
            fb, fk = np.sqrt(A["q"]), np.sqrt(B["q"])
        else:
            fb, fk = A["q"], B["q"]
        pg = p.leaf[np.ix_(A["j_rel"], B["i_rel"])]
        bound = (fb[:, None] * np.abs(pg)) * fk[None, :]
        keep = bound > self.tau_2e
        nkeep = int(keep.sum())
        c.eri_shell_quartets += nkeep
        if nkeep < ma * mb:
            c.quartets_culled_leaf += ma * mb - nkeep
            if self.mode == "schwarz":
                sb = bound
            else:
                sb = (np.sqrt(A["q"])[:, None] * np.abs(pg)) * np.sqrt(B["q"])[None, :]
            c.culled_bound_ledger += 0.5 * float(sb[~keep].sum())
        if not self.evaluate or nkeep == 0:
            return
        if nkeep == ma * mb:
            e = eri_cross(A["pd"], B["pd"])
        else:
            ia, ib = np.nonzero(keep)
            e = np.zeros((ma, mb))
            e[ia, ib] = eri_elementwise(A["pd"], B["pd"], ia, ib)
        self.K[b.row.fn_lo:b.row.fn_hi, k.col.fn_lo:k.col.fn_hi] += \
            A["ri"].T @ (-0.5 * e * pg) @ B["rj"]
        if self.qlog is not None:
            ia, ib = np.nonzero(keep)
            self.qlog.extend(zip(
                A["pd"].i_shell[ia].tolist(), A["pd"].j_shell[ia].tolist(),
                B["pd"].i_shell[ib].tolist(), B["pd"].j_shell[ib].tolist()))


def build_exchange_naive(bra: ShellPairNode, ket: ShellPairNode,
                         P: MatrixQuadtree, tau_2e: float = 0.0,
                         mode: str = "schwarz", quartet_log: list | None = None,
                         evaluate: bool = True, threads: int = 1):
    """Exchange matrix K = -1/2 sum P_nl (mn|ls) by naive hextree traversal.

    Returns (K, TraversalCounters). With tau_2e = tau_ovlp = 0 the result
    matches the dense oracle up to floating-point reassociation.
    quartet_log, when given, collects every evaluated shell quartet
    (mu, nu, lam, sig); only sensible for small systems. evaluate=False
    walks the task tree and fills counters without computing integrals
    (K stays zero). threads > 1 farms depth-1 subtrees to a pool and
    reduces private accumulators in task order (deterministic, but a
    different fp association than sequential mode).
    """
    if tau_2e < 0.0:
        raise InvalidArgumentError("tau_2e must be non-negative")
    _check_same_partition(bra, ket, P)
    n = bra.row.n_functions
    run = _NaiveTraversal(n, tau_2e, mode, evaluate, quartet_log is not None)
    if threads > 1:
        run.spawn = []
        run.visit(bra, P, ket, depth=0)

        def work(args):
            sub = _NaiveTraversal(n, tau_2e, mode, evaluate, quartet_log is not None)
            sub.visit(*args)
            return sub

        with ThreadPoolExecutor(max_workers=threads) as pool:
            subs = list(pool.map(work, run.spawn))
        for sub in subs:
            run.K += sub.K
            run.c.merge(sub.c)
            if run.qlog is not None:
                run.qlog.extend(sub.qlog)
    else:
        run.visit(bra, P, ket)
    if quartet_log is not None:
        quartet_log.extend(run.qlog)
    return run.K, run.c
