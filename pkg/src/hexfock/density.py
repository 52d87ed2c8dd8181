"""Symmetric density matrices with controllable decay.

Stands in for converged SCF densities: either an exponential distance-decay
model over shell centers, or a plain-text file (first line N, then N*N
row-major values), symmetrized on load.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSystem
from .integrals import InvalidArgumentError

DEFAULT_GAMMA = 2.0  # 1/Bohr; insulator-like decay, screening bites at desk scale


@dataclass
class DensityModel:
    kind: str = "exp_decay"     # exp_decay | file
    gamma: float = DEFAULT_GAMMA
    diagonal: float = 1.0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("exp_decay", "file"):
            raise InvalidArgumentError(f"unknown density kind {self.kind!r}")
        if self.kind == "exp_decay" and self.gamma <= 0.0:
            raise InvalidArgumentError("gamma must be positive")
        if self.kind == "file" and not self.path:
            raise InvalidArgumentError("file density requires a path")


def build_density(system: BasisSystem, model: DensityModel) -> np.ndarray:
    """Symmetric N x N density; P_ij = diagonal * exp(-gamma * |r_i - r_j|)."""
    n = system.n_functions
    if model.kind == "file":
        p = load_density_file(model.path)
        if p.shape != (n, n):
            raise InvalidArgumentError(
                f"density file is {p.shape[0]}x{p.shape[1]}, system has {n} functions")
        return p
    centers = np.empty((n, 3))
    for sh in system.shells:
        centers[sh.function_offset:sh.function_offset + sh.n_functions] = sh.center
    d = centers[:, None, :] - centers[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    dist = np.maximum(dist, dist.T)  # exact symmetry regardless of fp noise
    return model.diagonal * np.exp(-model.gamma * dist)


def load_density_file(path) -> np.ndarray:
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise InvalidArgumentError("empty density file")
    n = int(tokens[0])
    vals = np.asarray([float(t) for t in tokens[1:]])
    if vals.size != n * n:
        raise InvalidArgumentError(
            f"density file declares N={n} but holds {vals.size} values")
    p = vals.reshape(n, n)
    return 0.5 * (p + p.T)


def save_density_file(path, p: np.ndarray) -> None:
    n = p.shape[0]
    with open(path, "w") as fh:
        fh.write(f"{n}\n")
        for row in p:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
