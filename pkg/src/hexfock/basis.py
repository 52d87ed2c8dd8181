"""Atoms, contracted s-type Gaussian shells, synthetic clusters, Hilbert ordering.

Geometry generation is deterministic: all randomness flows through a
splitmix64 generator seeded by the caller, so identical inputs reproduce
byte-identical systems across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BOHR_PER_ANGSTROM = 1.8897259886

# STP water number density, 0.0334 molecules / Angstrom^3, in Bohr^-3.
WATER_NUMBER_DENSITY = 0.0334 / BOHR_PER_ANGSTROM ** 3

OH_DISTANCE = 1.81          # Bohr
HOH_ANGLE = math.radians(104.5)
MIN_HEAVY_SEPARATION = 4.0  # Bohr

# Built-in shell table: heavy centers get a tight contracted s shell plus a
# diffuse one, light centers a single s shell.
HEAVY_SHELLS = [
    [(130.7093, 0.15432897), (23.8089, 0.53532814), (6.4436, 0.44463454)],
    [(0.27, 1.0)],
]
LIGHT_SHELLS = [[(1.24, 1.0)]]

DEFAULT_SHELL_TABLE = {"O": HEAVY_SHELLS, "H": LIGHT_SHELLS}


class InvalidArgumentError(ValueError):
    pass


class FormatError(ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnsupportedElementError(ValueError):
    pass


@dataclass
class Atom:
    element: str
    position: np.ndarray  # (3,), Bohr

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if not np.all(np.isfinite(self.position)):
            raise InvalidArgumentError("atom position must be finite")


@dataclass
class GaussianShell:
    """Contracted s-type Gaussian shell, normalized to unit self-overlap.

    ``weights`` are the contraction coefficients folded with primitive norms
    and the overall normalization, so plain exp(-alpha r^2) primitives
    weighted by them integrate directly.
    """

    center: np.ndarray
    primitives: list  # [(exponent, coefficient), ...]
    function_offset: int = 0
    n_functions: int = 1
    exponents: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.exponents = np.asarray([e for e, _ in self.primitives], dtype=float)
        coefs = np.asarray([c for _, c in self.primitives], dtype=float)
        if np.any(self.exponents <= 0.0):
            raise InvalidArgumentError("shell exponents must be positive")
        w = coefs * (2.0 * self.exponents / np.pi) ** 0.75
        p = self.exponents[:, None] + self.exponents[None, :]
        s = np.sum(w[:, None] * w[None, :] * (np.pi / p) ** 1.5)
        self.weights = w / math.sqrt(s)


@dataclass
class BasisSystem:
    shells: list
    atoms: list

    @property
    def n_functions(self) -> int:
        return sum(sh.n_functions for sh in self.shells)

    @property
    def n_shells(self) -> int:
        return len(self.shells)


def _assign_offsets(shells):
    off = 0
    for sh in shells:
        sh.function_offset = off
        off += sh.n_functions
    return shells


class SplitMix64:
    """splitmix64 PRNG; fixed across implementations for reproducibility."""

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return self.next_u64() / 2.0 ** 64

    def unit_vector(self) -> np.ndarray:
        # rejection sampling in the unit ball avoids trig / Box-Muller
        while True:
            v = np.array([2.0 * self.uniform() - 1.0 for _ in range(3)])
            n2 = float(np.dot(v, v))
            if 1e-8 < n2 <= 1.0:
                return v / math.sqrt(n2)


def _shells_for(element: str, center, shell_table) -> list:
    if element not in shell_table:
        raise UnsupportedElementError(f"no shells defined for element {element!r}")
    return [GaussianShell(center=np.array(center, dtype=float), primitives=list(prims))
            for prims in shell_table[element]]


def _sample_in_sphere(rng: SplitMix64, radius: float) -> np.ndarray:
    while True:
        v = np.array([(2.0 * rng.uniform() - 1.0) * radius for _ in range(3)])
        if np.dot(v, v) <= radius * radius:
            return v


def generate_cluster(n_molecules: int, seed: int, model: str = "water_like") -> BasisSystem:
    """Deterministic synthetic cluster at roughly STP water number density.

    water_like: heavy centers packed with a minimum separation of 4 Bohr,
    each with two light satellites at 1.81 Bohr and a 104.5 degree angle.
    uniform_blob: heavy centers placed uniformly in the same sphere.
    """
    if n_molecules < 1:
        raise InvalidArgumentError("n_molecules must be >= 1")
    if model not in ("water_like", "uniform_blob"):
        raise InvalidArgumentError(f"unknown cluster model {model!r}")
    rng = SplitMix64(seed)
    volume = n_molecules / WATER_NUMBER_DENSITY
    radius = (3.0 * volume / (4.0 * math.pi)) ** (1.0 / 3.0)

    centers = [np.zeros(3)]
    while len(centers) < n_molecules:
        for _ in range(100000):
            cand = _sample_in_sphere(rng, radius)
            if model == "uniform_blob":
                break
            if all(np.linalg.norm(cand - c) >= MIN_HEAVY_SEPARATION for c in centers):
                break
        else:
            raise InvalidArgumentError(
                "packing failed; density/min-distance constraints unsatisfiable")
        centers.append(cand)

    atoms, shells = [], []
    for ctr in centers:
        if model == "uniform_blob":
            atoms.append(Atom("O", ctr))
            shells.extend(_shells_for("O", ctr, DEFAULT_SHELL_TABLE))
            continue
        e1 = rng.unit_vector()
        raw = rng.unit_vector()
        e2 = raw - np.dot(raw, e1) * e1
        while np.linalg.norm(e2) < 1e-8:
            raw = rng.unit_vector()
            e2 = raw - np.dot(raw, e1) * e1
        e2 /= np.linalg.norm(e2)
        h1 = ctr + OH_DISTANCE * e1
        h2 = ctr + OH_DISTANCE * (math.cos(HOH_ANGLE) * e1 + math.sin(HOH_ANGLE) * e2)
        atoms.append(Atom("O", ctr))
        atoms.append(Atom("H", h1))
        atoms.append(Atom("H", h2))
        shells.extend(_shells_for("O", ctr, DEFAULT_SHELL_TABLE))
        shells.extend(_shells_for("H", h1, DEFAULT_SHELL_TABLE))
        shells.extend(_shells_for("H", h2, DEFAULT_SHELL_TABLE))
    return BasisSystem(shells=_assign_offsets(shells), atoms=atoms)


def parse_shell_table(text: str) -> dict:
    """Parse a plain-text shell table.

    One line per element: whitespace-separated exponent:coefficient pairs,
    shells separated by ';'. Blank lines and '#' comments ignored.
    """
    table = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        element, tokens = parts[0], parts[1:]
        shells, current = [], []
        for tok in tokens:
            if tok == ";":
                if current:
                    shells.append(current)
                current = []
                continue
            for piece in tok.split(";"):
                if not piece:
                    if current:
                        shells.append(current)
                    current = []
                    continue
                try:
                    e_str, c_str = piece.split(":")
                    current.append((float(e_str), float(c_str)))
                except ValueError:
                    raise FormatError(f"bad exponent:coefficient token {piece!r}", ln)
        if current:
            shells.append(current)
        if not shells:
            raise FormatError(f"element {element!r} has no shells", ln)
        table[element] = shells
    return table


def load_xyz(path, shell_table=None) -> BasisSystem:
    """Load a standard XYZ file (Angstrom) and attach shells per element."""
    if shell_table is None:
        shell_table = DEFAULT_SHELL_TABLE
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("empty file", 1)
    try:
        natoms = int(lines[0].split()[0])
    except (ValueError, IndexError):
        raise FormatError(f"bad atom-count line {lines[0]!r}", 1)
    if len(lines) < natoms + 2:
        raise FormatError(f"expected {natoms} atom lines, file has {len(lines) - 2}",
                          len(lines))
    atoms, shells = [], []
    for k in range(natoms):
        ln = k + 3
        parts = lines[k + 2].split()
        if len(parts) < 4:
            raise FormatError(f"expected 'El x y z', got {lines[k + 2]!r}", ln)
        element = parts[0]
        try:
            pos = np.array([float(v) for v in parts[1:4]]) * BOHR_PER_ANGSTROM
        except ValueError:
            raise FormatError(f"bad coordinate in {lines[k + 2]!r}", ln)
        atoms.append(Atom(element, pos))
        shells.extend(_shells_for(element, pos, shell_table))
    return BasisSystem(shells=_assign_offsets(shells), atoms=atoms)


def hilbert_index_3d(coords, bits: int) -> int:
    """Hilbert index of one integer lattice point via the transposed-bits
    (Skilling) algorithm."""
    x = [int(c) for c in coords]
    n = 3
    m = 1 << (bits - 1)
    q = m
    while q > 1:
        p = q - 1
        for i in range(n):
            if x[i] & q:
                x[0] ^= p
            else:
                t = (x[0] ^ x[i]) & p
                x[0] ^= t
                x[i] ^= t
        q >>= 1
    for i in range(1, n):
        x[i] ^= x[i - 1]
    t = 0
    q = m
    while q > 1:
        if x[n - 1] & q:
            t ^= q - 1
        q >>= 1
    for i in range(n):
        x[i] ^= t
    h = 0
    for b in range(bits - 1, -1, -1):
        for i in range(n):
            h = (h << 1) | ((x[i] >> b) & 1)
    return h


def hilbert_order(system: BasisSystem, bits_per_axis: int = 10):
    """Stably sort shells by the Hilbert index of their centers.

    Returns (reordered system, permutation) where permutation[k] is the old
    shell position now at k; use it to reorder externally supplied matrices.
    """
    if not 1 <= bits_per_axis <= 20:
        raise InvalidArgumentError("bits_per_axis must be in [1, 20]")
    centers = np.array([sh.center for sh in system.shells])
    lo = centers.min(axis=0)
    extent = centers.max(axis=0) - lo
    side = (1 << bits_per_axis) - 1
    lattice = np.zeros_like(centers, dtype=np.int64)
    for ax in range(3):
        if extent[ax] > 0.0:
            lattice[:, ax] = np.rint((centers[:, ax] - lo[ax]) / extent[ax] * side)
    keys = np.array([hilbert_index_3d(pt, bits_per_axis) for pt in lattice])
    perm = np.argsort(keys, kind="stable")
    # copy shells so the input system's offsets stay valid
    shells = [GaussianShell(center=system.shells[k].center.copy(),
                            primitives=list(system.shells[k].primitives))
              for k in perm]
    return BasisSystem(shells=_assign_offsets(shells), atoms=system.atoms), perm
