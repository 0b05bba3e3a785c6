"""Momentum lattice of the unit torus.

Plane waves e^{ip.x} with p in 2*pi*Z^3 are an orthonormal basis of L^2 of the
unit box, so a single-particle mode is labelled by an integer triple n and
carries momentum p = 2*pi*n.  A ModeSet is a finite, lexicographically ordered
collection of such modes, optionally containing the zero mode, and is the
single-particle space every truncated many-body object in this package lives
on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class LatticeVector:
    """Integer momentum label n; the physical momentum is p = 2*pi*n."""

    n: tuple[int, int, int]

    def __post_init__(self):
        if len(self.n) != 3 or not all(isinstance(c, (int, np.integer)) for c in self.n):
            raise ValueError(f"lattice vector must be an integer triple, got {self.n!r}")
        object.__setattr__(self, "n", tuple(int(c) for c in self.n))

    @property
    def momentum(self) -> np.ndarray:
        return TWO_PI * np.asarray(self.n, dtype=float)

    @property
    def p_norm(self) -> float:
        return TWO_PI * float(np.linalg.norm(self.n))

    def __neg__(self) -> "LatticeVector":
        return LatticeVector((-self.n[0], -self.n[1], -self.n[2]))

    def __add__(self, other: "LatticeVector") -> "LatticeVector":
        return LatticeVector(tuple(a + b for a, b in zip(self.n, other.n)))


@dataclass(frozen=True)
class ModeSet:
    """Ordered set of lattice modes (lexicographic in the integer triple).

    The set must be closed under negation; pair terms couple p with -p.
    Integer labels are kept as an (m, 3) array, momenta as 2*pi*labels.
    """

    labels: np.ndarray  # (m, 3) int64, lexicographically sorted rows
    include_zero: bool = field(default=False)

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 2 or lab.shape[1] != 3:
            raise ValueError("labels must be an (m, 3) integer array")
        order = np.lexsort((lab[:, 2], lab[:, 1], lab[:, 0]))
        lab = lab[order]
        if len(lab) != len(np.unique(lab, axis=0)):
            raise ValueError("duplicate modes in mode set")
        object.__setattr__(self, "labels", lab)
        has_zero = bool((np.abs(lab).sum(axis=1) == 0).any())
        object.__setattr__(self, "include_zero", has_zero)
        key = {tuple(row): i for i, row in enumerate(lab.tolist())}
        object.__setattr__(self, "_key", key)
        neg = np.empty(len(lab), dtype=np.int64)
        for i, row in enumerate(lab.tolist()):
            j = key.get((-row[0], -row[1], -row[2]))
            if j is None:
                raise ValueError(f"mode set not closed under negation: {row} has no partner")
            neg[i] = j
        object.__setattr__(self, "neg_index", neg)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def momenta(self) -> np.ndarray:
        return TWO_PI * self.labels.astype(float)

    @property
    def p_squared(self) -> np.ndarray:
        return TWO_PI**2 * (self.labels.astype(float) ** 2).sum(axis=1)

    @property
    def p_norm(self) -> np.ndarray:
        return np.sqrt(self.p_squared)

    @property
    def zero_index(self) -> int | None:
        i = self._key.get((0, 0, 0))
        return i

    def index_of(self, n) -> int:
        """Index of the mode with integer label n; -1 when absent."""
        return self._key.get((int(n[0]), int(n[1]), int(n[2])), -1)

    def drop_zero(self) -> "ModeSet":
        """The same set without the zero mode (identity if already absent)."""
        if not self.include_zero:
            return self
        keep = np.abs(self.labels).sum(axis=1) != 0
        return ModeSet(self.labels[keep])

    def nonzero_indices(self) -> np.ndarray:
        return np.nonzero(np.abs(self.labels).sum(axis=1) != 0)[0]


def build_mode_set(cutoff_type: str, radius: float, include_zero: bool) -> ModeSet:
    """Enumerate lattice modes inside a symmetric cutoff.

    cutoff_type 'sup' keeps 0 < max_i |n_i| <= radius (radius counts lattice
    steps); 'euclidean' keeps 0 < |p| <= radius with p = 2*pi*n.  The zero
    mode is appended when include_zero is set.
    """
    if cutoff_type == "sup":
        m = int(np.floor(radius + 1e-12))
        if m < 0 or radius <= 0:
            raise ValueError(f"sup cutoff radius must be >= 1, got {radius}")
    elif cutoff_type == "euclidean":
        if radius <= 0:
            raise ValueError(f"euclidean cutoff radius must be positive, got {radius}")
        m = int(np.floor(radius / TWO_PI + 1e-12))
    else:
        raise ValueError(f"cutoff_type must be 'sup' or 'euclidean', got {cutoff_type!r}")

    rng = np.arange(-m, m + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
    nonzero = np.abs(grid).sum(axis=1) != 0
    grid = grid[nonzero]
    if cutoff_type == "euclidean":
        keep = TWO_PI * np.sqrt((grid.astype(float) ** 2).sum(axis=1)) <= radius * (1 + 1e-12)
        grid = grid[keep]
    if include_zero:
        grid = np.vstack([grid, np.zeros((1, 3), dtype=np.int64)])
    if len(grid) == 0:
        raise ValueError("mode set is empty; enlarge the cutoff or include the zero mode")
    return ModeSet(grid)
