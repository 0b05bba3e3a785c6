"""Occupation-number bases for truncated Fock spaces.

A basis collects every occupation vector over a fixed ModeSet subject to a
truncation rule: ``total`` keeps states with exactly ``cap`` particles (the
fixed-number space, where the zero mode is listed explicitly), ``max`` keeps
states with at most ``cap`` particles (the excitation space over nonzero
modes).  States are rows of an int64 matrix in ascending lexicographic
order, so enumeration order is reproducible bit for bit, membership is a
hash lookup here and a binary search inside the assembly kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bogoscope.modes import ModeSet

__all__ = ["OccupationState", "FockBasis", "build_basis"]

_RULES = ("total", "max")


@dataclass(frozen=True, eq=False)
class OccupationState:
    """A single occupation vector with cached totals.

    The particle number, the total momentum label and the kinetic energy
    sum_p p^2 n_p are computed once at construction; ``consistent()``
    recomputes them from the occupations as a self-check.
    """

    modes: ModeSet
    occupations: np.ndarray

    def __post_init__(self):
        occ = np.array(self.occupations, dtype=np.int64)
        if occ.shape != (len(self.modes),):
            raise ValueError(
                f"occupations must hold one entry per mode: expected shape "
                f"({len(self.modes)},), got {occ.shape}"
            )
        if (occ < 0).any():
            raise ValueError("occupations must be nonnegative")
        occ.flags.writeable = False
        object.__setattr__(self, "occupations", occ)
        mom = occ @ self.modes.labels
        object.__setattr__(self, "_total", int(occ.sum()))
        object.__setattr__(self, "_momentum", (int(mom[0]), int(mom[1]), int(mom[2])))
        object.__setattr__(self, "_kinetic", float(self.modes.p_squared @ occ))

    @property
    def total(self) -> int:
        """Cached particle number."""
        return self._total

    @property
    def momentum_label(self) -> tuple[int, int, int]:
        """Total momentum in lattice units; the physical value is 2*pi times this."""
        return self._momentum

    @property
    def kinetic(self) -> float:
        """Cached sum_p p^2 n_p with p = 2*pi*label."""
        return self._kinetic

    def consistent(self) -> bool:
        """True when every cached total matches a fresh recomputation."""
        occ = self.occupations
        mom = occ @ self.modes.labels
        return (
            self._total == int(occ.sum())
            and self._momentum == (int(mom[0]), int(mom[1]), int(mom[2]))
            and self._kinetic == float(self.modes.p_squared @ occ)
        )


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Ordered occupation basis over a mode set.

    ``states`` has one occupation vector per row, rows ascending
    lexicographically.  ``rule`` is 'total' (sum == cap) or 'max'
    (sum <= cap); ``sector``, when set, restricts to states whose total
    momentum label equals the given integer triple.  Construction caches
    per-state totals, momentum labels and kinetic diagonals.
    """

    modes: ModeSet
    rule: str
    cap: int
    states: np.ndarray
    sector: tuple[int, int, int] | None = None

    def __post_init__(self):
        if self.rule not in _RULES:
            raise ValueError(f"rule must be one of {_RULES}, got {self.rule!r}")
        st = np.ascontiguousarray(np.asarray(self.states, dtype=np.int64))
        if st.ndim != 2 or st.shape[1] != len(self.modes):
            raise ValueError(
                f"states must be a (dim, {len(self.modes)}) integer array, got {st.shape}"
            )
        st.flags.writeable = False
        object.__setattr__(self, "states", st)
        object.__setattr__(self, "totals", st.sum(axis=1))
        object.__setattr__(self, "momentum_labels", st @ self.modes.labels)
        object.__setattr__(self, "kinetic_diagonal", st @ self.modes.p_squared)
        object.__setattr__(self, "_index", {st[i].tobytes(): i for i in range(len(st))})

    @property
    def dim(self) -> int:
        return len(self.states)

    def state_at(self, i: int) -> OccupationState:
        return OccupationState(self.modes, self.states[int(i)])

    def same_space(self, other: "FockBasis") -> bool:
        """True when both bases enumerate the same states in the same order.

        Enumeration is deterministic in (modes, rule, cap, sector), so two
        bases agree exactly when those construction parameters do.
        """
        if self is other:
            return True
        return (
            self.rule == other.rule
            and self.cap == other.cap
            and self.sector == other.sector
            and self.dim == other.dim
            and np.array_equal(self.modes.labels, other.modes.labels)
        )

    def lookup(self, state) -> int:
        """Index of an OccupationState or occupation array; -1 when absent."""
        if isinstance(state, OccupationState):
            occ = state.occupations
        else:
            occ = np.asarray(state, dtype=np.int64)
        if occ.shape != (len(self.modes),):
            raise ValueError(
                f"occupation vector must have length {len(self.modes)}, got {occ.shape}"
            )
        return self._index.get(np.ascontiguousarray(occ).tobytes(), -1)


def _fill_states(out: np.ndarray, cap: int, exact: bool) -> None:
    # depth-first with the first mode outermost yields ascending lex order
    m = out.shape[1]
    row = np.zeros(m, dtype=np.int64)
    idx = 0

    def rec(pos: int, remaining: int) -> None:
        nonlocal idx
        if pos == m - 1:
            if exact:
                row[pos] = remaining
                out[idx] = row
                idx += 1
            else:
                for v in range(remaining + 1):
                    row[pos] = v
                    out[idx] = row
                    idx += 1
            row[pos] = 0
            return
        for v in range(remaining + 1):
            row[pos] = v
            rec(pos + 1, remaining - v)
        row[pos] = 0

    rec(0, cap)
    if idx != len(out):
        raise AssertionError(f"enumeration produced {idx} states, expected {len(out)}")


def build_basis(
    modes: ModeSet,
    rule: str,
    cap: int,
    sector=None,
    max_states: int = 200_000,
) -> FockBasis:
    """Enumerate the occupation basis in deterministic lexicographic order.

    ``cap`` is the particle number under rule 'total' and the occupation
    bound under rule 'max'.  ``sector`` filters the unrestricted enumeration
    to one total-momentum label.  The unrestricted dimension is evaluated in
    closed form first and must not exceed ``max_states``.
    """
    if rule not in _RULES:
        raise ValueError(f"rule must be one of {_RULES}, got {rule!r}")
    cap = int(cap)
    if cap < 0:
        raise ValueError(f"occupation cap must be nonnegative, got {cap}")
    m = len(modes)
    if rule == "total":
        count = math.comb(cap + m - 1, m - 1)
    else:
        count = math.comb(cap + m, m)
    if count > max_states:
        raise ValueError(
            f"basis of {count} states exceeds the limit of {max_states}; "
            "shrink the mode set or the occupation cap"
        )
    out = np.zeros((count, m), dtype=np.int64)
    _fill_states(out, cap, rule == "total")
    basis_sector = None
    if sector is not None:
        basis_sector = (int(sector[0]), int(sector[1]), int(sector[2]))
        mom = out @ modes.labels
        keep = (mom == np.asarray(basis_sector, dtype=np.int64)).all(axis=1)
        out = out[keep]
    return FockBasis(modes=modes, rule=rule, cap=cap, states=out, sector=basis_sector)
