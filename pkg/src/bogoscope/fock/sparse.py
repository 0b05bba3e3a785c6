"""Sparse operators and state vectors tied to a FockBasis.

Operators are canonical COO triples against a fixed basis: row-major
sorted, duplicates summed, explicit zeros dropped.  The hermitian flag is
an invariant checked at construction (max |A - A^T| <= 1e-12).  The text
export writes ``dim nnz`` then one ``row col value`` line per entry with 17
significant digits, which round-trips float64 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from bogoscope.fock.basis import FockBasis

__all__ = [
    "HERMITIAN_TOL",
    "SparseOperator",
    "StateVector",
    "basis_state",
    "condensate_state",
    "read_coo",
    "vacuum_state",
    "write_coo",
]

HERMITIAN_TOL = 1e-12


@dataclass(eq=False)
class SparseOperator:
    """Real operator in canonical COO form on a fixed basis."""

    basis: FockBasis
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    hermitian: bool = False
    label: str = ""

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if not (len(rows) == len(cols) == len(vals)):
            raise ValueError("rows, cols and values must have equal lengths")
        d = self.basis.dim
        if len(rows) and (
            rows.min() < 0 or rows.max() >= d or cols.min() < 0 or cols.max() >= d
        ):
            raise ValueError(f"operator {self.label!r} has an entry outside the basis")
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(d, d)).tocsr()
        mat.sum_duplicates()
        mat.eliminate_zeros()
        if self.hermitian:
            dev = abs(mat - mat.T)
            gap = float(dev.max()) if dev.nnz else 0.0
            if gap > HERMITIAN_TOL:
                raise ValueError(
                    f"operator {self.label!r} is flagged hermitian but deviates "
                    f"from its transpose by {gap:.3e}"
                )
        coo = mat.tocoo()
        self.rows = coo.row.astype(np.int64)
        self.cols = coo.col.astype(np.int64)
        self.values = coo.data.astype(np.float64)
        self._csr = mat

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_csr(self) -> sp.csr_matrix:
        """The cached CSR form; shared object, do not mutate."""
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def apply(self, vec: "StateVector") -> "StateVector":
        if not vec.basis.same_space(self.basis):
            raise ValueError("vector lives on a different basis")
        return StateVector(self.basis, self._csr @ vec.coefficients)

    def expectation(self, vec: "StateVector") -> float:
        if not vec.basis.same_space(self.basis):
            raise ValueError("vector lives on a different basis")
        c = vec.coefficients
        return float(c @ (self._csr @ c))

    def scaled(self, factor: float) -> "SparseOperator":
        return SparseOperator(
            self.basis,
            self.rows,
            self.cols,
            self.values * float(factor),
            hermitian=self.hermitian,
            label=self.label,
        )

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        if not isinstance(other, SparseOperator):
            return NotImplemented
        if not other.basis.same_space(self.basis):
            raise ValueError("cannot add operators on different bases")
        return SparseOperator(
            self.basis,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.values, other.values]),
            hermitian=self.hermitian and other.hermitian,
            label=f"{self.label}+{other.label}",
        )


@dataclass(frozen=True, eq=False)
class StateVector:
    """Coefficient vector on a FockBasis with a cached norm."""

    basis: FockBasis
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.float64)
        if c.shape != (self.basis.dim,):
            raise ValueError(
                f"coefficients must have shape ({self.basis.dim},), got {c.shape}"
            )
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "_norm", float(np.linalg.norm(c)))

    @property
    def norm(self) -> float:
        return self._norm

    @property
    def is_null(self) -> bool:
        return self._norm == 0.0

    def dot(self, other: "StateVector") -> float:
        if not other.basis.same_space(self.basis):
            raise ValueError("vectors live on different bases")
        return float(self.coefficients @ other.coefficients)

    def normalized(self) -> "StateVector":
        if self.is_null:
            raise ValueError("cannot normalize the null vector")
        return StateVector(self.basis, self.coefficients / self._norm)


def basis_state(basis: FockBasis, index: int) -> StateVector:
    """Unit coefficient on one enumerated occupation state."""
    index = int(index)
    if not 0 <= index < basis.dim:
        raise ValueError(f"index {index} outside basis of dimension {basis.dim}")
    c = np.zeros(basis.dim)
    c[index] = 1.0
    return StateVector(basis, c)


def vacuum_state(basis: FockBasis) -> StateVector:
    """Unit coefficient on the zero-occupation state."""
    idx = basis.lookup(np.zeros(len(basis.modes), dtype=np.int64))
    if idx < 0:
        raise ValueError("basis contains no zero-occupation state")
    return basis_state(basis, idx)


def condensate_state(basis: FockBasis) -> StateVector:
    """Unit coefficient on the all-particles-in-the-zero-mode state."""
    if basis.rule != "total":
        raise ValueError("condensate state needs a fixed-total basis")
    zi = basis.modes.zero_index
    if zi is None:
        raise ValueError("mode set has no zero mode")
    occ = np.zeros(len(basis.modes), dtype=np.int64)
    occ[zi] = basis.cap
    idx = basis.lookup(occ)
    if idx < 0:
        raise ValueError("condensate state is excluded from this basis")
    return basis_state(basis, idx)


def write_coo(op: SparseOperator, path) -> None:
    """Text export: 'dim nnz' header then 'row col value' per entry."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{op.dim} {op.nnz}\n")
        for r, c, v in zip(op.rows, op.cols, op.values):
            fh.write(f"{r} {c} {v:.16e}\n")


def read_coo(path, basis: FockBasis, hermitian: bool = False, label: str = "") -> SparseOperator:
    """Read an operator written by write_coo back onto its basis."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"malformed COO header in {path}")
        dim, nnz = int(header[0]), int(header[1])
        if dim != basis.dim:
            raise ValueError(
                f"stored dimension {dim} does not match the basis dimension {basis.dim}"
            )
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        for k in range(nnz):
            parts = fh.readline().split()
            if len(parts) != 3:
                raise ValueError(f"malformed COO entry at line {k + 2} in {path}")
            rows[k] = int(parts[0])
            cols[k] = int(parts[1])
            vals[k] = float(parts[2])
    return SparseOperator(basis, rows, cols, vals, hermitian=hermitian, label=label)
