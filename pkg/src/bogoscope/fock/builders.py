"""Second-quantized operator assembly on truncated bases.

Every builder compresses the written operator to the given basis: momentum
sums run over the basis mode set, and matrix elements whose target state
leaves the truncation are dropped, so the truncation cap acts as a
variational convergence parameter.  Occupation radicals such as
sqrt((N - Nplus)/N) multiply the state they act on in written operator
order.  The zero mode appears explicitly in fixed-number bases and never in
excitation bases; hot loops live in bogoscope.fock.kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from bogoscope.correlations import CorrelationProfile
from bogoscope.fock import kernels
from bogoscope.fock.basis import FockBasis, OccupationState
from bogoscope.fock.sparse import SparseOperator, StateVector, basis_state
from bogoscope.modes import TWO_PI, ModeSet
from bogoscope.potentials import RadialPotential

__all__ = [
    "ExcitationHamiltonian",
    "ExcitationMap",
    "Observables",
    "build_excitation_hamiltonian",
    "build_excitation_map",
    "build_hamiltonian_full",
    "build_observables",
    "ladder_apply",
    "ladder_matrix",
    "transfer_matrix",
]

LADDER_KINDS = ("a", "a_dag", "b", "b_dag")


# -- shared precomputations -------------------------------------------------


def _mode_grid(modes: ModeSet) -> tuple[np.ndarray, int]:
    # dense cube from shifted label to mode index; -1 marks absent labels
    lab = modes.labels
    off = int(np.abs(lab).max())
    size = 2 * off + 1
    grid = -np.ones((size, size, size), dtype=np.int64)
    grid[lab[:, 0] + off, lab[:, 1] + off, lab[:, 2] + off] = np.arange(len(lab))
    return grid, off


def _vhat_transfer_table(modes: ModeSet, potential: RadialPotential, scale: float) -> np.ndarray:
    # kernel values for every possible squared transfer label |u' - u|^2
    max_m2 = int((modes.labels**2).sum(axis=1).max())
    m2 = np.arange(4 * max_m2 + 1, dtype=float)
    return np.ascontiguousarray(potential.fourier(TWO_PI * np.sqrt(m2) / scale))


def _vhat_mode_table(modes: ModeSet, potential: RadialPotential, scale: float) -> np.ndarray:
    return np.ascontiguousarray(potential.fourier(modes.p_norm / scale))


def _run_two_pass(kernel, basis: FockBasis, args: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = basis.dim
    counts = np.zeros(d, dtype=np.int64)
    starts = np.zeros(d, dtype=np.int64)
    empty_i = np.empty(0, dtype=np.int64)
    empty_f = np.empty(0, dtype=np.float64)
    kernel(basis.states, *args, counts, starts, empty_i, empty_i, empty_f, False)
    np.cumsum(counts[:-1], out=starts[1:])
    total = int(counts.sum())
    rows = np.empty(total, dtype=np.int64)
    cols = np.empty(total, dtype=np.int64)
    vals = np.empty(total, dtype=np.float64)
    kernel(basis.states, *args, counts, starts, rows, cols, vals, True)
    return rows, cols, vals


def _diagonal_operator(basis: FockBasis, diag: np.ndarray, label: str) -> SparseOperator:
    idx = np.arange(basis.dim, dtype=np.int64)
    return SparseOperator(basis, idx, idx, np.asarray(diag, dtype=np.float64),
                          hermitian=True, label=label)


def _require_excitation_basis(basis: FockBasis, n_particles: int, what: str) -> None:
    if basis.rule != "max":
        raise ValueError(f"{what} needs an excitation basis (rule 'max'), got rule {basis.rule!r}")
    if basis.modes.include_zero:
        raise ValueError(f"{what} needs a zero-free mode set; the zero mode belongs to fixed-number bases")
    if basis.cap > n_particles:
        raise ValueError(
            f"occupation cap {basis.cap} exceeds the particle number {n_particles}; "
            "the occupation radicals would turn negative"
        )


# -- ladder operators -------------------------------------------------------


def ladder_matrix(basis: FockBasis, p, kind: str, n_particles: int | None = None) -> SparseOperator:
    """Matrix of one ladder operator compressed to the basis.

    Kinds 'a' and 'a_dag' are the bare operators; 'b' and 'b_dag' carry the
    sqrt((N - Nplus)/N) dressing and act on zero-free bases only, with the
    radical evaluated on the state it multiplies in written order.
    """
    if kind not in LADDER_KINDS:
        raise ValueError(f"kind must be one of {LADDER_KINDS}, got {kind!r}")
    ip = basis.modes.index_of(p)
    if ip < 0:
        raise ValueError(f"momentum label {tuple(int(c) for c in p)} is not in the mode set")
    dressed = kind in ("b", "b_dag")
    if dressed:
        if basis.modes.include_zero:
            raise ValueError("dressed ladder operators act on the excitation space; "
                             "the basis must not contain the zero mode")
        if n_particles is None:
            raise ValueError("dressed ladder operators need n_particles")
        n_particles = int(n_particles)
        if basis.cap > n_particles:
            raise ValueError(
                f"occupation cap {basis.cap} exceeds the particle number {n_particles}"
            )
    raising = kind in ("a_dag", "b_dag")
    st = basis.states
    totals = basis.totals
    rows, cols, vals = [], [], []
    for i in range(basis.dim):
        n = st[i]
        if not raising and n[ip] == 0:
            continue
        target = n.copy()
        if raising:
            amp = np.sqrt(target[ip] + 1.0)
            target[ip] += 1
        else:
            amp = np.sqrt(float(target[ip]))
            target[ip] -= 1
        j = basis.lookup(target)
        if j < 0:
            continue
        if dressed:
            after = totals[i] if raising else totals[i] - 1
            amp *= np.sqrt((n_particles - after) / n_particles)
        rows.append(j)
        cols.append(i)
        vals.append(amp)
    return SparseOperator(basis, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                          np.array(vals, dtype=np.float64), hermitian=False,
                          label=f"{kind}{tuple(int(c) for c in p)}")


def transfer_matrix(basis: FockBasis, p, q) -> SparseOperator:
    """Number-conserving product: create at p after annihilating at q."""
    ip = basis.modes.index_of(p)
    iq = basis.modes.index_of(q)
    if ip < 0 or iq < 0:
        raise ValueError("both momentum labels must belong to the mode set")
    st = basis.states
    rows, cols, vals = [], [], []
    for i in range(basis.dim):
        n = st[i]
        if n[iq] == 0:
            continue
        target = n.copy()
        amp = np.sqrt(float(target[iq]))
        target[iq] -= 1
        amp *= np.sqrt(target[ip] + 1.0)
        target[ip] += 1
        j = basis.lookup(target)
        if j < 0:
            continue
        rows.append(j)
        cols.append(i)
        vals.append(amp)
    return SparseOperator(basis, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                          np.array(vals, dtype=np.float64), hermitian=ip == iq,
                          label=f"transfer{tuple(int(c) for c in p)}<-{tuple(int(c) for c in q)}")


def ladder_apply(basis: FockBasis, p, kind: str, state, n_particles: int | None = None) -> StateVector:
    """Apply one ladder operator to a vector or a single occupation state.

    Returns the image as a StateVector; states pushed out of the basis are
    dropped, so the null vector signals a fully annihilated input.
    """
    if isinstance(state, OccupationState):
        idx = basis.lookup(state)
        if idx < 0:
            raise ValueError("occupation state is not a member of the basis")
        state = basis_state(basis, idx)
    elif not isinstance(state, StateVector):
        raise TypeError("state must be an OccupationState or a StateVector")
    if not state.basis.same_space(basis):
        raise ValueError("state vector lives on a different basis")
    return ladder_matrix(basis, p, kind, n_particles).apply(state)


# -- Hamiltonians -----------------------------------------------------------


def build_hamiltonian_full(basis: FockBasis, potential: RadialPotential, kappa: float,
                           n_particles: int, beta: float = 1.0) -> SparseOperator:
    """Fixed-number Hamiltonian on its occupation basis.

    Kinetic diagonal plus the quartic interaction with kernel
    Vhat(r/N^beta) at coupling kappa/(2N); beta = 1 is the box-scale
    scattering regime, beta = 0 the mean-field one.
    """
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    n_particles = int(n_particles)
    if basis.rule != "total" or basis.cap != n_particles:
        raise ValueError(
            f"basis must fix the particle total at {n_particles}, got rule "
            f"{basis.rule!r} with cap {basis.cap}"
        )
    if not basis.modes.include_zero:
        raise ValueError("fixed-number Hamiltonian needs the zero mode in the mode set")
    grid, off = _mode_grid(basis.modes)
    vhat = _vhat_transfer_table(basis.modes, potential, float(n_particles) ** beta)
    coeff = kappa / (2.0 * n_particles)
    rows, cols, vals = _run_two_pass(
        kernels.quartic_pass, basis,
        (basis.modes.labels, grid, off, vhat, coeff),
    )
    idx = np.arange(basis.dim, dtype=np.int64)
    return SparseOperator(
        basis,
        np.concatenate([rows, idx]),
        np.concatenate([cols, idx]),
        np.concatenate([vals, basis.kinetic_diagonal.astype(np.float64)]),
        hermitian=True,
        label="H",
    )


@dataclass(frozen=True, eq=False)
class ExcitationHamiltonian:
    """Condensate-factored Hamiltonian, one operator per polynomial degree."""

    constant: SparseOperator
    quadratic: SparseOperator
    cubic: SparseOperator
    quartic: SparseOperator

    @property
    def parts(self) -> tuple[SparseOperator, ...]:
        return (self.constant, self.quadratic, self.cubic, self.quartic)

    @property
    def total(self) -> SparseOperator:
        ops = self.parts
        return SparseOperator(
            ops[0].basis,
            np.concatenate([op.rows for op in ops]),
            np.concatenate([op.cols for op in ops]),
            np.concatenate([op.values for op in ops]),
            hermitian=True,
            label="L",
        )


def build_excitation_hamiltonian(basis: FockBasis, potential: RadialPotential,
                                 kappa: float, n_particles: int) -> ExcitationHamiltonian:
    """Excitation Hamiltonian assembled term by term on a zero-free basis.

    The four parts carry zero, two, three and four ladder operators of
    nonzero momentum; their sum is unitarily equivalent to the fixed-number
    Hamiltonian when the occupation cap reaches the particle number.
    """
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    n_particles = int(n_particles)
    if n_particles < 1:
        raise ValueError(f"n_particles must be at least 1, got {n_particles}")
    _require_excitation_basis(basis, n_particles, "excitation Hamiltonian")
    N = float(n_particles)
    t = basis.totals.astype(np.float64)
    modes = basis.modes
    v0 = float(potential.fourier(0.0))
    vmode = _vhat_mode_table(modes, potential, N)
    grid, off = _mode_grid(modes)
    neg = np.ascontiguousarray(modes.neg_index)

    const = ((N - 1.0) / (2.0 * N)) * kappa * v0 * (N - t) \
        + (kappa * v0 / (2.0 * N)) * t * (N - t)
    l0 = _diagonal_operator(basis, const, "constant")

    diag = basis.kinetic_diagonal + (basis.states @ (kappa * vmode)) * (N - t) / N
    prows, pcols, pvals = _run_two_pass(
        kernels.pairing_pass, basis,
        (neg, np.ascontiguousarray(0.5 * kappa * vmode), N, basis.cap),
    )
    idx = np.arange(basis.dim, dtype=np.int64)
    l2 = SparseOperator(
        basis,
        np.concatenate([prows, idx]),
        np.concatenate([pcols, idx]),
        np.concatenate([pvals, diag]),
        hermitian=True,
        label="quadratic",
    )

    crows, ccols, cvals = _run_two_pass(
        kernels.cubic_pass, basis,
        (modes.labels, grid, off, neg, vmode, kappa / np.sqrt(N), N, basis.cap),
    )
    l3 = SparseOperator(basis, crows, ccols, cvals, hermitian=True, label="cubic")

    vhat = _vhat_transfer_table(modes, potential, N)
    qrows, qcols, qvals = _run_two_pass(
        kernels.quartic_pass, basis,
        (modes.labels, grid, off, vhat, kappa / (2.0 * N)),
    )
    l4 = SparseOperator(basis, qrows, qcols, qvals, hermitian=True, label="quartic")
    return ExcitationHamiltonian(constant=l0, quadratic=l2, cubic=l3, quartic=l4)


# -- condensate-factoring bijection -----------------------------------------


@dataclass(frozen=True, eq=False)
class ExcitationMap:
    """Bijection that deletes the explicit zero mode of a fixed-number basis.

    ``permutation[i]`` is the excitation-basis index of full-basis state i;
    conjugation therefore permutes sparse entries without touching values.
    """

    full_basis: FockBasis
    excitation_basis: FockBasis
    permutation: np.ndarray

    def apply(self, vec: StateVector) -> StateVector:
        if not vec.basis.same_space(self.full_basis):
            raise ValueError("vector does not live on the fixed-number basis")
        out = np.empty(self.excitation_basis.dim)
        out[self.permutation] = vec.coefficients
        return StateVector(self.excitation_basis, out)

    def inverse_apply(self, vec: StateVector) -> StateVector:
        if not vec.basis.same_space(self.excitation_basis):
            raise ValueError("vector does not live on the excitation basis")
        return StateVector(self.full_basis, vec.coefficients[self.permutation])

    def conjugate(self, op: SparseOperator) -> SparseOperator:
        """Push an operator from the fixed-number to the excitation picture."""
        if not op.basis.same_space(self.full_basis):
            raise ValueError("operator does not live on the fixed-number basis")
        return SparseOperator(
            self.excitation_basis,
            self.permutation[op.rows],
            self.permutation[op.cols],
            op.values.copy(),
            hermitian=op.hermitian,
            label=op.label,
        )

    def as_matrix(self) -> sp.csr_matrix:
        d = self.full_basis.dim
        return sp.csr_matrix(
            (np.ones(d), (self.permutation, np.arange(d))), shape=(d, d)
        )


def build_excitation_map(full_basis: FockBasis, excitation_basis: FockBasis) -> ExcitationMap:
    """Pair a fixed-number basis with its excitation image.

    The map deletes the zero-mode column; it is a bijection exactly when
    the excitation cap equals the particle number and the mode sets agree
    up to the zero mode.
    """
    if full_basis.rule != "total":
        raise ValueError("the source basis must fix the particle total")
    zi = full_basis.modes.zero_index
    if zi is None:
        raise ValueError("the source basis must carry the zero mode explicitly")
    if excitation_basis.rule != "max" or excitation_basis.modes.include_zero:
        raise ValueError("the target must be a zero-free excitation basis")
    if excitation_basis.cap != full_basis.cap:
        raise ValueError(
            f"excitation cap {excitation_basis.cap} does not match the particle "
            f"number {full_basis.cap}; the map is a bijection only when they agree"
        )
    if not np.array_equal(excitation_basis.modes.labels, full_basis.modes.drop_zero().labels):
        raise ValueError("mode sets differ beyond the zero mode")
    if full_basis.sector != excitation_basis.sector:
        raise ValueError("momentum sectors differ between the two bases")
    if full_basis.dim != excitation_basis.dim:
        raise ValueError(
            f"dimensions differ ({full_basis.dim} vs {excitation_basis.dim}); "
            "the deletion map cannot be a bijection"
        )
    keep = np.ones(len(full_basis.modes), dtype=bool)
    keep[zi] = False
    perm = np.empty(full_basis.dim, dtype=np.int64)
    for i in range(full_basis.dim):
        j = excitation_basis.lookup(full_basis.states[i][keep])
        if j < 0:
            raise ValueError("a fixed-number state has no excitation image; bases are inconsistent")
        perm[i] = j
    return ExcitationMap(full_basis=full_basis, excitation_basis=excitation_basis, permutation=perm)


# -- observables ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Observables:
    """Excitation-space observables sharing one basis."""

    number: SparseOperator
    kinetic: SparseOperator
    quartic: SparseOperator
    cubic: SparseOperator
    energy: SparseOperator


def pair_amplitudes(
    profile: CorrelationProfile, modes: ModeSet
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-mode (eta, cosh eta, sinh eta) of the deficit amplitude.

    The profile must cover every basis mode, either by explicit labels or
    by shell norm.
    """
    if profile.mode_set is not None:
        pidx = np.empty(len(modes), dtype=np.int64)
        for a, lab in enumerate(modes.labels):
            j = profile.mode_set.index_of(lab)
            if j < 0:
                raise ValueError(
                    f"correlation profile does not cover mode {tuple(int(c) for c in lab)}"
                )
            pidx[a] = j
        eta = profile.eta[pidx]
    else:
        shell_of = {int(m): k for k, m in enumerate(np.rint((profile.p_norms / TWO_PI) ** 2))}
        m2 = (modes.labels**2).sum(axis=1)
        eta = np.empty(len(modes))
        for a, m in enumerate(m2):
            k = shell_of.get(int(m))
            if k is None:
                raise ValueError(
                    f"correlation profile does not cover the shell |n|^2 = {int(m)}"
                )
            eta[a] = profile.eta[k]
    return eta, np.cosh(eta), np.sinh(eta)


def build_observables(basis: FockBasis, profile: CorrelationProfile,
                      potential: RadialPotential, kappa: float,
                      n_particles: int) -> Observables:
    """Excitation number, kinetic form, quartic interaction, pair-dressed
    cubic term, and the field energy kinetic + quartic."""
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    n_particles = int(n_particles)
    if n_particles < 1:
        raise ValueError(f"n_particles must be at least 1, got {n_particles}")
    _require_excitation_basis(basis, n_particles, "observable assembly")
    N = float(n_particles)
    modes = basis.modes
    _, gamma, sigma = pair_amplitudes(profile, modes)
    grid, off = _mode_grid(modes)
    neg = np.ascontiguousarray(modes.neg_index)
    vmode = _vhat_mode_table(modes, potential, N)

    number = _diagonal_operator(basis, basis.totals.astype(np.float64), "number")
    kinetic = _diagonal_operator(basis, basis.kinetic_diagonal.astype(np.float64), "kinetic")

    vhat = _vhat_transfer_table(modes, potential, N)
    qrows, qcols, qvals = _run_two_pass(
        kernels.quartic_pass, basis,
        (modes.labels, grid, off, vhat, kappa / (2.0 * N)),
    )
    quartic = SparseOperator(basis, qrows, qcols, qvals, hermitian=True, label="quartic")

    crows, ccols, cvals = _run_two_pass(
        kernels.dressed_cubic_pass, basis,
        (modes.labels, grid, off, neg, vmode,
         np.ascontiguousarray(gamma), np.ascontiguousarray(sigma),
         kappa / np.sqrt(N), N, basis.cap),
    )
    cubic = SparseOperator(basis, crows, ccols, cvals, hermitian=True, label="cubic")

    energy = SparseOperator(
        basis,
        np.concatenate([kinetic.rows, quartic.rows]),
        np.concatenate([kinetic.cols, quartic.cols]),
        np.concatenate([kinetic.values, quartic.values]),
        hermitian=True,
        label="kinetic+quartic",
    )
    return Observables(number=number, kinetic=kinetic, quartic=quartic,
                       cubic=cubic, energy=energy)
