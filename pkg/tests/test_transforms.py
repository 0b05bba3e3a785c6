"""Rotation generators, exponentials, conjugation stages, and residual reports.

The exponential route is checked against an eigendecomposition oracle, the
generators against direct per-state occupation arithmetic, and the staged
conjugations against spectrum preservation, composition, and the decay of
measured remainders with the particle number.
"""

import itertools
import json

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

import bogoscope.transforms as tr
from bogoscope.correlations import born_profile, build_eta
from bogoscope.eig import lowest_spectrum, moment_check
from bogoscope.fock import (
    SparseOperator,
    basis_state,
    build_basis,
    build_excitation_hamiltonian,
    build_observables,
    pair_amplitudes,
    vacuum_state,
)
from bogoscope.modes import ModeSet, build_mode_set
from bogoscope.potentials import soft_sphere, tabulated
from bogoscope.scattering import solve_scattering

TWO_PI = 2.0 * np.pi


def unit_shell() -> ModeSet:
    return build_mode_set("euclidean", TWO_PI + 1e-9, False)


def two_shells() -> ModeSet:
    labels = [
        l for l in itertools.product((-1, 0, 1), repeat=3)
        if sum(c * c for c in l) in (1, 2)
    ]
    return ModeSet(np.array(labels))


def single_pair() -> ModeSet:
    return ModeSet(np.array([[0, 0, -1], [0, 0, 1]]))


POT = soft_sphere(1.0, 0.4)


# -- oracles ------------------------------------------------------------------


def expm_eigh_oracle(generator: np.ndarray) -> np.ndarray:
    """exp of a real antisymmetric matrix through the hermitian form i*G."""
    w, u = np.linalg.eigh(1j * generator)
    return (u @ np.diag(np.exp(-1j * w)) @ u.conj().T).real


def pair_generator_dense(basis, eta, n_particles):
    """(1/2) sum_p eta_p (b+_p b+_-p - b_p b_-p) from per-state arithmetic."""
    N = float(n_particles)
    neg = basis.modes.neg_index
    dense = np.zeros((basis.dim, basis.dim))
    for i in range(basis.dim):
        n = basis.states[i]
        t = int(basis.totals[i])
        for ip in range(len(basis.modes)):
            iq = neg[ip]
            # creation pair: b+_p then b+_-p, radicals right to left
            target = n.copy()
            target[iq] += 1
            target[ip] += 1
            j = basis.lookup(target)
            if j >= 0:
                amp = np.sqrt((n[iq] + 1.0) * (N - t) / N)
                amp *= np.sqrt((n[ip] + 1.0) * (N - t - 1.0) / N)
                dense[j, i] += 0.5 * eta[ip] * amp
            # annihilation pair: b_p b_-p
            if n[ip] > 0 and n[iq] > 0:
                target = n.copy()
                target[iq] -= 1
                target[ip] -= 1
                j = basis.lookup(target)
                if j >= 0:
                    amp = np.sqrt(n[iq] * (N - t + 1.0) / N)
                    amp *= np.sqrt(n[ip] * (N - t + 2.0) / N)
                    dense[j, i] -= 0.5 * eta[ip] * amp
    return dense


def theta_dense(basis, profile, potential, kappa, n_particles):
    """Second-order correction from per-state arithmetic."""
    N = float(n_particles)
    modes = basis.modes
    eta, gamma, sigma = pair_amplitudes(profile, modes)
    high = modes.p_norm > np.sqrt(N)
    weights = np.zeros(len(modes))
    for v in np.flatnonzero(~high):
        acc = 0.0
        for r in np.flatnonzero(high):
            if modes.index_of(modes.labels[r] + modes.labels[v]) < 0:
                continue
            k_r = TWO_PI * np.linalg.norm(modes.labels[r]) / N
            k_rv = TWO_PI * np.linalg.norm(modes.labels[r] + modes.labels[v]) / N
            acc += (potential.fourier(k_r) + potential.fourier(k_rv)) * eta[r]
        weights[v] = 2.0 * kappa * acc / N
    dense = np.zeros((basis.dim, basis.dim))
    neg = modes.neg_index
    for i in range(basis.dim):
        n = basis.states[i]
        t = int(basis.totals[i])
        for v in np.flatnonzero(~high):
            dense[i, i] += weights[v] * sigma[v] ** 2
            dense[i, i] += weights[v] * (gamma[v] ** 2 + sigma[v] ** 2) \
                * n[v] * (N - t + 1.0) / N
            coef = weights[v] * gamma[v] * sigma[v]
            target = n.copy()
            target[neg[v]] += 1
            target[v] += 1
            j = basis.lookup(target)
            if j >= 0:
                amp = np.sqrt((n[neg[v]] + 1.0) * (N - t) / N)
                amp *= np.sqrt((n[v] + 1.0) * (N - t - 1.0) / N)
                dense[j, i] += coef * amp
            if n[v] > 0 and n[neg[v]] > 0:
                target = n.copy()
                target[neg[v]] -= 1
                target[v] -= 1
                j = basis.lookup(target)
                if j >= 0:
                    amp = np.sqrt(n[neg[v]] * (N - t + 1.0) / N)
                    amp *= np.sqrt(n[v] * (N - t + 2.0) / N)
                    dense[j, i] += coef * amp
    return dense


# -- generator construction ---------------------------------------------------


def test_generator_kind_validation():
    basis = build_basis(single_pair(), "max", 2)
    with pytest.raises(ValueError, match="kind must be one of"):
        tr.GeneratorSpec("sextic", basis, np.zeros((basis.dim, basis.dim)), 10)
    with pytest.raises(ValueError, match="'quadratic' or 'final_quadratic'"):
        tr.pair_generator(basis, np.zeros(2), 10, kind="cubic")


def test_generator_antisymmetry_validation():
    basis = build_basis(single_pair(), "max", 2)
    sym = np.eye(basis.dim)
    with pytest.raises(ValueError, match="not antisymmetric"):
        tr.GeneratorSpec("quadratic", basis, sym, 10)
    with pytest.raises(ValueError, match="does not match the basis dimension"):
        tr.GeneratorSpec("quadratic", basis, np.zeros((2, 2)), 10)


def test_amplitude_validation():
    basis = build_basis(single_pair(), "max", 2)
    with pytest.raises(ValueError, match="amplitude array has shape"):
        tr.pair_generator(basis, np.zeros(5), 10)
    with pytest.raises(ValueError, match="even under momentum reversal"):
        tr.pair_generator(basis, np.array([0.1, 0.2]), 10)


def test_rotation_basis_validation():
    with_zero = ModeSet(np.array([[0, 0, -1], [0, 0, 1], [0, 0, 0]]))
    basis = build_basis(with_zero, "total", 3)
    with pytest.raises(ValueError, match="zero mode"):
        tr.pair_generator(basis, np.zeros(3), 10)
    clean = build_basis(single_pair(), "max", 4)
    with pytest.raises(ValueError, match="exceeds the particle number"):
        tr.pair_generator(clean, np.zeros(2), 3)
    with pytest.raises(ValueError, match="n_particles must be at least 1"):
        tr.pair_generator(clean, np.zeros(2), 0)


def test_pair_generator_matches_state_arithmetic():
    basis = build_basis(unit_shell(), "max", 3)
    eta = 0.05 * np.arange(1, 7, dtype=float)
    eta = (eta + eta[basis.modes.neg_index]) / 2.0
    spec = tr.pair_generator(basis, eta, 25)
    oracle = pair_generator_dense(basis, eta, 25)
    assert np.abs(spec.matrix.toarray() - oracle).max() < 1e-13


def test_pair_generator_accepts_profile():
    basis = build_basis(unit_shell(), "max", 3)
    prof = born_profile(POT, 0.1, 50, unit_shell())
    eta, _, _ = pair_amplitudes(prof, basis.modes)
    spec = tr.pair_generator(basis, prof, 50)
    direct = tr.pair_generator(basis, eta, 50)
    assert np.abs((spec.matrix - direct.matrix)).max() == 0.0


# -- exponentials -------------------------------------------------------------


def test_exponential_identity_at_zero_amplitude():
    basis = build_basis(unit_shell(), "max", 3)
    transform = tr.exponentiate_generator(tr.pair_generator(basis, np.zeros(6), 30))
    assert np.array_equal(transform, np.eye(basis.dim))


def test_exponential_orthogonality_mid_size():
    # six modes, cap six: 924 states
    basis = build_basis(unit_shell(), "max", 6)
    assert basis.dim == 924
    prof = born_profile(POT, 0.1, 50, unit_shell())
    transform = tr.exponentiate_generator(tr.pair_generator(basis, prof, 50))
    assert tr.orthogonality_defect(transform) < 1e-10


def test_exponential_matches_eigendecomposition():
    basis = build_basis(unit_shell(), "max", 4)
    prof = born_profile(POT, 0.15, 40, unit_shell())
    spec = tr.pair_generator(basis, prof, 40)
    transform = tr.exponentiate_generator(spec)
    oracle = expm_eigh_oracle(spec.matrix.toarray())
    assert np.abs(transform - oracle).max() < 1e-12


def test_exponential_dimension_limit(monkeypatch):
    basis = build_basis(single_pair(), "max", 3)
    spec = tr.pair_generator(basis, np.zeros(2), 10)
    monkeypatch.setattr(tr, "EXPM_DIM_LIMIT", basis.dim - 1)
    with pytest.raises(ValueError, match="exceeds the exponentiation limit"):
        tr.exponentiate_generator(spec)


def test_pair_rotation_vacuum_moment_reaches_closed_form():
    # <vac, T^T b_p b_-p T vac> approaches cosh(eta) sinh(eta) as N grows
    from bogoscope.fock import ladder_matrix

    basis = build_basis(single_pair(), "max", 10)
    eta = np.array([0.25, 0.25])
    target = np.cosh(0.25) * np.sinh(0.25)
    vac = vacuum_state(basis).coefficients
    errors = []
    for n_particles in (50, 200, 800):
        transform = tr.exponentiate_generator(tr.pair_generator(basis, eta, n_particles))
        down = ladder_matrix(basis, [0, 0, 1], "b_dag", n_particles).to_dense().T
        down_neg = ladder_matrix(basis, [0, 0, -1], "b_dag", n_particles).to_dense().T
        moment = vac @ (transform.T @ (down @ down_neg) @ transform) @ vac
        errors.append(abs(moment - target))
    assert errors[0] > errors[1] > errors[2]
    assert errors[-1] < 5e-4


@given(st.lists(st.floats(-0.4, 0.4), min_size=1, max_size=1))
def test_pair_rotation_group_inverse(eta_vals):
    basis = build_basis(single_pair(), "max", 4)
    eta = np.array([eta_vals[0], eta_vals[0]])
    forward = tr.exponentiate_generator(tr.pair_generator(basis, eta, 20))
    backward = tr.exponentiate_generator(tr.pair_generator(basis, -eta, 20))
    assert np.abs(forward @ backward - np.eye(basis.dim)).max() < 1e-10


# -- cubic generator ----------------------------------------------------------


def test_high_low_split_moves_with_particle_number():
    basis = build_basis(two_shells(), "max", 2)
    high, low = tr.high_low_split(basis, 60)
    assert (high.sum(), low.sum()) == (12, 6)
    high, low = tr.high_low_split(basis, 30)
    assert (high.sum(), low.sum()) == (18, 0)
    high, low = tr.high_low_split(basis, 90)
    assert (high.sum(), low.sum()) == (0, 18)


def test_cubic_generator_empty_split_is_zero():
    basis = build_basis(unit_shell(), "max", 3)
    for n_particles in (20, 160):  # all modes high, then all modes low
        prof = born_profile(POT, 0.1, n_particles, unit_shell())
        spec = tr.cubic_generator(basis, prof, n_particles)
        assert spec.matrix.nnz == 0


def test_cubic_generator_vacuum_image_is_three_excitations():
    basis = build_basis(two_shells(), "max", 3)
    prof = born_profile(POT, 0.1, 60, two_shells())
    spec = tr.cubic_generator(basis, prof, 60)
    assert spec.matrix.nnz > 0
    image = spec.matrix.toarray() @ vacuum_state(basis).coefficients
    support = basis.totals[np.abs(image) > 0]
    assert set(support.tolist()) == {3}


# -- staged conjugation -------------------------------------------------------


def _stage_inputs(cap=3, n_particles=60, kappa=0.1):
    modes = two_shells()
    basis = build_basis(modes, "max", cap)
    prof = born_profile(POT, kappa, n_particles, modes)
    pair = tr.exponentiate_generator(tr.pair_generator(basis, prof, n_particles))
    cubic = tr.exponentiate_generator(tr.cubic_generator(basis, prof, n_particles))
    ham = build_excitation_hamiltonian(basis, POT, kappa, n_particles).total
    return basis, prof, pair, cubic, ham


def test_renormalize_validation():
    basis, _, pair, cubic, ham = _stage_inputs(cap=2)
    with pytest.raises(ValueError, match="stage must be one of"):
        tr.renormalize("X", ham, [pair])
    with pytest.raises(ValueError, match="conjugates 2 transform"):
        tr.renormalize("J", ham, [pair])
    with pytest.raises(ValueError, match="is not orthogonal"):
        tr.renormalize("G", ham, [2.0 * pair])
    with pytest.raises(ValueError, match="expected"):
        tr.renormalize("G", ham, [np.eye(3)])
    skew = SparseOperator(basis, np.array([0]), np.array([1]), np.array([1.0]))
    with pytest.raises(ValueError, match="hermitian"):
        tr.renormalize("G", skew, [pair])


def test_renormalize_identity_transform_returns_input():
    _, _, _, _, ham = _stage_inputs(cap=2)
    out = tr.renormalize("G", ham, [np.eye(ham.dim)])
    assert np.abs(out.to_dense() - ham.to_dense()).max() < 1e-14


def test_renormalize_preserves_spectrum():
    basis, _, pair, cubic, ham = _stage_inputs()
    reference = np.sort(sla.eigvalsh(ham.to_dense()))
    for stage, chain in (("G", [pair]), ("J", [pair, cubic]),
                         ("M", [pair, cubic, pair])):
        conjugated = tr.renormalize(stage, ham, chain)
        values = np.sort(sla.eigvalsh(conjugated.to_dense()))
        assert np.abs(values - reference).max() < 1e-9
    lowest = lowest_spectrum(tr.renormalize("G", ham, [pair]), 5, want_vectors=False)
    dense = lowest_spectrum(ham, 5, want_vectors=False)
    assert np.abs(lowest.eigenvalues - dense.eigenvalues).max() < 1e-9


def test_renormalize_lowers_vacuum_energy():
    basis, _, pair, _, ham = _stage_inputs()
    vac = vacuum_state(basis)
    conjugated = tr.renormalize("G", ham, [pair])
    assert conjugated.expectation(vac) < ham.expectation(vac)


def test_composition_matches_single_shot():
    _, _, pair, cubic, ham = _stage_inputs()
    full = tr.renormalize("M", ham, [pair, cubic, pair])
    step = tr.renormalize("G", ham, [pair])
    step = tr.renormalize("G", step, [cubic])
    step = tr.renormalize("G", step, [pair])
    assert np.abs(full.to_dense() - step.to_dense()).max() < 1e-10


# -- rotated-annihilator remainders -------------------------------------------


def test_remainder_vanishes_at_zero_amplitude():
    basis = build_basis(unit_shell(), "max", 4)
    report = tr.measure_remainders_dp(basis, np.zeros(6), 40, [0, 0, 1])
    assert report.max_ratio == 0.0
    assert report.margin == 2


def test_remainder_decays_with_particle_number():
    basis = build_basis(unit_shell(), "max", 4)
    ratios = []
    for n_particles in (20, 160):
        prof = born_profile(POT, 0.1, n_particles, unit_shell())
        report = tr.measure_remainders_dp(basis, prof, n_particles, [0, 0, 1])
        ratios.append(report.max_ratio)
    assert 6.0 < ratios[0] / ratios[1] < 10.0


def test_remainder_margin_keeps_cap_states_honest():
    # without the margin, probes near the cap pick up a cutoff artifact
    # that stays flat in N; the margin restores the 1/N decay for them
    basis = build_basis(unit_shell(), "max", 4)
    flat, decayed = [], []
    for n_particles in (40, 160):
        prof = born_profile(POT, 0.1, n_particles, unit_shell())
        bare = tr.measure_remainders_dp(basis, prof, n_particles, [0, 0, 1], margin=0)
        wide = tr.measure_remainders_dp(basis, prof, n_particles, [0, 0, 1])
        flat.append(bare.level_ratios[3])
        decayed.append(wide.level_ratios[3])
    assert flat[0] / flat[1] < 1.5
    assert 3.0 < decayed[0] / decayed[1] < 5.0


def test_remainder_validation():
    basis = build_basis(unit_shell(), "max", 4)
    with pytest.raises(ValueError, match="not in the mode set"):
        tr.measure_remainders_dp(basis, np.zeros(6), 40, [3, 0, 0])
    with pytest.raises(ValueError, match="margin must be nonnegative"):
        tr.measure_remainders_dp(basis, np.zeros(6), 40, [0, 0, 1], margin=-1)
    with pytest.raises(ValueError, match="exceeds the particle number"):
        tr.measure_remainders_dp(basis, np.zeros(6), 5, [0, 0, 1])
    sector = build_basis(unit_shell(), "max", 4, sector=(0, 0, 0))
    with pytest.raises(ValueError, match="full basis"):
        tr.measure_remainders_dp(sector, np.zeros(6), 40, [0, 0, 1])
    fixed = build_basis(unit_shell(), "total", 4)
    with pytest.raises(ValueError, match="'max'-rule basis"):
        tr.measure_remainders_dp(fixed, np.zeros(6), 40, [0, 0, 1])


def test_remainder_report_contents():
    basis = build_basis(unit_shell(), "max", 4)
    prof = born_profile(POT, 0.1, 40, unit_shell())
    report = tr.measure_remainders_dp(basis, prof, 40, [0, 0, 1], seed=5, n_random=8)
    assert report.p == (0, 0, 1)
    assert report.seed == 5 and report.n_random == 8
    assert sorted(report.level_ratios) == [0, 1, 2, 3, 4]
    assert report.max_ratio >= report.random_ratio
    assert report.max_ratio == max(max(report.level_ratios.values()),
                                   report.random_ratio)


# -- pencils, growth, comparison ----------------------------------------------


def test_pencil_extremes_closed_form():
    target = np.diag([3.0, -2.0, 0.5])
    reference = np.diag([1.0, 2.0, 4.0])
    low, high = tr.pencil_extremes(target, reference)
    assert np.isclose(low, -1.0) and np.isclose(high, 3.0)
    with pytest.raises(ValueError, match="positive definite"):
        tr.pencil_extremes(target, np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError, match="pencil shapes differ"):
        tr.pencil_extremes(target, np.eye(2))


def test_comparison_operator_matches_moment_check():
    basis = build_basis(unit_shell(), "max", 3)
    prof = born_profile(POT, 0.1, 30, unit_shell())
    obs = build_observables(basis, prof, POT, 0.1, 30)
    comparison = tr.comparison_operator(basis, obs.energy)
    assert comparison.hermitian
    for idx in (0, 1, basis.dim // 2, basis.dim - 1):
        state = basis_state(basis, idx)
        m3, mixed = moment_check(state, obs.number, obs.energy)
        assert abs(comparison.expectation(state) - (m3 + mixed)) < 1e-12


def test_comparison_operator_rejects_foreign_basis():
    basis = build_basis(unit_shell(), "max", 3)
    other = build_basis(unit_shell(), "max", 2)
    prof = born_profile(POT, 0.1, 30, unit_shell())
    obs = build_observables(other, prof, POT, 0.1, 30)
    with pytest.raises(ValueError, match="different basis"):
        tr.comparison_operator(basis, obs.energy)


def test_conjugation_growth_bounds():
    basis, prof, pair, cubic, _ = _stage_inputs()
    obs = build_observables(basis, prof, POT, 0.1, 60)
    bounds = tr.conjugation_growth(cubic, basis, obs.energy)
    assert set(bounds) == {"m1", "m2", "m3", "mixed"}
    for value in bounds.values():
        assert 1.0 <= value < 1.5
    trivial = tr.conjugation_growth(np.eye(basis.dim), basis)
    assert all(np.isclose(v, 1.0) for v in trivial.values())


# -- decomposition residuals --------------------------------------------------


def test_zero_coupling_residual_is_exactly_zero():
    modes = unit_shell()
    basis = build_basis(modes, "max", 4)
    solution = solve_scattering(POT, 0.0, 40, 0.25)
    prof = build_eta(solution, modes, 40)
    pair = tr.exponentiate_generator(tr.pair_generator(basis, prof, 40))
    ham = build_excitation_hamiltonian(basis, POT, 0.0, 40).total
    conjugated = tr.renormalize("G", ham, [pair])
    obs = build_observables(basis, prof, POT, 0.0, 40)
    reference = tr.comparison_operator(basis, obs.energy)
    measurement = tr.measure_decomposition_residual(
        "G", conjugated, [4.0 * np.pi * solution.a0 * 40, obs.energy], reference, 40)
    assert measurement.residual_norm == 0.0
    assert measurement.pencil_bound == 0.0


def test_stage_g_pencil_constant_is_stable():
    # leftover after removing the constant and the bare energy stays within
    # half the energy plus a number term whose constant does not drift
    modes = unit_shell()
    basis = build_basis(modes, "max", 4)
    kappa = 0.1
    constants = []
    for n_particles in (20, 40, 80):
        solution = solve_scattering(POT, kappa, n_particles, 0.25)
        prof = build_eta(solution, modes, n_particles)
        pair = tr.exponentiate_generator(tr.pair_generator(basis, prof, n_particles))
        ham = build_excitation_hamiltonian(basis, POT, kappa, n_particles).total
        conjugated = tr.renormalize("G", ham, [pair])
        obs = build_observables(basis, prof, POT, kappa, n_particles)
        energy = obs.energy.to_dense()
        delta = conjugated.to_dense() - energy
        delta[np.diag_indices_from(delta)] -= 4.0 * np.pi * solution.a0 * n_particles
        reference = np.diag(kappa * (basis.totals + 1.0))
        c_plus = tr.pencil_extremes(delta - 0.5 * energy, reference)[1]
        c_minus = tr.pencil_extremes(-delta - 0.5 * energy, reference)[1]
        constants.append(max(c_plus, c_minus))
    assert all(c > 0 for c in constants)
    assert max(constants) / min(constants) < 2.0


def test_residual_measurement_validation():
    basis, prof, pair, _, ham = _stage_inputs(cap=2)
    conjugated = tr.renormalize("G", ham, [pair])
    obs = build_observables(basis, prof, POT, 0.1, 60)
    reference = tr.comparison_operator(basis, obs.energy)
    with pytest.raises(ValueError, match="stage must be one of"):
        tr.measure_decomposition_residual("Q", conjugated, [], reference, 60)
    foreign = build_basis(two_shells(), "max", 1)
    alien = build_excitation_hamiltonian(foreign, POT, 0.1, 60).total
    with pytest.raises(ValueError, match="different basis"):
        tr.measure_decomposition_residual("G", conjugated, [alien], reference, 60)


def test_theta_matches_state_arithmetic():
    basis = build_basis(two_shells(), "max", 3)
    prof = born_profile(POT, 0.2, 55, two_shells())
    theta = tr.theta_correction(basis, prof, POT, 0.2, 55)
    oracle = theta_dense(basis, prof, POT, 0.2, 55)
    assert theta.hermitian
    assert np.abs(theta.to_dense() - oracle).max() < 1e-12


def test_theta_empty_split_is_zero():
    basis = build_basis(unit_shell(), "max", 3)
    prof = born_profile(POT, 0.2, 20, unit_shell())  # every mode high
    theta = tr.theta_correction(basis, prof, POT, 0.2, 20)
    assert theta.nnz == 0


def test_theta_sharpens_cubic_conjugation():
    # conjugating the cubic term alone: subtracting the second-order
    # correction must explain a real part of what the rotation produced
    basis = build_basis(two_shells(), "max", 3)
    bounds = {}
    for n_particles in (45, 55, 70):
        prof = born_profile(POT, 0.2, n_particles, two_shells())
        cubic_rot = tr.exponentiate_generator(tr.cubic_generator(basis, prof, n_particles))
        obs = build_observables(basis, prof, POT, 0.2, n_particles)
        conjugated = tr.renormalize("G", obs.cubic, [cubic_rot])
        reference = tr.comparison_operator(basis, obs.energy)
        plain = tr.measure_decomposition_residual(
            "J", conjugated, [obs.cubic], reference, n_particles)
        sharp = tr.measure_decomposition_residual(
            "J", conjugated, [obs.cubic, tr.theta_correction(basis, prof, POT, 0.2, n_particles)],
            reference, n_particles)
        assert sharp.pencil_bound < 0.75 * plain.pencil_bound
        bounds[n_particles] = sharp.pencil_bound
    scaled = [bounds[n] * np.sqrt(n) for n in (45, 55, 70)]
    assert scaled[0] >= scaled[1] >= scaled[2] * 0.95


def test_fit_power_law_recovers_slope():
    ns = np.array([20, 40, 80, 160])
    slope, stderr = tr.fit_power_law(ns, 3.0 * ns ** -1.25)
    assert abs(slope + 1.25) < 1e-12
    assert stderr < 1e-12
    with pytest.raises(ValueError, match="at least three points"):
        tr.fit_power_law([10, 20], [1.0, 0.5])


def test_residual_report_assembly_and_json(tmp_path):
    measurements = [
        tr.ResidualMeasurement("J", n, 1.0 / n, -0.4 / n, 0.8 / n)
        for n in (20, 40, 80, 160)
    ]
    provenance = tr.provenance_record(POT, 0.1, n_particles=80, beta=0.5,
                                      cutoff=2, n_max=4, seed=7)
    report = tr.build_residual_report(measurements, beta=0.5, provenance=provenance)
    assert report.exponent is not None
    assert abs(report.exponent + 1.0) < 1e-12
    assert report.exponent_stderr < 1e-10
    path = tmp_path / "report.json"
    report.write_json(path)
    payload = json.loads(path.read_text())
    assert payload["stage"] == "J"
    assert payload["beta"] == 0.5
    assert payload["n_values"] == [20, 40, 80, 160]
    assert payload["provenance"]["kappa"] == 0.1
    assert payload["provenance"]["seed"] == 7
    assert len(payload["provenance"]["potential"]["digest"]) == 64


def test_residual_report_validation():
    good = tr.ResidualMeasurement("G", 20, 1.0, -0.1, 0.2)
    with pytest.raises(ValueError, match="at least one measurement"):
        tr.build_residual_report([])
    with pytest.raises(ValueError, match="mix stages"):
        tr.build_residual_report([good, tr.ResidualMeasurement("J", 40, 1.0, 0.0, 0.1)])
    with pytest.raises(ValueError, match="duplicate particle numbers"):
        tr.build_residual_report([good, tr.ResidualMeasurement("G", 20, 2.0, 0.0, 0.1)])
    zero = [tr.ResidualMeasurement("G", n, 0.0, 0.0, 0.0) for n in (20, 40, 80)]
    report = tr.build_residual_report(zero)
    assert report.exponent is None and report.exponent_stderr is None


def test_provenance_digest_distinguishes_potentials():
    first = tr.provenance_record(POT, 0.1)
    second = tr.provenance_record(soft_sphere(1.0, 0.41), 0.1)
    table = tr.provenance_record(tabulated([0.0, 0.5], [1.0, 0.0]), 0.1)
    digests = {first["potential"]["digest"], second["potential"]["digest"],
               table["potential"]["digest"]}
    assert len(digests) == 3
    assert "beta" not in first and "n_particles" not in first
