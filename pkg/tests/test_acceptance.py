"""Acceptance suite: the headline device-physics numbers, one test per
criterion, each printing a PASS/FAIL line (run with -s to see them all).

Shared heavy objects (the calibrated device and the decoherent pulse
library) are module fixtures; every sampled check pins the master seed
of the bundled config (20260809).
"""

import math

import numpy as np
import pytest

from zzforge.device_model import (
    REFERENCE_COHERENCE,
    DecoherenceSpec,
    build_capacitive_hamiltonian,
    build_resonator_hamiltonian,
    dressed_spectrum,
    sw_capacitive,
    sw_resonator,
)
from zzforge.dynamics import (
    QuantumProcess,
    extract_cnot_phase,
    free_evolution_cz,
    generalized_cnot,
    ideal_cz,
    simulate_gate,
)
from zzforge.estimation import (
    average_gate_fidelity,
    block_unitary_fidelity,
    fit_decay,
    mle_density_matrix,
    mle_ptm,
    ptm_of_process,
    state_fidelity,
)
from zzforge.experiments import (
    ShotSampler,
    TagPulseLibrary,
    generate_rb_sequences,
    ideal_prep_states,
    qpt_exact_frequencies,
    qst_entangled_pipeline,
    run_qpt,
    run_qst,
    run_rb,
    swipht_cnot_process,
    tomography_settings,
)
from zzforge.pulse_design import (
    SwiphtDesign,
    cz_gate_time,
    solve_tag,
    swipht_gate_time,
    swipht_phase_speed_margin,
    swipht_waveform,
    tag_condition_residuals,
    tag_waveform,
)
from zzforge.qcore import PAULI_X, projector

from conftest import random_dispersive_resonator, random_perturbative_capacitive

TWO_PI = 2 * math.pi
MASTER_SEED = 20260809
G_Z_NOMINAL = TWO_PI * 9.29e6


def _report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def decoherent_library(reference_params):
    return TagPulseLibrary(reference_params, REFERENCE_COHERENCE)


@pytest.fixture(scope="module")
def noiseless_library(reference_params):
    return TagPulseLibrary(reference_params)


def test_criterion_1_cz_exactness(reference_params):
    u = free_evolution_cz(reference_params).matrix
    dev = float(np.max(np.abs(u - np.diag([1, 1, 1, -1]))))
    t_ns = cz_gate_time(G_Z_NOMINAL) * 1e9
    ok = dev < 1e-12 and abs(t_ns - 53.8) <= 0.1
    _report(
        "criterion 1 (CZ exactness)",
        ok,
        f"matrix deviation {dev:.2e}, gate time {t_ns:.3f} ns",
    )


def test_criterion_2_swipht_closed_system(reference_params):
    p = reference_params
    t_ns = swipht_gate_time(G_Z_NOMINAL) * 1e9
    design = SwiphtDesign(g_z=p.g_z)
    margin = swipht_phase_speed_margin(design, grid_points=10_000)
    wf = swipht_waveform(design, samples=2048)
    u = simulate_gate(wf, drive_qubit=2, params=p).matrix
    phi, _resid = extract_cnot_phase(u)
    fids = block_unitary_fidelity(generalized_cnot(phi), u, ([0, 1], [2, 3]))
    harmful_return = min(abs(u[2, 2]) ** 2, abs(u[3, 3]) ** 2)
    ok = (
        abs(t_ns - 100.6) <= 0.1
        and min(fids) >= 0.999
        and harmful_return >= 1 - 1e-3
        and margin <= 1.0
    )
    _report(
        "criterion 2 (SWIPHT closed system)",
        ok,
        f"t_g {t_ns:.3f} ns, block fidelities {fids[0]:.6f}/{fids[1]:.6f}, "
        f"harmful return {harmful_return:.6f}, phase-speed margin {margin:.4f}, "
        f"phi {phi:.4f}",
    )


def test_criterion_3_tag_closed_system(reference_params):
    p = reference_params
    details = []
    ok = True
    for theta in (math.pi / 2, math.pi):
        tag = solve_tag(p.g_z, theta)
        residuals = tag_condition_residuals(tag)
        wf = tag_waveform(tag, tag.tau_br / 400)
        u = simulate_gate(wf, drive_qubit=1, params=p).matrix
        x = np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * PAULI_X
        target = np.kron(x, np.eye(2))
        fids = block_unitary_fidelity(target, u, ([0, 2], [1, 3]))
        ok = ok and min(fids) >= 0.999 and max(abs(r) for r in residuals) < 1e-9
        details.append(f"theta={theta:.3f}: blocks {fids[0]:.5f}/{fids[1]:.5f}")
    _report("criterion 3 (TAG closed system)", ok, "; ".join(details))


def test_criterion_4_qpt_reproduces_simulated_fidelities(
    reference_params, decoherent_library
):
    p = reference_params
    dec = REFERENCE_COHERENCE
    sampler = ShotSampler(MASTER_SEED)
    _, settings = tomography_settings()
    preps = ideal_prep_states()

    def qpt_fidelity(gate, perfect_prep):
        dataset, report = run_qpt(
            gate,
            p,
            dec,
            sampler,
            perfect_prep=perfect_prep,
            library=decoherent_library,
        )
        res = mle_ptm(dataset.counts, preps, settings)
        ideal = ptm_of_process(np.asarray(report["ideal_unitary"]))
        return average_gate_fidelity(res.ptm, ideal)

    f_cnot = qpt_fidelity("cnot", False)
    f_cz = qpt_fidelity("cz", False)
    f_cnot_pp = qpt_fidelity("cnot", True)
    f_cz_pp = qpt_fidelity("cz", True)
    gap_cnot = f_cnot_pp - f_cnot
    gap_cz = f_cz_pp - f_cz
    ok = (
        abs(f_cnot - 0.9892) <= 0.005
        and abs(f_cz - 0.9925) <= 0.005
        and abs(f_cnot_pp - 0.994) <= 0.003
        and abs(f_cz_pp - 0.997) <= 0.003
        and 0.001 <= gap_cnot <= 0.010
        and 0.001 <= gap_cz <= 0.010
    )
    _report(
        "criterion 4 (simulated QPT fidelities)",
        ok,
        f"CNOT {f_cnot:.4f} (target 0.9892+-0.005), CZ {f_cz:.4f} (target "
        f"0.9925+-0.005), perfect-prep CNOT {f_cnot_pp:.4f} (0.994+-0.003), "
        f"CZ {f_cz_pp:.4f} (0.997+-0.003), prep gaps {gap_cnot:.4f}/{gap_cz:.4f}",
    )


def test_criterion_5_qst_close_to_decoherence_limit(
    reference_params, decoherent_library
):
    sampler = ShotSampler(MASTER_SEED)
    dataset, ideal_ket = qst_entangled_pipeline(
        reference_params,
        REFERENCE_COHERENCE,
        sampler,
        library=decoherent_library,
    )
    _, settings = tomography_settings()
    result = mle_density_matrix(dataset.counts[0], settings)
    fid = state_fidelity(result.rho, ideal_ket)
    ok = fid >= 0.98
    _report(
        "criterion 5 (QST entangled state)",
        ok,
        f"fidelity to ideal entangled state {fid:.4f} (>= 0.98)",
    )


def test_criterion_6_schrieffer_wolff_oracle():
    rng = np.random.default_rng(606)
    worst_cap = 0.0
    for _ in range(20):
        q1, q2, c = random_perturbative_capacitive(rng, ratio=0.05)
        params = sw_capacitive(q1, q2, c)
        exact = dressed_spectrum(
            build_capacitive_hamiltonian(q1, q2, c), (3, 3)
        ).zz_shift()
        worst_cap = max(worst_cap, abs(params.lambda_zz - exact) / abs(exact))
    worst_res = 0.0
    for _ in range(20):
        q1, q2, c = random_dispersive_resonator(rng)
        params = sw_resonator(q1, q2, c)
        e = dressed_spectrum(
            build_resonator_hamiltonian(q1, q2, c), (3, 3, c.n_max + 1)
        ).energies
        exact = e[(1, 1, 0)] - e[(1, 0, 0)] - e[(0, 1, 0)] + e[(0, 0, 0)]
        worst_res = max(worst_res, abs(params.lambda_zz - exact) / abs(exact))
    ok = worst_cap <= 0.05 and worst_res <= 0.10
    _report(
        "criterion 6 (Schrieffer-Wolff oracle)",
        ok,
        f"worst capacitive error {worst_cap:.3%} (<= 5%), worst resonator "
        f"error {worst_res:.3%} (<= 10%)",
    )


def test_criterion_7_mle_round_trips():
    _, settings = tomography_settings()
    preps = ideal_prep_states()

    psi = np.array([0.5, 0.5j, -0.5, 0.5], dtype=complex)
    rho_true = projector(psi)
    from zzforge.experiments import cell_probabilities

    state_res = mle_density_matrix(cell_probabilities(rho_true, settings), settings)
    state_dist = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(state_res.rho - rho_true)))

    freqs = qpt_exact_frequencies(QuantumProcess.from_unitary(ideal_cz()))
    ptm_res = mle_ptm(freqs, preps, settings)
    ptm_dev = float(np.max(np.abs(ptm_res.ptm - ptm_of_process(ideal_cz()))))

    sampler = ShotSampler(MASTER_SEED)
    counts = np.zeros_like(freqs)
    for i in range(36):
        for s in range(9):
            counts[i, s] = sampler.rng(i * 9 + s).multinomial(1000, freqs[i, s])
    sampled_res = mle_ptm(counts, preps, settings)
    sampled_fid = average_gate_fidelity(sampled_res.ptm, ptm_of_process(ideal_cz()))

    ok = state_dist < 1e-6 and ptm_dev < 1e-6 and sampled_fid >= 0.995
    _report(
        "criterion 7 (MLE round trips)",
        ok,
        f"state trace distance {state_dist:.2e} (< 1e-6), transfer-matrix "
        f"max deviation {ptm_dev:.2e} (< 1e-6), sampled-CZ fidelity "
        f"{sampled_fid:.4f} (>= 0.995 at seed {MASTER_SEED})",
    )


def test_criterion_8_rb_property_suite(
    reference_params, noiseless_library, decoherent_library
):
    p = reference_params
    sequences = generate_rb_sequences(16, seed=0)
    shape_ok = len(sequences) == 40

    table0 = run_rb(
        "01-11", p, None, None, shots=None, max_pairs=32, library=noiseless_library
    )
    fit0 = fit_decay(table0.m, table0.mean_fidelity)

    # Monotonicity on exact survival probabilities (no shot noise), then a
    # sampled 1000-shot run against the experimental anchor.
    table1 = run_rb(
        "01-11",
        p,
        REFERENCE_COHERENCE,
        None,
        shots=None,
        max_pairs=32,
        library=decoherent_library,
    )
    fit1 = fit_decay(table1.m, table1.mean_fidelity)

    halved = DecoherenceSpec(
        t1=REFERENCE_COHERENCE.t1,
        t2_star=tuple(t / 2 for t in REFERENCE_COHERENCE.t2_star),
    )
    table2 = run_rb("01-11", p, halved, None, shots=None, max_pairs=32)
    fit2 = fit_decay(table2.m, table2.mean_fidelity)

    sampled = run_rb(
        "01-11",
        p,
        REFERENCE_COHERENCE,
        ShotSampler(MASTER_SEED),
        shots=1000,
        max_pairs=32,
        library=decoherent_library,
    )
    fit_s = fit_decay(sampled.m, sampled.mean_fidelity, sampled.stderr)

    f0, f1, f2 = (
        fit0.average_gate_fidelity,
        fit1.average_gate_fidelity,
        fit2.average_gate_fidelity,
    )
    ok = (
        shape_ok
        and f0 >= 0.9999
        and f1 < f0
        and f2 < f1
        and f1 >= 0.991
        and fit_s.average_gate_fidelity >= 0.991
    )
    _report(
        "criterion 8 (RB property suite)",
        ok,
        f"40 sequences, noiseless fidelity {f0:.6f} (>= 0.9999), measured-"
        f"coherence fidelity {f1:.4f} exact / {fit_s.average_gate_fidelity:.4f} "
        f"sampled (>= experimental anchor 0.991), halved-T2* fidelity "
        f"{f2:.4f} (monotone decrease)",
    )


def test_criterion_9_determinism(reference_params, decoherent_library):
    p = reference_params

    a, _ = run_qpt(
        "cz", p, REFERENCE_COHERENCE, ShotSampler(MASTER_SEED),
        library=decoherent_library,
    )
    b, _ = run_qpt(
        "cz", p, REFERENCE_COHERENCE, ShotSampler(MASTER_SEED),
        library=decoherent_library,
    )
    qpt_same = np.array_equal(a.counts, b.counts)

    gate, _ = swipht_cnot_process(p, None, include_idle=False)
    q1 = run_qst(None, gate, ShotSampler(MASTER_SEED))
    q2 = run_qst(None, gate, ShotSampler(MASTER_SEED))
    qst_same = np.array_equal(q1.counts, q2.counts)

    r1 = run_rb("00-10", p, None, ShotSampler(MASTER_SEED), shots=200,
                max_pairs=4, library=TagPulseLibrary(p))
    r2 = run_rb("00-10", p, None, ShotSampler(MASTER_SEED), shots=200,
                max_pairs=4, library=TagPulseLibrary(p))
    rb_same = np.array_equal(r1.mean_fidelity, r2.mean_fidelity)

    ok = qpt_same and qst_same and rb_same
    _report(
        "criterion 9 (determinism)",
        ok,
        f"qpt reproducible: {qpt_same}, qst reproducible: {qst_same}, "
        f"rb reproducible: {rb_same}",
    )
