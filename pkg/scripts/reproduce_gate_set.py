#!/usr/bin/env python3
"""End-to-end characterization of the bundled reference device.

Derives the effective ZZ model from the measured transition table, designs
the three gates, and runs the full characterization chain (process
tomography of both entangling gates, entangled-state tomography, and
randomized benchmarking of the composite single-qubit gate), printing a
summary table. Takes a few minutes single-threaded.
"""

import argparse
import math
import time

import numpy as np

from zzforge.device_model import REFERENCE_COHERENCE, calibrate_capacitive, effective_params_exact
from zzforge.estimation import (
    average_gate_fidelity,
    fit_decay,
    mle_density_matrix,
    mle_ptm,
    ptm_of_process,
    ptm_purity,
    state_fidelity,
)
from zzforge.experiments import (
    ShotSampler,
    TagPulseLibrary,
    ideal_prep_states,
    qst_entangled_pipeline,
    run_qpt,
    run_rb,
    tomography_settings,
)
from zzforge.pulse_design import cz_gate_time, swipht_gate_time, zz_period

TWO_PI = 2 * math.pi


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=20260809)
    parser.add_argument("--shots", type=int, default=1000)
    parser.add_argument("--rb-pairs", type=int, default=32)
    args = parser.parse_args()

    t_start = time.time()
    cal = calibrate_capacitive()
    params = effective_params_exact(cal.q1, cal.q2, cal.coupling)
    dec = REFERENCE_COHERENCE
    print("== device ==")
    print(f"dressed f1 = {params.omega1 / TWO_PI / 1e9:.6f} GHz")
    print(f"dressed f2 = {params.omega2 / TWO_PI / 1e9:.6f} GHz")
    print(f"g_z/2pi    = {params.g_z / TWO_PI / 1e6:.4f} MHz")
    print(f"CZ time    = {cz_gate_time(params.g_z) * 1e9:.2f} ns")
    print(f"CNOT time  = {swipht_gate_time(params.g_z) * 1e9:.2f} ns "
          f"(+{(zz_period(params.g_z) - swipht_gate_time(params.g_z)) * 1e9:.2f} ns idle)")

    library = TagPulseLibrary(params, dec)
    sampler = ShotSampler(args.seed)
    _, settings = tomography_settings()
    preps = ideal_prep_states()

    print("\n== process tomography (1000 shots/cell, measured coherence) ==")
    for gate in ("cnot", "cz"):
        for perfect in (False, True):
            dataset, report = run_qpt(
                gate, params, dec, sampler, shots=args.shots,
                perfect_prep=perfect, library=library,
            )
            result = mle_ptm(dataset.counts, preps, settings)
            ideal = ptm_of_process(np.asarray(report["ideal_unitary"]))
            fid = average_gate_fidelity(result.ptm, ideal)
            tag = "perfect prep" if perfect else "pulse prep  "
            extra = ""
            if gate == "cnot" and not perfect:
                extra = f", purity {ptm_purity(result.ptm):.4f}"
            print(f"{gate.upper():4s} {tag}: F_avg = {fid:.4f}{extra}")

    print("\n== state tomography of the entangled state ==")
    dataset, ideal_ket = qst_entangled_pipeline(
        params, dec, sampler, shots=args.shots, library=library
    )
    state = mle_density_matrix(dataset.counts[0], settings)
    print(f"fidelity to (e^(-i phi/2)|10> - i|01>)/sqrt(2): "
          f"{state_fidelity(state.rho, ideal_ket):.4f}")

    print("\n== randomized benchmarking (composite single-qubit gates) ==")
    for transition in ("00-10", "01-11", "00-01", "10-11"):
        table = run_rb(
            transition, params, dec, sampler, shots=args.shots,
            max_pairs=args.rb_pairs, library=library,
        )
        fit = fit_decay(table.m, table.mean_fidelity, table.stderr)
        print(f"transition {transition}: fitted gate fidelity "
              f"{fit.average_gate_fidelity:.4f} (decay base {fit.base:.5f})")

    print(f"\ntotal {time.time() - t_start:.0f} s")


if __name__ == "__main__":
    main()
