"""Batch front end: config parsing, workflow dispatch, artifact emission.

The config is a JSON document with unit-suffixed numeric strings
("5.075 GHz", "76.98 us"); frequencies convert to rad/s, times to
seconds. Unknown keys are hard errors. Every emitted JSON artifact embeds
the sha256 of the canonical config and the master seed of sampled
workflows, and files are written atomically, so identical inputs
reproduce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

import numpy as np

from . import device_model, dynamics, estimation, experiments, pulse_design
from .device_model import (
    CalibrationResult,
    CouplingSpec,
    DecoherenceSpec,
    EffectiveZZParams,
    TransmonSpec,
)

TWO_PI = 2.0 * math.pi

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONVERGENCE = 2

COMMANDS = (
    "derive",
    "pulse-tag",
    "pulse-swipht",
    "sim-cz",
    "sim-cnot",
    "rb",
    "qst",
    "qpt",
)


class ParseError(ValueError):
    """Config file is not valid JSON or has a malformed value."""


class ValidationError(ValueError):
    """Config violates the schema; carries every violation found."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


_FREQ_UNITS = {
    "Hz": TWO_PI,
    "kHz": TWO_PI * 1e3,
    "MHz": TWO_PI * 1e6,
    "GHz": TWO_PI * 1e9,
}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}


def parse_quantity(text: str, kind: str) -> float:
    """'5.075 GHz' -> rad/s; '53.8 ns' -> seconds."""
    units = _FREQ_UNITS if kind == "frequency" else _TIME_UNITS
    parts = str(text).split()
    if len(parts) != 2 or parts[1] not in units:
        raise ParseError(
            f"expected '<number> <{'|'.join(units)}>', got {text!r}"
        )
    try:
        value = float(parts[0])
    except ValueError as exc:
        raise ParseError(f"bad numeric value in {text!r}") from exc
    return value * units[parts[1]]


def format_frequency(rad_per_s: float) -> str:
    return f"{rad_per_s / _FREQ_UNITS['GHz']!r} GHz"


@dataclass(frozen=True)
class DeviceConfig:
    topology: str
    levels: int
    transitions: Mapping[str, float] | None  # rad/s
    bare: Mapping[str, float] | None  # rad/s
    sw_guard_factor: float
    n_max: int = 3


@dataclass(frozen=True)
class SimulationConfig:
    swipht_samples: int = 2048
    tag_sample_divisor: int = 400
    include_dressing: bool = True


@dataclass(frozen=True)
class RBConfig:
    pi2_sequences: int = 5
    pi_sequences: int = 8
    max_pairs: int = 16
    truncation_stride: int = 2
    sequence_seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    shots: int = 1000
    seed: int | None = None
    rb: RBConfig = field(default_factory=RBConfig)


@dataclass(frozen=True)
class RunConfig:
    device: DeviceConfig
    coherence: DecoherenceSpec
    simulation: SimulationConfig
    experiment: ExperimentConfig
    output_dir: str
    raw: Mapping[str, Any]

    @property
    def sha256(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


_TRANSITION_KEYS = ("00-10", "00-01", "01-11", "10-11", "10-20", "01-02")
_BARE_KEYS_CAP = ("omega1", "omega2", "alpha1", "alpha2", "g1")
_BARE_KEYS_RES = ("omega1", "omega2", "alpha1", "alpha2", "omega_c", "h1", "h2")


def _check_keys(section: Mapping, allowed: set[str], where: str, errors: list[str]):
    for key in section:
        if key not in allowed:
            errors.append(f"unknown key {where}.{key}")


def _parse_device(section: Mapping, errors: list[str]) -> DeviceConfig | None:
    _check_keys(
        section,
        {"topology", "levels", "transitions", "bare", "sw_guard_factor", "n_max"},
        "device",
        errors,
    )
    topology = section.get("topology", "capacitive")
    if topology not in ("capacitive", "resonator"):
        errors.append(f"device.topology must be capacitive|resonator, got {topology!r}")
    levels = section.get("levels", 3)
    if not isinstance(levels, int) or not 2 <= levels <= 5:
        errors.append("device.levels must be an integer in 2..5")
    has_transitions = "transitions" in section
    has_bare = "bare" in section
    if has_transitions == has_bare:
        errors.append("device needs exactly one of 'transitions' or 'bare'")
        return None
    transitions = None
    bare = None
    if has_transitions:
        if topology == "resonator":
            errors.append("transition calibration is only defined for the capacitive topology")
        t = section["transitions"]
        _check_keys(t, set(_TRANSITION_KEYS), "device.transitions", errors)
        missing = [k for k in _TRANSITION_KEYS if k not in t]
        if missing:
            errors.append(f"device.transitions missing {missing}")
        else:
            try:
                transitions = {k: parse_quantity(t[k], "frequency") for k in _TRANSITION_KEYS}
            except ParseError as exc:
                errors.append(f"device.transitions: {exc}")
    else:
        b = section["bare"]
        keys = _BARE_KEYS_RES if topology == "resonator" else _BARE_KEYS_CAP
        _check_keys(b, set(keys), "device.bare", errors)
        missing = [k for k in keys if k not in b]
        if missing:
            errors.append(f"device.bare missing {missing}")
        else:
            try:
                bare = {k: parse_quantity(b[k], "frequency") for k in keys}
            except ParseError as exc:
                errors.append(f"device.bare: {exc}")
    guard = section.get("sw_guard_factor", 3.0)
    if not isinstance(guard, (int, float)) or guard <= 0:
        errors.append("device.sw_guard_factor must be a positive number")
    n_max = section.get("n_max", 3)
    if not isinstance(n_max, int) or n_max < 1:
        errors.append("device.n_max must be a positive integer")
    if errors:
        return None
    return DeviceConfig(
        topology=topology,
        levels=levels,
        transitions=transitions,
        bare=bare,
        sw_guard_factor=float(guard),
        n_max=int(n_max),
    )


def _parse_coherence(section: Mapping, errors: list[str]) -> DecoherenceSpec | None:
    _check_keys(section, {"t1", "t2_star"}, "coherence", errors)
    try:
        t1 = tuple(parse_quantity(x, "time") for x in section["t1"])
        t2 = tuple(parse_quantity(x, "time") for x in section["t2_star"])
    except (KeyError, TypeError):
        errors.append("coherence needs 't1' and 't2_star' lists of two times")
        return None
    except ParseError as exc:
        errors.append(f"coherence: {exc}")
        return None
    if len(t1) != 2 or len(t2) != 2:
        errors.append("coherence lists must name exactly two qubits")
        return None
    try:
        return DecoherenceSpec(t1=t1, t2_star=t2)
    except ValueError as exc:
        errors.append(f"coherence: {exc}")
        return None


def parse_config(path: str | os.PathLike) -> RunConfig:
    """Load and validate a run configuration.

    Raises ParseError for malformed JSON or quantities and
    ValidationError (listing all violations) for schema breaches.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: Mapping[str, Any]) -> RunConfig:
    errors: list[str] = []
    _check_keys(
        raw,
        {"device", "coherence", "simulation", "experiment", "output_dir"},
        "config",
        errors,
    )
    device = None
    if "device" not in raw:
        errors.append("missing 'device' section")
    else:
        device = _parse_device(raw["device"], errors)
    coherence = None
    if "coherence" not in raw:
        errors.append("missing 'coherence' section")
    else:
        coherence = _parse_coherence(raw["coherence"], errors)

    sim_raw = raw.get("simulation", {})
    _check_keys(
        sim_raw,
        {"swipht_samples", "tag_sample_divisor", "include_dressing"},
        "simulation",
        errors,
    )
    simulation = SimulationConfig(
        swipht_samples=int(sim_raw.get("swipht_samples", 2048)),
        tag_sample_divisor=int(sim_raw.get("tag_sample_divisor", 400)),
        include_dressing=bool(sim_raw.get("include_dressing", True)),
    )
    if simulation.swipht_samples < 512:
        errors.append("simulation.swipht_samples must be >= 512")
    if simulation.tag_sample_divisor < 50:
        errors.append("simulation.tag_sample_divisor must be >= 50")

    exp_raw = raw.get("experiment", {})
    _check_keys(exp_raw, {"shots", "seed", "rb"}, "experiment", errors)
    rb_raw = exp_raw.get("rb", {})
    _check_keys(
        rb_raw,
        {"pi2_sequences", "pi_sequences", "max_pairs", "truncation_stride", "sequence_seed"},
        "experiment.rb",
        errors,
    )
    rb = RBConfig(
        pi2_sequences=int(rb_raw.get("pi2_sequences", 5)),
        pi_sequences=int(rb_raw.get("pi_sequences", 8)),
        max_pairs=int(rb_raw.get("max_pairs", 16)),
        truncation_stride=int(rb_raw.get("truncation_stride", 2)),
        sequence_seed=int(rb_raw.get("sequence_seed", 0)),
    )
    seed = exp_raw.get("seed")
    if seed is not None and (not isinstance(seed, int) or seed < 0):
        errors.append("experiment.seed must be a nonnegative integer")
    shots = exp_raw.get("shots", 1000)
    if not isinstance(shots, int) or shots < 1:
        errors.append("experiment.shots must be a positive integer")
    experiment = ExperimentConfig(shots=shots if isinstance(shots, int) else 1000,
                                  seed=seed, rb=rb)
    output_dir = raw.get("output_dir", "out")

    if errors:
        raise ValidationError(errors)
    assert device is not None and coherence is not None
    return RunConfig(
        device=device,
        coherence=coherence,
        simulation=simulation,
        experiment=experiment,
        output_dir=str(output_dir),
        raw=raw,
    )


def emit_config(config: RunConfig) -> dict:
    """Canonical dict form of a config; parses back to an equal RunConfig."""
    return json.loads(json.dumps(config.raw))


def default_config_path() -> str:
    return str(resources.files("zzforge").joinpath("data/default_config.json"))


def load_default_config() -> RunConfig:
    return parse_config(default_config_path())


# ---------------------------------------------------------------------------
# Device assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeviceBundle:
    q1: TransmonSpec
    q2: TransmonSpec
    coupling: CouplingSpec
    params: EffectiveZZParams
    calibration: CalibrationResult | None


def build_device(config: RunConfig) -> DeviceBundle:
    """Specs and effective parameters for the configured device."""
    dev = config.device
    calibration = None
    if dev.transitions is not None:
        calibration = device_model.calibrate_capacitive(dev.transitions, levels=dev.levels)
        q1, q2, coupling = calibration.q1, calibration.q2, calibration.coupling
    else:
        bare = dev.bare
        assert bare is not None
        q1 = TransmonSpec(omega01=bare["omega1"], anharmonicity=bare["alpha1"], levels=dev.levels)
        q2 = TransmonSpec(omega01=bare["omega2"], anharmonicity=bare["alpha2"], levels=dev.levels)
        if dev.topology == "capacitive":
            coupling = CouplingSpec(topology="capacitive", g1=bare["g1"])
        else:
            coupling = CouplingSpec(
                topology="resonator",
                omega_c=bare["omega_c"],
                h1=bare["h1"],
                h2=bare["h2"],
                n_max=getattr(dev, "n_max", 3),
            )
    params = device_model.effective_params_exact(
        q1, q2, coupling, guard_factor=dev.sw_guard_factor
    )
    return DeviceBundle(q1=q1, q2=q2, coupling=coupling, params=params, calibration=calibration)


# ---------------------------------------------------------------------------
# Artifact serialization
# ---------------------------------------------------------------------------


def matrix_to_json(m: np.ndarray) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def process_to_json(proc: dynamics.QuantumProcess) -> dict:
    if proc.kind == "unitary":
        return {"kind": "unitary", "matrix": matrix_to_json(proc.matrix)}
    return {"kind": "lindblad", "superoperator": matrix_to_json(proc.matrix)}


def dataset_to_json(ds: experiments.TomographyDataset) -> dict:
    return {
        "kind": ds.kind,
        "prep_labels": [list(l) for l in ds.prep_labels],
        "setting_labels": [list(l) for l in ds.setting_labels],
        "counts": ds.counts.tolist(),
        "shots": ds.shots,
        "master_seed": ds.master_seed,
        "meta": {k: v for k, v in ds.meta.items()},
    }


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, payload: dict, config: RunConfig, seed: int | None) -> None:
    payload = dict(payload)
    payload["config_sha256"] = config.sha256
    payload["master_seed"] = seed
    _atomic_write(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


def write_waveform_csv(path: str, wf: pulse_design.PulseWaveform) -> None:
    rows = [
        [repr(float(t)), repr(float(s.real)), repr(float(s.imag))]
        for t, s in zip(wf.times(), wf.samples)
    ]
    write_csv(path, ["time_s", "envelope_re_rad_per_s", "envelope_im_rad_per_s"], rows)


# ---------------------------------------------------------------------------
# Workflows
# ---------------------------------------------------------------------------


def _require_seed(config: RunConfig, override: int | None) -> int:
    seed = override if override is not None else config.experiment.seed
    if seed is None:
        raise ValidationError(["sampled workflows need a master seed (config experiment.seed or --seed)"])
    return seed


def _workflow_derive(config: RunConfig, out: str, args) -> int:
    bundle = build_device(config)
    p = bundle.params
    payload: dict[str, Any] = {
        "topology": config.device.topology,
        "omega1_rad_per_s": p.omega1,
        "omega2_rad_per_s": p.omega2,
        "omega1_ghz": p.omega1 / _FREQ_UNITS["GHz"],
        "omega2_ghz": p.omega2 / _FREQ_UNITS["GHz"],
        "g_z_rad_per_s": p.g_z,
        "g_z_mhz": p.g_z / _FREQ_UNITS["MHz"],
        "eta_rad_per_s": p.eta,
        "lambda_zz_rad_per_s": p.lambda_zz,
        "beta": {f"{j}{a}": v for (j, a), v in sorted(p.beta.items())},
        "bare": {
            "omega1_ghz": bundle.q1.omega01 / _FREQ_UNITS["GHz"],
            "omega2_ghz": bundle.q2.omega01 / _FREQ_UNITS["GHz"],
            "alpha1_mhz": bundle.q1.anharmonicity / _FREQ_UNITS["MHz"],
            "alpha2_mhz": bundle.q2.anharmonicity / _FREQ_UNITS["MHz"],
        },
    }
    try:
        sw = (
            device_model.sw_capacitive(
                bundle.q1, bundle.q2, bundle.coupling, config.device.sw_guard_factor
            )
            if config.device.topology == "capacitive"
            else device_model.sw_resonator(
                bundle.q1, bundle.q2, bundle.coupling, config.device.sw_guard_factor
            )
        )
        payload["perturbative_lambda_zz_mhz"] = sw.lambda_zz / _FREQ_UNITS["MHz"]
    except device_model.NearResonanceError as exc:
        payload["perturbative_lambda_zz_mhz"] = None
        payload["perturbative_note"] = str(exc)
    if config.device.transitions is not None:
        b1, b2 = device_model.zz_branch_values(config.device.transitions)
        payload["zz_branch_mhz"] = [b1 / _FREQ_UNITS["MHz"], b2 / _FREQ_UNITS["MHz"]]
        assert bundle.calibration is not None
        payload["calibration_residuals_khz"] = {
            k: v / _FREQ_UNITS["kHz"] for k, v in bundle.calibration.residuals.items()
        }
    if bundle.coupling.topology == "capacitive" and bundle.coupling.g_table is None:
        payload["bare"]["g1_mhz"] = bundle.coupling.g1 / _FREQ_UNITS["MHz"]
    write_json(os.path.join(out, "derive.json"), payload, config, None)
    return EXIT_OK


def _workflow_pulse_tag(config: RunConfig, out: str, args) -> int:
    bundle = build_device(config)
    theta = {"pi/2": math.pi / 2, "pi": math.pi}[args.angle]
    if args.angle_rad is not None:
        theta = args.angle_rad
    p = pulse_design.solve_tag(bundle.params.g_z, theta)
    wf = pulse_design.tag_waveform(p, p.tau_br / config.simulation.tag_sample_divisor)
    write_waveform_csv(os.path.join(out, "tag_pulse.csv"), wf)
    residuals = pulse_design.tag_condition_residuals(p)
    payload = {
        "theta_rad": p.theta,
        "omega_br_rad_per_s": p.omega_br,
        "tau_br_s": p.tau_br,
        "omega_qr_rad_per_s": p.omega_qr,
        "tau_qr_s": p.tau_qr,
        "total_duration_s": p.total_duration,
        "detuning_rad_per_s": p.detuning,
        "condition_residuals_rad": list(residuals),
        "spectator_phase_rad": pulse_design.tag_spectator_phase(p),
        "sample_period_s": wf.sample_period,
        "samples": len(wf.samples),
    }
    write_json(os.path.join(out, "tag_params.json"), payload, config, None)
    return EXIT_OK


def _workflow_pulse_swipht(config: RunConfig, out: str, args) -> int:
    bundle = build_device(config)
    design = pulse_design.SwiphtDesign(g_z=bundle.params.g_z, carrier=bundle.params.omega2)
    wf = pulse_design.swipht_waveform(design, samples=config.simulation.swipht_samples)
    write_waveform_csv(os.path.join(out, "swipht_pulse.csv"), wf)
    payload = {
        "g_z_rad_per_s": design.g_z,
        "chi_amplitude": design.chi_amplitude,
        "gate_time_s": design.gate_time,
        "gate_time_ns": design.gate_time * 1e9,
        "carrier_rad_per_s": design.carrier,
        "peak_amplitude_rad_per_s": float(np.max(np.abs(wf.samples))),
        "phase_speed_margin": pulse_design.swipht_phase_speed_margin(design),
        "zz_period_s": pulse_design.zz_period(design.g_z),
        "post_gate_idle_s": pulse_design.zz_period(design.g_z) - design.gate_time,
        "samples": len(wf.samples),
    }
    write_json(os.path.join(out, "swipht_params.json"), payload, config, None)
    return EXIT_OK


def _decoherence_or_none(config: RunConfig, flag: str) -> DecoherenceSpec | None:
    return config.coherence if flag == "on" else None


def _workflow_sim_cz(config: RunConfig, out: str, args) -> int:
    bundle = build_device(config)
    dec = _decoherence_or_none(config, args.decoherence)
    proc = dynamics.free_evolution(bundle.params, math.pi / bundle.params.g_z, dec)
    write_json(os.path.join(out, "cz_process.json"), process_to_json(proc), config, None)
    ideal = dynamics.ideal_cz()
    if proc.kind == "unitary":
        fid = estimation.unitary_fidelity(ideal, proc.matrix)
    else:
        fid = estimation.average_gate_fidelity(
            estimation.ptm_of_process(proc), estimation.ptm_of_process(ideal)
        )
    payload = {
        "gate": "cz",
        "gate_time_s": math.pi / bundle.params.g_z,
        "gate_time_ns": math.pi / bundle.params.g_z * 1e9,
        "decoherence": dec is not None,
        "fidelity": fid,
    }
    write_json(os.path.join(out, "cz_report.json"), payload, config, None)
    return EXIT_OK


def _workflow_sim_cnot(config: RunConfig, out: str, args) -> int:
    bundle = build_device(config)
    dec = _decoherence_or_none(config, args.decoherence)
    proc, phi = experiments.swipht_cnot_process(
        bundle.params,
        dec,
        samples=config.simulation.swipht_samples,
        include_dressing=config.simulation.include_dressing,
    )
    write_json(os.path.join(out, "cnot_process.json"), process_to_json(proc), config, None)
    ideal = dynamics.generalized_cnot(phi)
    payload: dict[str, Any] = {
        "gate": "cnot",
        "conditional_phase_rad": phi,
        "decoherence": dec is not None,
        "total_duration_s": pulse_design.zz_period(bundle.params.g_z),
    }
    if proc.kind == "unitary":
        payload["process_fidelity"] = estimation.unitary_fidelity(ideal, proc.matrix)
        payload["block_fidelities"] = estimation.block_unitary_fidelity(
            ideal, proc.matrix, ([0, 1], [2, 3])
        )
    else:
        payload["average_gate_fidelity"] = estimation.average_gate_fidelity(
            estimation.ptm_of_process(proc), estimation.ptm_of_process(ideal)
        )
    if args.model == "threelevel":
        design = pulse_design.SwiphtDesign(g_z=bundle.params.g_z)
        wf = pulse_design.swipht_waveform(design, samples=config.simulation.swipht_samples)
        leak = dynamics.three_level_leakage(
            wf, (bundle.q1, bundle.q2, bundle.coupling), drive_qubit=2
        )
        write_json(os.path.join(out, "cnot_leakage.json"), dict(leak), config, None)
    write_json(os.path.join(out, "cnot_report.json"), payload, config, None)
    return EXIT_OK


def _workflow_rb(config: RunConfig, out: str, args) -> int:
    bundle = build_device(config)
    dec = _decoherence_or_none(config, args.decoherence)
    seed = _require_seed(config, args.seed)
    sampler = experiments.ShotSampler(seed)
    shots = args.shots or config.experiment.shots
    rb_cfg = config.experiment.rb
    table = experiments.run_rb(
        args.transition,
        bundle.params,
        dec,
        sampler,
        shots=shots,
        max_pairs=rb_cfg.max_pairs,
        n_pi2_seqs=rb_cfg.pi2_sequences,
        n_pi_seqs=rb_cfg.pi_sequences,
        truncation_stride=rb_cfg.truncation_stride,
        sequence_seed=rb_cfg.sequence_seed,
    )
    rows = [
        [int(m), repr(float(f)), repr(float(s))]
        for m, f, s in zip(table.m, table.mean_fidelity, table.stderr)
    ]
    write_csv(os.path.join(out, "rb_decay.csv"), ["m", "mean_fidelity", "stderr"], rows)
    fit = estimation.fit_decay(table.m, table.mean_fidelity, table.stderr)
    payload = {
        "transition": args.transition,
        "decoherence": dec is not None,
        "shots": shots,
        "n_sequences": table.n_sequences,
        "amplitude": fit.amplitude,
        "base": fit.base,
        "offset": fit.offset,
        "average_gate_fidelity": fit.average_gate_fidelity,
        "error_per_gate": fit.error_per_gate,
        "residuals": [float(r) for r in fit.residuals],
    }
    write_json(os.path.join(out, "rb_fit.json"), payload, config, seed)
    return EXIT_OK


def _workflow_qst(config: RunConfig, out: str, args) -> int:
    bundle = build_device(config)
    dec = _decoherence_or_none(config, args.decoherence)
    seed = _require_seed(config, args.seed)
    sampler = experiments.ShotSampler(seed)
    shots = args.shots or config.experiment.shots
    dataset, ideal_ket = experiments.qst_entangled_pipeline(
        bundle.params, dec, sampler, shots=shots
    )
    write_json(os.path.join(out, "qst_dataset.json"), dataset_to_json(dataset), config, seed)
    _, settings = experiments.tomography_settings()
    result = estimation.mle_density_matrix(dataset.counts[0], settings)
    if not result.converged:
        return EXIT_CONVERGENCE
    write_json(
        os.path.join(out, "qst_state.json"),
        {"rho": matrix_to_json(result.rho), "iterations": result.iterations},
        config,
        seed,
    )
    payload = {
        "fidelity_to_ideal": estimation.state_fidelity(result.rho, ideal_ket),
        "ideal_state": matrix_to_json(ideal_ket.reshape(1, -1)),
        "decoherence": dec is not None,
        "shots": shots,
    }
    write_json(os.path.join(out, "qst_report.json"), payload, config, seed)
    return EXIT_OK


def _workflow_qpt(config: RunConfig, out: str, args) -> int:
    bundle = build_device(config)
    dec = _decoherence_or_none(config, args.decoherence)
    seed = _require_seed(config, args.seed)
    sampler = experiments.ShotSampler(seed)
    shots = args.shots or config.experiment.shots
    dataset, report = experiments.run_qpt(
        args.gate,
        bundle.params,
        dec,
        sampler,
        shots=shots,
        perfect_prep=args.perfect_prep,
    )
    write_json(os.path.join(out, "qpt_dataset.json"), dataset_to_json(dataset), config, seed)
    _, settings = experiments.tomography_settings()
    result = estimation.mle_ptm(
        dataset.counts, experiments.ideal_prep_states(), settings
    )
    if not result.converged:
        return EXIT_CONVERGENCE
    write_json(
        os.path.join(out, "qpt_ptm.json"),
        {"ptm": matrix_to_json(result.ptm), "iterations": result.iterations},
        config,
        seed,
    )
    ideal_u = report["ideal_unitary"]
    fidelity = estimation.average_gate_fidelity(
        result.ptm, estimation.ptm_of_process(np.asarray(ideal_u))
    )
    payload = {
        "gate": args.gate,
        "average_gate_fidelity": fidelity,
        "ptm_purity": estimation.ptm_purity(result.ptm),
        "decoherence": dec is not None,
        "perfect_prep": args.perfect_prep,
        "shots": shots,
        "ideal_unitary": matrix_to_json(np.asarray(ideal_u)),
    }
    if "conditional_phase" in report:
        payload["conditional_phase_rad"] = report["conditional_phase"]
    write_json(os.path.join(out, "qpt_report.json"), payload, config, seed)
    return EXIT_OK


_WORKFLOWS = {
    "derive": _workflow_derive,
    "pulse-tag": _workflow_pulse_tag,
    "pulse-swipht": _workflow_pulse_swipht,
    "sim-cz": _workflow_sim_cz,
    "sim-cnot": _workflow_sim_cnot,
    "rb": _workflow_rb,
    "qst": _workflow_qst,
    "qpt": _workflow_qpt,
}


def dispatch(command: str, config: RunConfig, args) -> int:
    """Run one workflow; returns the process exit code."""
    if command not in _WORKFLOWS:
        raise ValidationError([f"unknown command {command!r}"])
    out = args.out or config.output_dir
    os.makedirs(out, exist_ok=True)
    return _WORKFLOWS[command](config, out, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zzforge",
        description="Gate design and characterization for two transmons with "
        "strong always-on ZZ coupling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="config JSON (defaults to the bundled device)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--shots", type=int, default=None, help="shots per cell override")
        default_dec = "on" if name in ("rb", "qst", "qpt") else "off"
        p.add_argument("--decoherence", choices=("on", "off"), default=default_dec)
        p.add_argument("--model", choices=("logical4", "threelevel"), default="logical4")
        if name == "pulse-tag":
            p.add_argument("--angle", choices=("pi/2", "pi"), default="pi/2")
            p.add_argument("--angle-rad", type=float, default=None)
        if name == "rb":
            p.add_argument(
                "--transition",
                choices=tuple(experiments.RB_TRANSITIONS),
                default="01-11",
            )
        if name == "qpt":
            p.add_argument("--gate", choices=("cnot", "cz"), required=True)
            p.add_argument("--perfect-prep", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(args.config) if args.config else load_default_config()
        return dispatch(args.command, config, args)
    except (
        dynamics.NotConvergedError,
        pulse_design.NoRootError,
        estimation.FitFailedError,
    ) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ParseError, ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
