"""Experiment orchestration: randomized benchmarking, state tomography,
and process tomography on the simulated device.

Single-qubit gates are realized as two-axis composite pulses. Each pulse
leaves a known z-phase on the spectator qubit (the detuned block
accumulates a different scalar phase than the resonant one); the gate
compilation cancels it in software, the usual virtual-z bookkeeping, so a
compiled gate acts as the bare rotation on both transitions. The
generalized CNOT is the SWIPHT pulse followed by an idle that completes a
full ZZ period, plus a software z on the control qubit that fixes its
frame phase.

Pulse sequences keep a running clock: the drive carriers are phase
coherent, so a pulse starting at time t equals the t = 0 pulse conjugated
by a spectator z-phase at the qubit-qubit detuning (every cross-dressing
element rotates at exactly that frequency in the co-rotating frame).
Without this, the weak cross-drive kicks of consecutive gates would add
with artificially aligned phases.

Randomness: every sampled quantity draws from a per-task stream derived
from one master seed, so datasets are reproducible bit for bit and
independent of evaluation order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .device_model import DecoherenceSpec, EffectiveZZParams
from .dynamics import (
    QuantumProcess,
    free_evolution,
    generalized_cnot,
    simulate_gate,
    unitary_superoperator,
)
from .pulse_design import (
    SwiphtDesign,
    swipht_waveform,
    solve_tag,
    tag_waveform,
    zz_period,
)
from .qcore import dagger, projector, tensor

TWO_PI = 2.0 * math.pi

PI2_GATE_LABELS = ("X90", "X90m", "Y90", "Y90m")
PI_GATE_LABELS = ("I+", "I-", "X180", "X180m", "Y180", "Y180m", "Z180", "Z180m")
GATE_LABELS = tuple(sorted(PI2_GATE_LABELS + PI_GATE_LABELS))

#: transition label -> (driven qubit, spectator excited)
RB_TRANSITIONS: Mapping[str, tuple[int, bool]] = {
    "00-10": (1, False),
    "01-11": (1, True),
    "00-01": (2, False),
    "10-11": (2, True),
}


def _rot(axis: str, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if axis == "y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    return np.array([[np.exp(-1j * theta / 2.0), 0], [0, np.exp(1j * theta / 2.0)]])


def ideal_gate(label: str) -> np.ndarray:
    """Ideal 2x2 unitary of an RB gate label."""
    table = {
        "I+": np.exp(-1j * math.pi / 2.0) * np.eye(2, dtype=complex),
        "I-": np.exp(1j * math.pi / 2.0) * np.eye(2, dtype=complex),
        "X90": _rot("x", math.pi / 2),
        "X90m": _rot("x", -math.pi / 2),
        "Y90": _rot("y", math.pi / 2),
        "Y90m": _rot("y", -math.pi / 2),
        "X180": _rot("x", math.pi),
        "X180m": _rot("x", -math.pi),
        "Y180": _rot("y", math.pi),
        "Y180m": _rot("y", -math.pi),
        "Z180": _rot("z", math.pi),
        "Z180m": _rot("z", -math.pi),
    }
    return table[label]


#: physical compilation: gate label -> pulses (theta, drive phase) in time order.
#: A drive phase of -pi/2 turns an x rotation into a y rotation; identity
#: gates are pure bookkeeping and carry no pulse; z gates compile to two
#: pulses since the composite only generates equatorial axes.
_PULSE_COMPILATION: Mapping[str, tuple[tuple[float, float], ...]] = {
    "I+": (),
    "I-": (),
    "X90": ((math.pi / 2, 0.0),),
    "X90m": ((math.pi / 2, math.pi),),
    "Y90": ((math.pi / 2, -math.pi / 2),),
    "Y90m": ((math.pi / 2, math.pi / 2),),
    "X180": ((math.pi, 0.0),),
    "X180m": ((math.pi, math.pi),),
    "Y180": ((math.pi, -math.pi / 2),),
    "Y180m": ((math.pi, math.pi / 2),),
    "Z180": ((math.pi, -math.pi / 2), (math.pi, 0.0)),
    "Z180m": ((math.pi, -math.pi / 2), (math.pi, math.pi)),
}


def worker_count() -> int:
    """Worker cap from ZZFORGE_THREADS; defaults to 1 (fully serial)."""
    try:
        return max(1, int(os.environ.get("ZZFORGE_THREADS", "1")))
    except ValueError:
        return 1


def _run_tasks(fn, items):
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def start_phase_shift(
    params: EffectiveZZParams, drive_qubit: int, start_time: float
) -> np.ndarray:
    """Frame unitary relating a pulse at ``start_time`` to the same pulse
    at time zero.

    In the co-rotating frame only the cross-dressing elements carry an
    explicit time dependence, all at the qubit-qubit detuning, so shifting
    the pulse start is exactly a z-phase on the spectator qubit.
    """
    if drive_qubit == 1:
        theta = (params.omega1 - params.omega2) * start_time
        return np.diag([1.0, np.exp(-1j * theta), 1.0, np.exp(-1j * theta)])
    theta = (params.omega2 - params.omega1) * start_time
    return np.diag([1.0, 1.0, np.exp(-1j * theta), np.exp(-1j * theta)])


def shift_process(
    proc: QuantumProcess,
    params: EffectiveZZParams,
    drive_qubit: int,
    start_time: float,
) -> QuantumProcess:
    """The process of the same pulse started at ``start_time``."""
    if start_time == 0.0:
        return proc
    d = start_phase_shift(params, drive_qubit, start_time)
    if proc.kind == "unitary":
        return QuantumProcess.from_unitary(d @ proc.matrix @ dagger(d), check=False)
    sd = unitary_superoperator(d)
    return QuantumProcess.from_superoperator(
        sd @ proc.matrix @ dagger(sd), check=False
    )


@dataclass(frozen=True)
class ShotSampler:
    """Seed-splitting source of per-task random streams.

    Identical (master seed, task index) pairs always yield identical
    streams, which makes every sampled dataset reproducible regardless of
    evaluation order.
    """

    master_seed: int

    def rng(self, task_index: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(task_index,))
        return np.random.default_rng(seq)


class TagPulseLibrary:
    """Solved, simulated and compiled two-axis pulses for one device.

    Caches one simulated process per (qubit, rotation angle, drive phase,
    decoherence) and the spectator z-phase measured on the noiseless
    unitary, which the compiled gate cancels in software.
    """

    def __init__(
        self,
        params: EffectiveZZParams,
        decoherence: DecoherenceSpec | None = None,
        sample_divisor: int = 400,
        include_dressing: bool = True,
        global_drive_phase: float = 0.0,
    ) -> None:
        self.params = params
        self.decoherence = decoherence
        self.sample_divisor = sample_divisor
        self.include_dressing = include_dressing
        self.global_drive_phase = global_drive_phase
        self._tag_params = {
            theta: solve_tag(params.g_z, theta) for theta in (math.pi / 2, math.pi)
        }
        self._raw: dict[tuple, QuantumProcess] = {}
        self._chi: dict[tuple, float] = {}

    def tag_parameters(self, theta: float):
        return self._tag_params[theta]

    def _waveform(self, theta: float, phase: float):
        p = replace(self._tag_params[theta], phase=phase + self.global_drive_phase)
        return tag_waveform(p, p.tau_br / self.sample_divisor)

    def _noiseless_unitary(self, qubit: int, theta: float, phase: float) -> np.ndarray:
        key = (qubit, theta, phase, False)
        if key not in self._raw:
            wf = self._waveform(theta, phase)
            self._raw[key] = simulate_gate(
                wf,
                drive_qubit=qubit,
                params=self.params,
                include_dressing=self.include_dressing,
            )
        return self._raw[key].matrix

    def spectator_phase(self, qubit: int, theta: float, phase: float) -> float:
        """Measured z-phase on the spectator, from the noiseless unitary."""
        key = (qubit, theta, phase)
        if key not in self._chi:
            u = self._noiseless_unitary(qubit, theta, phase)
            blocks = ([0, 2], [1, 3]) if qubit == 1 else ([0, 1], [2, 3])
            axis_phase = phase + self.global_drive_phase
            ideal = np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * np.array(
                [
                    [0, np.exp(1j * axis_phase)],
                    [np.exp(-1j * axis_phase), 0],
                ]
            )
            c = []
            for idx in blocks:
                blk = u[np.ix_(idx, idx)]
                c.append(complex(np.trace(dagger(ideal) @ blk)) / 2.0)
            self._chi[key] = float(np.angle(c[1] / c[0]))
        return self._chi[key]

    def _correction(self, qubit: int, theta: float, phase: float) -> np.ndarray:
        chi = self.spectator_phase(qubit, theta, phase)
        z = np.exp(-1j * chi)
        if qubit == 1:  # spectator is qubit 2
            return np.diag([1.0, z, 1.0, z])
        return np.diag([1.0, 1.0, z, z])

    def pulse_process(self, qubit: int, theta: float, phase: float) -> QuantumProcess:
        """One compiled pulse: simulated map plus the software z correction."""
        noisy = self.decoherence is not None
        key = (qubit, theta, phase, noisy)
        if key not in self._raw:
            wf = self._waveform(theta, phase)
            self._raw[key] = simulate_gate(
                wf,
                drive_qubit=qubit,
                params=self.params,
                decoherence=self.decoherence,
                include_dressing=self.include_dressing,
            )
        raw = self._raw[key]
        corr = self._correction(qubit, theta, phase)
        if raw.kind == "unitary":
            return QuantumProcess.from_unitary(corr @ raw.matrix)
        return QuantumProcess.from_superoperator(
            unitary_superoperator(corr) @ raw.matrix, check=False
        )

    def identity_process(self) -> QuantumProcess:
        if self.decoherence is None:
            return QuantumProcess.from_unitary(np.eye(4, dtype=complex))
        return QuantumProcess.from_superoperator(np.eye(16, dtype=complex), check=False)

    def pulse_duration(self, theta: float) -> float:
        return self._tag_params[theta].total_duration

    def gate_duration(self, label: str) -> float:
        return sum(self.pulse_duration(theta) for theta, _ in _PULSE_COMPILATION[label])

    def gate_process_at(
        self, label: str, qubit: int, start_time: float = 0.0
    ) -> tuple[QuantumProcess, float]:
        """Compiled RB gate on the sequence clock, and its duration.

        Identity labels are zero-duration no-ops; multi-pulse gates advance
        the clock between their pulses.
        """
        pulses = _PULSE_COMPILATION[label]
        if not pulses:
            return self.identity_process(), 0.0
        proc: QuantumProcess | None = None
        t = start_time
        for theta, phase in pulses:
            shifted = shift_process(
                self.pulse_process(qubit, theta, phase), self.params, qubit, t
            )
            proc = shifted if proc is None else proc.then(shifted)
            t += self.pulse_duration(theta)
        return proc, t - start_time

    def gate_process(self, label: str, qubit: int) -> QuantumProcess:
        """Compiled RB gate referenced to time zero."""
        return self.gate_process_at(label, qubit, 0.0)[0]

    def prefetch(self, qubit: int, labels: Sequence[str]) -> None:
        """Simulate the pulses of the given labels, possibly in parallel."""
        keys = []
        for label in labels:
            for theta, phase in _PULSE_COMPILATION[label]:
                if (qubit, theta, phase) not in keys:
                    keys.append((qubit, theta, phase))
        _run_tasks(lambda k: self.pulse_process(*k), keys)


# ---------------------------------------------------------------------------
# Randomized benchmarking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RBSequence:
    """One interleaved pi/2-pi gate sequence with its recovery gates."""

    pairs: tuple[tuple[str, str], ...]
    truncations: tuple[int, ...]
    recovery: Mapping[int, tuple[str, ...]]
    seed: int
    index: int

    def gates_at(self, m: int) -> tuple[str, ...]:
        head: list[str] = []
        for pi2, pi in self.pairs[:m]:
            head.extend((pi2, pi))
        return tuple(head) + self.recovery[m]


def _ideal_sequence_state(gates: Sequence[str]) -> np.ndarray:
    v = np.array([1.0, 0.0], dtype=complex)
    for g in gates:
        v = ideal_gate(g) @ v
    return v


def _recovery_gates(state: np.ndarray) -> tuple[str, ...]:
    """Shortest composition (at most two gates) returning to the ground
    state; ties broken lexicographically."""
    ground = np.array([1.0, 0.0], dtype=complex)
    for combo in [(g,) for g in GATE_LABELS] + [
        (a, b) for a in GATE_LABELS for b in GATE_LABELS
    ]:
        v = state
        for g in combo:
            v = ideal_gate(g) @ v
        if abs(np.vdot(ground, v)) ** 2 > 1.0 - 1e-9:
            return combo
    raise RuntimeError("no recovery composition found")  # unreachable


def generate_rb_sequences(
    max_pairs: int,
    n_pi2_seqs: int = 5,
    n_pi_seqs: int = 8,
    truncation_stride: int = 2,
    seed: int = 0,
) -> list[RBSequence]:
    """Interleave random pi/2 and pi gate streams into benchmark sequences.

    Every pi/2 stream is paired with every pi stream (the default 5 x 8
    gives 40 sequences). Each sequence is truncated every
    ``truncation_stride`` pairs and a recovery composition targeting the
    ground state is attached per truncation.
    """
    if n_pi2_seqs < 1 or n_pi_seqs < 1 or max_pairs < 1:
        raise ValueError("sequence counts and length must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    pi2_streams = [
        [PI2_GATE_LABELS[k] for k in rng.integers(0, len(PI2_GATE_LABELS), max_pairs)]
        for _ in range(n_pi2_seqs)
    ]
    pi_streams = [
        [PI_GATE_LABELS[k] for k in rng.integers(0, len(PI_GATE_LABELS), max_pairs)]
        for _ in range(n_pi_seqs)
    ]
    truncations = tuple(range(truncation_stride, max_pairs + 1, truncation_stride))
    if not truncations:
        raise ValueError("no truncation points; increase max_pairs")
    sequences = []
    index = 0
    for i in range(n_pi2_seqs):
        for j in range(n_pi_seqs):
            pairs = tuple(zip(pi2_streams[i], pi_streams[j]))
            recovery: dict[int, tuple[str, ...]] = {}
            for m in truncations:
                head: list[str] = []
                for pi2, pi in pairs[:m]:
                    head.extend((pi2, pi))
                recovery[m] = _recovery_gates(_ideal_sequence_state(head))
            sequences.append(
                RBSequence(
                    pairs=pairs,
                    truncations=truncations,
                    recovery=recovery,
                    seed=seed,
                    index=index,
                )
            )
            index += 1
    return sequences


@dataclass(frozen=True)
class RBDecayTable:
    transition: str
    m: np.ndarray
    mean_fidelity: np.ndarray
    stderr: np.ndarray
    n_sequences: int
    shots: int | None
    master_seed: int | None


def run_rb(
    transition: str,
    params: EffectiveZZParams,
    decoherence: DecoherenceSpec | None = None,
    sampler: ShotSampler | None = None,
    shots: int | None = 1000,
    max_pairs: int = 16,
    n_pi2_seqs: int = 5,
    n_pi_seqs: int = 8,
    truncation_stride: int = 2,
    sequence_seed: int = 0,
    library: TagPulseLibrary | None = None,
) -> RBDecayTable:
    """Benchmark the composite single-qubit gate on one transition.

    The spectator qubit starts in the state selecting the transition and
    the driven qubit in its ground state; the survival probability is the
    driven qubit's ground population, estimated from sampled shots unless
    ``shots`` is None (exact probabilities).
    """
    if transition not in RB_TRANSITIONS:
        raise ValueError(f"unknown transition {transition!r}")
    if shots is not None and sampler is None:
        raise ValueError("sampled benchmarking needs a ShotSampler")
    qubit, spectator_excited = RB_TRANSITIONS[transition]
    if library is None:
        library = TagPulseLibrary(params, decoherence)
    library.prefetch(qubit, GATE_LABELS)

    sequences = generate_rb_sequences(
        max_pairs,
        n_pi2_seqs=n_pi2_seqs,
        n_pi_seqs=n_pi_seqs,
        truncation_stride=truncation_stride,
        seed=sequence_seed,
    )
    if qubit == 1:
        init_index = 1 if spectator_excited else 0
        ground_indices = (0, 1)
    else:
        init_index = 2 if spectator_excited else 0
        ground_indices = (0, 2)
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[init_index, init_index] = 1.0

    truncations = sequences[0].truncations
    survival = np.zeros((len(sequences), len(truncations)))
    for si, seq in enumerate(sequences):
        for ti, m in enumerate(truncations):
            proc = None
            clock = 0.0
            for g in seq.gates_at(m):
                gp, duration = library.gate_process_at(g, qubit, clock)
                clock += duration
                proc = gp if proc is None else proc.then(gp)
            rho = rho0 if proc is None else proc.apply(rho0)
            p = float(np.real(sum(rho[i, i] for i in ground_indices)))
            p = min(max(p, 0.0), 1.0)
            if shots is None:
                survival[si, ti] = p
            else:
                rng = sampler.rng(seq.index * len(truncations) + ti)
                survival[si, ti] = rng.binomial(shots, p) / shots
    mean = survival.mean(axis=0)
    stderr = survival.std(axis=0, ddof=1) / math.sqrt(len(sequences))
    return RBDecayTable(
        transition=transition,
        m=np.array(truncations),
        mean_fidelity=mean,
        stderr=stderr,
        n_sequences=len(sequences),
        shots=shots,
        master_seed=sampler.master_seed if sampler is not None else None,
    )


# ---------------------------------------------------------------------------
# Tomography
# ---------------------------------------------------------------------------

_SINGLE_PREP: Mapping[str, tuple[tuple[str, ...], np.ndarray]] = {
    "+x": (("Y90",), np.array([1, 1]) / math.sqrt(2)),
    "-x": (("Y90m",), np.array([1, -1]) / math.sqrt(2)),
    "+y": (("X90m",), np.array([1, 1j]) / math.sqrt(2)),
    "-y": (("X90",), np.array([1, -1j]) / math.sqrt(2)),
    "+z": ((), np.array([1, 0], dtype=complex)),
    "-z": (("X180",), np.array([0, 1], dtype=complex)),
}

PREP_LABELS_1Q = ("+x", "-x", "+y", "-y", "+z", "-z")


@dataclass(frozen=True)
class PrepCircuit:
    label: tuple[str, str]
    gates_q1: tuple[str, ...]
    gates_q2: tuple[str, ...]
    ideal_ket: np.ndarray


def prepare_input_states() -> list[PrepCircuit]:
    """The 36 product input states used by process tomography.

    Each qubit is steered to one of the six cardinal states by at most one
    compiled pulse; ideal target kets are attached for oracles.
    """
    preps = []
    for l1 in PREP_LABELS_1Q:
        for l2 in PREP_LABELS_1Q:
            g1, k1 = _SINGLE_PREP[l1]
            g2, k2 = _SINGLE_PREP[l2]
            preps.append(
                PrepCircuit(
                    label=(l1, l2),
                    gates_q1=g1,
                    gates_q2=g2,
                    ideal_ket=np.kron(k1, k2).astype(complex),
                )
            )
    return preps


def tomography_settings() -> tuple[tuple[tuple[str, str], ...], list[np.ndarray]]:
    """Nine informationally complete joint rotation settings.

    Per qubit: identity, x pi/2 and y pi/2 before a joint z-basis readout
    of both qubits.
    """
    singles = {
        "I": np.eye(2, dtype=complex),
        "X90": _rot("x", math.pi / 2),
        "Y90": _rot("y", math.pi / 2),
    }
    labels = []
    mats = []
    for a in ("I", "X90", "Y90"):
        for b in ("I", "X90", "Y90"):
            labels.append((a, b))
            mats.append(tensor(singles[a], singles[b]))
    return tuple(labels), mats


@dataclass(frozen=True, eq=False)
class TomographyDataset:
    """Outcome counts of a tomography run, with full sampling metadata."""

    kind: str  # "qst" | "qpt"
    prep_labels: tuple
    setting_labels: tuple
    counts: np.ndarray  # (n_prep, n_setting, 4) integers
    shots: int
    master_seed: int
    meta: Mapping[str, object] = field(default_factory=dict)


def prep_process_timed(
    circuit: PrepCircuit,
    library: TagPulseLibrary | None,
    perfect: bool = False,
) -> tuple[QuantumProcess, float]:
    """Compiled preparation map for one labeled input state, with duration.

    Perfect preparation applies the ideal unitaries in zero time;
    otherwise the qubit-1 pulses run first, then the qubit-2 ones, each
    with its software spectator correction, on a shared sequence clock.
    """
    if perfect:
        u1 = np.eye(2, dtype=complex)
        for g in circuit.gates_q1:
            u1 = ideal_gate(g) @ u1
        u2 = np.eye(2, dtype=complex)
        for g in circuit.gates_q2:
            u2 = ideal_gate(g) @ u2
        return QuantumProcess.from_unitary(tensor(u1, u2)), 0.0
    if library is None:
        raise ValueError("pulse preparation needs a TagPulseLibrary")
    proc: QuantumProcess | None = None
    clock = 0.0
    for qubit, gates in ((1, circuit.gates_q1), (2, circuit.gates_q2)):
        for g in gates:
            gp, duration = library.gate_process_at(g, qubit, clock)
            clock += duration
            proc = gp if proc is None else proc.then(gp)
    if proc is None:
        return library.identity_process(), 0.0
    return proc, clock


def prep_process(
    circuit: PrepCircuit,
    library: TagPulseLibrary | None,
    perfect: bool = False,
) -> QuantumProcess:
    """Compiled preparation map for one labeled input state."""
    return prep_process_timed(circuit, library, perfect)[0]


def cell_probabilities(rho: np.ndarray, settings: Sequence[np.ndarray]) -> np.ndarray:
    """Exact outcome probabilities diag(S rho S^dag) for every setting."""
    out = np.zeros((len(settings), rho.shape[0]))
    for s, u in enumerate(settings):
        out[s] = np.clip(np.real(np.diag(u @ rho @ dagger(u))), 0.0, None)
        out[s] /= out[s].sum()
    return out


def run_qst(
    state_prep: QuantumProcess | None,
    process: QuantumProcess,
    sampler: ShotSampler,
    settings: tuple[tuple, list[np.ndarray]] | None = None,
    shots: int = 1000,
    meta: Mapping[str, object] | None = None,
) -> TomographyDataset:
    """State tomography of ``process`` applied to the prepared state.

    Both qubits are read out jointly (four outcomes per shot) after each
    rotation setting; the default set is informationally complete.
    """
    labels, settings = tomography_settings() if settings is None else settings
    rho = projector(np.array([1, 0, 0, 0], dtype=complex))
    if state_prep is not None:
        rho = state_prep.apply(rho)
    rho = process.apply(rho)
    probs = cell_probabilities(rho, settings)
    counts = np.zeros((1, len(settings), 4), dtype=int)
    for s in range(len(settings)):
        counts[0, s] = sampler.rng(s).multinomial(shots, probs[s])
    return TomographyDataset(
        kind="qst",
        prep_labels=(("prep",),),
        setting_labels=labels,
        counts=counts,
        shots=shots,
        master_seed=sampler.master_seed,
        meta=dict(meta or {}),
    )


def swipht_cnot_process(
    params: EffectiveZZParams,
    decoherence: DecoherenceSpec | None = None,
    samples: int = 2048,
    include_idle: bool = True,
    include_dressing: bool = True,
) -> tuple[QuantumProcess, float]:
    """The compiled generalized CNOT and its fitted conditional phase.

    The SWIPHT pulse targets qubit 2; an idle pads the total duration to a
    full ZZ period (dropped for state tomography, where no residual ZZ
    phase builds up on the populated states). A software z on the control
    qubit, fixed on the noiseless unitary, aligns the gate with the
    canonical generalized-CNOT form.
    """
    design = SwiphtDesign(g_z=params.g_z)
    wf = swipht_waveform(design, samples=samples)
    idle_time = zz_period(params.g_z) - design.gate_time if include_idle else 0.0

    u0 = simulate_gate(
        wf, drive_qubit=2, params=params, include_dressing=include_dressing
    ).matrix
    if idle_time > 0:
        u0 = free_evolution(params, idle_time).matrix @ u0
    target0 = np.array([[0, -1j], [-1j, 0]], dtype=complex)
    c0 = complex(np.trace(dagger(target0) @ u0[np.ix_([0, 1], [0, 1])])) / 2.0
    u_n = u0 / (c0 / abs(c0))
    gamma = 0.5 * (np.angle(u_n[2, 2]) + np.angle(u_n[3, 3]))
    corr = np.diag([1.0, 1.0, np.exp(-1j * gamma), np.exp(-1j * gamma)])
    u_corr = corr @ u_n
    phi = float(np.angle(u_corr[3, 3] / u_corr[2, 2]))

    if decoherence is None:
        return QuantumProcess.from_unitary(corr @ u0), phi
    s = simulate_gate(
        wf,
        drive_qubit=2,
        params=params,
        decoherence=decoherence,
        include_dressing=include_dressing,
    ).matrix
    if idle_time > 0:
        s = free_evolution(params, idle_time, decoherence).superoperator() @ s
    s = unitary_superoperator(corr) @ s
    return QuantumProcess.from_superoperator(s, check=False), phi


def qst_entangled_pipeline(
    params: EffectiveZZParams,
    decoherence: DecoherenceSpec | None,
    sampler: ShotSampler,
    shots: int = 1000,
    perfect_prep: bool = False,
    library: TagPulseLibrary | None = None,
) -> tuple[TomographyDataset, np.ndarray]:
    """Entangled-state tomography: y pi/2 on the control, then the CNOT.

    Returns the dataset and the ideal target state (the noiseless pipeline
    applied to the ideal preparation), whose form is
    (e^{-i phi/2}|10> - i|01>)/sqrt(2).
    """
    if library is None and not perfect_prep:
        library = TagPulseLibrary(params, decoherence)
    gate, _phi = swipht_cnot_process(
        params, decoherence, include_idle=False
    )
    gate_ideal, _ = swipht_cnot_process(params, None, include_idle=False)
    if perfect_prep:
        prep = QuantumProcess.from_unitary(tensor(ideal_gate("Y90"), np.eye(2)))
        prep_time = 0.0
    else:
        prep, prep_time = library.gate_process_at("Y90", 1, 0.0)
    gate = shift_process(gate, params, 2, prep_time)
    ideal_in = tensor(ideal_gate("Y90"), np.eye(2)) @ np.array([1, 0, 0, 0], dtype=complex)
    ideal_ket = shift_process(gate_ideal, params, 2, prep_time).matrix @ ideal_in
    dataset = run_qst(
        prep,
        gate,
        sampler,
        shots=shots,
        meta={"pipeline": "qst-entangled", "perfect_prep": perfect_prep},
    )
    return dataset, ideal_ket


def run_qpt(
    gate: str,
    params: EffectiveZZParams,
    decoherence: DecoherenceSpec | None = None,
    sampler: ShotSampler | None = None,
    shots: int = 1000,
    perfect_prep: bool = False,
    library: TagPulseLibrary | None = None,
) -> tuple[TomographyDataset, dict[str, object]]:
    """Process tomography of the generalized CNOT or the free-evolution CZ.

    Loops the 36 product input states; the CNOT appends an idle completing
    a full ZZ period, the CZ is bare free evolution for half a period.
    Returns the dataset and a report with the ideal comparison unitary.
    """
    if gate not in ("cnot", "cz"):
        raise ValueError("gate must be 'cnot' or 'cz'")
    if sampler is None:
        raise ValueError("process tomography needs a ShotSampler")
    if library is None and not perfect_prep:
        library = TagPulseLibrary(params, decoherence)

    if gate == "cnot":
        process, phi = swipht_cnot_process(params, decoherence)
        ideal_u = generalized_cnot(phi)
        report: dict[str, object] = {"gate": "cnot", "conditional_phase": phi}
    else:
        process = free_evolution(params, math.pi / params.g_z, decoherence)
        ideal_u = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
        report = {"gate": "cz"}
    report["ideal_unitary"] = ideal_u

    preps = prepare_input_states()
    labels, settings = tomography_settings()
    if not perfect_prep:
        library.prefetch(1, ("X90", "X90m", "Y90", "Y90m", "X180"))
        library.prefetch(2, ("X90", "X90m", "Y90", "Y90m", "X180"))
    rho00 = projector(np.array([1, 0, 0, 0], dtype=complex))
    counts = np.zeros((len(preps), len(settings), 4), dtype=int)
    for i, prep in enumerate(preps):
        pp, prep_time = prep_process_timed(prep, library, perfect=perfect_prep)
        gate_proc = process
        if gate == "cnot":
            gate_proc = shift_process(process, params, 2, prep_time)
        rho = gate_proc.apply(pp.apply(rho00))
        probs = cell_probabilities(rho, settings)
        for s in range(len(settings)):
            rng = sampler.rng(i * len(settings) + s)
            counts[i, s] = rng.multinomial(shots, probs[s])
    dataset = TomographyDataset(
        kind="qpt",
        prep_labels=tuple(p.label for p in preps),
        setting_labels=labels,
        counts=counts,
        shots=shots,
        master_seed=sampler.master_seed,
        meta={"gate": gate, "perfect_prep": perfect_prep,
              "decoherence": decoherence is not None},
    )
    return dataset, report


def qpt_exact_frequencies(
    process: QuantumProcess,
    perfect_prep: bool = True,
    library: TagPulseLibrary | None = None,
) -> np.ndarray:
    """Infinite-shot outcome frequencies of the process-tomography loop."""
    preps = prepare_input_states()
    _labels, settings = tomography_settings()
    rho00 = projector(np.array([1, 0, 0, 0], dtype=complex))
    freqs = np.zeros((len(preps), len(settings), 4))
    for i, prep in enumerate(preps):
        pp = prep_process(prep, library, perfect=perfect_prep)
        rho = process.apply(pp.apply(rho00))
        freqs[i] = cell_probabilities(rho, settings)
    return freqs


def ideal_prep_states() -> list[np.ndarray]:
    """Density matrices of the 36 ideal input states (reconstruction model)."""
    return [projector(p.ideal_ket) for p in prepare_input_states()]
