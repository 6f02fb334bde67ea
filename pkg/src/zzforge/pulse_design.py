"""Gate pulse synthesis: two-axis composite pulses, free-evolution CZ timing,
and the SWIPHT shaped pulse.

The two-axis gate (TAG) is a three-part square composite, BR-QR-BR, that
rotates one qubit by a target angle about an equatorial axis regardless of
the other qubit's state, despite the always-on ZZ shift g_z. The SWIPHT
pulse drives a pi rotation on the target transition while steering the
g_z-detuned harmful transition through a trivial cyclic evolution, which is
what makes the generalized CNOT fast.

Conventions: a complex envelope sample s with |s| = Omega drives the
resonant transition at Rabi rate Omega (a pi pulse takes pi/Omega); the
detuned transition of the pair sits g_z above the drive and sees the
rotation vector (Omega, 0, g_z)/2 in the rotating frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

#: Shape coefficients of the quartic SWIPHT phase polynomial. Together they
#: satisfy the cyclic-evolution boundary conditions and keep the phase-speed
#: constraint |chi_dot| <= g_z/2 with margin.
SWIPHT_CHI_AMPLITUDE = 138.9
SWIPHT_TIME_FACTOR = 5.87


class NoRootError(RuntimeError):
    """Raised when the TAG amplitude search finds no root in its bracket."""


class ConstraintViolatedError(ValueError):
    """Raised when |chi_dot| exceeds g_z/2 somewhere on the grid."""


class SingularChiError(ValueError):
    """Raised when 2*chi hits a multiple of pi (cotangent pole)."""


@dataclass(frozen=True)
class TagParams:
    """Solved parameters of one two-axis composite pulse.

    The four calibration conditions are
      C1: sqrt(omega_br^2 + detuning^2) * tau_br = pi
      C2: arctan(detuning/omega_qr) = 2 arctan(detuning/omega_br)
      C3: sqrt(omega_qr^2 + detuning^2) * tau_qr = theta
      C4: 2 omega_br tau_br + omega_qr tau_qr = theta (mod 2 pi)
    C1/C2 make each BR segment a pi rotation of the detuned Bloch sphere
    about the bisector axis, C3 the QR segment a theta rotation about the
    mapped axis, and C4 closes the rotation on the resonant transition.
    """

    omega_br: float
    tau_br: float
    omega_qr: float
    tau_qr: float
    detuning: float
    theta: float
    carrier: float = 0.0
    phase: float = 0.0

    @property
    def total_duration(self) -> float:
        return 2.0 * self.tau_br + self.tau_qr


@dataclass(frozen=True, eq=False)
class PulseWaveform:
    """Zero-order-hold sampled complex drive envelope (rad/s).

    ``carrier`` is the absolute drive frequency in rad/s; 0.0 means
    "resonant with the addressed transition" and is resolved by the
    simulator.
    """

    sample_period: float
    samples: np.ndarray
    carrier: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))
        if self.sample_period <= 0:
            raise ValueError("sample period must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("envelope samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) * self.sample_period

    def times(self) -> np.ndarray:
        """Midpoint time of each sample."""
        return (np.arange(len(self.samples)) + 0.5) * self.sample_period

    def envelope_at(self, t: float) -> complex:
        idx = min(int(t / self.sample_period), len(self.samples) - 1)
        return complex(self.samples[max(idx, 0)])


@dataclass(frozen=True)
class SwiphtDesign:
    """SWIPHT pulse family for a given ZZ rate.

    ``chi_amplitude`` scales the quartic phase polynomial and ``gate_time``
    defaults to 5.87/g_z; overriding either leaves the boundary conditions
    intact but may break the phase-speed constraint, which the waveform
    builder re-checks.
    """

    g_z: float
    chi_amplitude: float = SWIPHT_CHI_AMPLITUDE
    gate_time: float = 0.0
    carrier: float = 0.0

    def __post_init__(self) -> None:
        if self.g_z <= 0:
            raise ValueError("g_z must be positive")
        if self.gate_time == 0.0:
            object.__setattr__(self, "gate_time", SWIPHT_TIME_FACTOR / self.g_z)
        if self.gate_time <= 0:
            raise ValueError("gate time must be positive")


def _wrap_angle(x: float) -> float:
    """Wrap to (-pi, pi]."""
    y = math.fmod(x + math.pi, TWO_PI)
    if y <= 0:
        y += TWO_PI
    return y - math.pi


def _tag_from_amplitude(omega_br: float, g_z: float, theta: float) -> tuple[float, float, float]:
    """Eliminate tau_br, omega_qr, tau_qr through C1-C3."""
    phi = math.atan2(g_z, omega_br)
    tau_br = math.pi / math.hypot(omega_br, g_z)
    omega_qr = g_z / math.tan(2.0 * phi)
    tau_qr = theta / math.hypot(omega_qr, g_z)
    return tau_br, omega_qr, tau_qr


def _c4_residual(omega_br: float, g_z: float, theta: float) -> float:
    tau_br, omega_qr, tau_qr = _tag_from_amplitude(omega_br, g_z, theta)
    return _wrap_angle(2.0 * omega_br * tau_br + omega_qr * tau_qr - theta)


def solve_tag(g_z: float, theta: float, branch_sign: int = 1) -> TagParams:
    """Solve the two-axis composite for a target rotation angle.

    One-dimensional bracketed bisection in the BR amplitude over
    [g_z/50, 50 g_z], with the other three parameters eliminated through
    C1-C3; of the bracketed roots the one with the smallest total duration
    is returned. ``branch_sign`` selects the sign convention of the detuned
    transition (+1: the spectator-excited transition sits above the drive);
    the solved magnitudes are identical for both branches.

    Raises
    ------
    NoRootError
        If no sign change of the C4 residual exists in the scanned bracket.
    """
    if g_z <= 0:
        raise ValueError("g_z must be positive")
    if not 0 < theta <= math.pi:
        raise ValueError("target angle must lie in (0, pi]")
    if branch_sign not in (-1, 1):
        raise ValueError("branch_sign must be +1 or -1")

    lo, hi = g_z / 50.0, 50.0 * g_z
    grid = np.geomspace(lo, hi, 4001)
    vals = np.array([_c4_residual(x, g_z, theta) for x in grid])
    roots: list[float] = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(float(a))
            continue
        # A sign change across the branch cut of the wrapped angle is a
        # 2*pi jump, not a root; genuine crossings stay well inside (-pi, pi).
        if fa * fb < 0 and abs(fa - fb) < math.pi:
            x0, x1, f0 = float(a), float(b), float(fa)
            while (x1 - x0) > 1e-12 * x1:
                mid = 0.5 * (x0 + x1)
                fm = _c4_residual(mid, g_z, theta)
                if fm == 0.0:
                    x0 = x1 = mid
                    break
                if f0 * fm < 0:
                    x1 = mid
                else:
                    x0, f0 = mid, fm
            roots.append(0.5 * (x0 + x1))
    if not roots:
        raise NoRootError(
            f"no two-axis solution for theta={theta:.6f} in the amplitude "
            f"bracket [{lo:.4e}, {hi:.4e}] rad/s"
        )

    def duration(omega_br: float) -> float:
        tau_br, _, tau_qr = _tag_from_amplitude(omega_br, g_z, theta)
        return 2.0 * tau_br + tau_qr

    best = min(roots, key=duration)
    tau_br, omega_qr, tau_qr = _tag_from_amplitude(best, g_z, theta)
    return TagParams(
        omega_br=best,
        tau_br=tau_br,
        omega_qr=omega_qr,
        tau_qr=tau_qr,
        detuning=branch_sign * g_z,
        theta=theta,
    )


def tag_condition_residuals(p: TagParams) -> tuple[float, float, float, float]:
    """Residuals of the four calibration conditions, in radians."""
    g = abs(p.detuning)
    c1 = math.hypot(p.omega_br, g) * p.tau_br - math.pi
    c2 = math.atan2(g, p.omega_qr) - 2.0 * math.atan2(g, p.omega_br)
    c3 = math.hypot(p.omega_qr, g) * p.tau_qr - p.theta
    c4 = _wrap_angle(2.0 * p.omega_br * p.tau_br + p.omega_qr * p.tau_qr - p.theta)
    return c1, c2, c3, c4


def tag_resonant_rotation(p: TagParams) -> float:
    """Total rotation angle accumulated on the resonant transition."""
    return 2.0 * p.omega_br * p.tau_br + p.omega_qr * p.tau_qr


def tag_spectator_phase(p: TagParams) -> float:
    """Residual phase on the spectator-excited block, relative to the
    spectator-ground block, in (-pi, pi].

    The composite acts as X(theta) on both transitions; the detuned block
    additionally carries the phase pi - g_z*T/2 - k*pi, where k counts the
    extra full turns of the resonant-block rotation. This by-product is a
    pure z-phase on the spectator qubit and is compensated in software
    (virtual z) by the experiment layer.
    """
    g = abs(p.detuning)
    k = round((tag_resonant_rotation(p) - p.theta) / TWO_PI)
    return _wrap_angle(math.pi - g * p.total_duration / 2.0 - k * math.pi)


def tag_waveform(p: TagParams, sample_period: float) -> PulseWaveform:
    """Piecewise-constant BR-QR-BR envelope with ideal square edges.

    Samples take the envelope value at their midpoint, so the segment
    boundaries are quantized to at most half a sample period.
    """
    if sample_period > p.tau_br / 50.0:
        raise ValueError("sample period must be at most tau_br/50")
    n = round(p.total_duration / sample_period)
    t_mid = (np.arange(n) + 0.5) * sample_period
    env = np.where(
        (t_mid < p.tau_br) | (t_mid >= p.tau_br + p.tau_qr), p.omega_br, p.omega_qr
    ).astype(complex)
    env *= np.exp(1j * p.phase)
    return PulseWaveform(sample_period=sample_period, samples=env, carrier=p.carrier)


def cz_gate_time(g_z: float) -> float:
    """Free-evolution time after which the ZZ phase on |11> reaches pi."""
    if g_z <= 0:
        raise ValueError("g_z must be positive")
    return math.pi / g_z


def zz_period(g_z: float) -> float:
    """Full period of the ZZ interaction, 2*pi/g_z."""
    if g_z <= 0:
        raise ValueError("g_z must be positive")
    return TWO_PI / g_z


def swipht_chi(t: float | np.ndarray, d: SwiphtDesign) -> float | np.ndarray:
    """Quartic phase polynomial chi(t) = A (t/tg)^4 (1 - t/tg)^4 + pi/4."""
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-15) or np.any(t > d.gate_time * (1 + 1e-15)):
        raise ValueError("t must lie within [0, gate_time]")
    s = t / d.gate_time
    out = d.chi_amplitude * s**4 * (1 - s) ** 4 + math.pi / 4.0
    return float(out) if out.ndim == 0 else out


def swipht_chi_derivatives(
    t: float | np.ndarray, d: SwiphtDesign
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(chi, chi_dot, chi_ddot) evaluated analytically.

    The envelope formula divides by quantities that vanish at the pulse
    edges, so finite differences are not an option here.
    """
    t = np.asarray(t, dtype=float)
    s = t / d.gate_time
    a = d.chi_amplitude
    chi = a * s**4 * (1 - s) ** 4 + math.pi / 4.0
    dot = (4.0 * a / d.gate_time) * s**3 * (1 - s) ** 3 * (1 - 2 * s)
    ddot = (4.0 * a / d.gate_time**2) * (
        3.0 * s**2 * (1 - s) ** 2 * (1 - 2 * s) ** 2 - 2.0 * s**3 * (1 - s) ** 3
    )
    return chi, dot, ddot


def swipht_envelope(t: float | np.ndarray, d: SwiphtDesign) -> np.ndarray:
    """Real SWIPHT drive amplitude at time t.

    Omega = chi_ddot / sqrt(g_z^2/4 - chi_dot^2)
            - 2 sqrt(g_z^2/4 - chi_dot^2) * cot(2 chi)
    """
    chi, dot, ddot = swipht_chi_derivatives(t, d)
    half = d.g_z / 2.0
    radicand = half**2 - dot**2
    if np.any(radicand <= 0):
        worst = float(np.max(np.abs(dot)))
        raise ConstraintViolatedError(
            f"|chi_dot| reaches {worst:.4e} rad/s, exceeding g_z/2 = {half:.4e}"
        )
    # The cotangent pole is crossed whenever 2*chi leaves its initial
    # pi-interval; chi is continuous, so compare branch indices.
    branches = np.floor(2.0 * np.atleast_1d(chi) / math.pi)
    sin2chi = np.sin(2.0 * chi)
    if branches.min() != branches.max() or np.any(np.abs(sin2chi) < 1e-12):
        raise SingularChiError("2*chi crosses a multiple of pi")
    root = np.sqrt(radicand)
    return ddot / root - 2.0 * root * (np.cos(2.0 * chi) / sin2chi)


def swipht_phase_speed_margin(d: SwiphtDesign, grid_points: int = 10_000) -> float:
    """max |chi_dot| / (g_z/2) over a dense grid; must stay <= 1."""
    t = np.linspace(0.0, d.gate_time, grid_points)
    _, dot, _ = swipht_chi_derivatives(t, d)
    return float(np.max(np.abs(dot)) / (d.g_z / 2.0))


def swipht_waveform(d: SwiphtDesign, samples: int = 2048) -> PulseWaveform:
    """Sampled SWIPHT envelope, resonant with the target transition.

    Samples are midpoint values; the zero boundary values make the
    zero-order hold faithful at the edges. The phase-speed constraint is
    validated on the sample grid before the envelope is evaluated.
    """
    if samples < 512:
        raise ValueError("SWIPHT resolution guard: need at least 512 samples")
    period = d.gate_time / samples
    t_mid = (np.arange(samples) + 0.5) * period
    _, dot, _ = swipht_chi_derivatives(t_mid, d)
    worst = float(np.max(np.abs(dot)))
    if worst > d.g_z / 2.0:
        t_worst = float(t_mid[int(np.argmax(np.abs(dot)))])
        raise ConstraintViolatedError(
            f"|chi_dot| = {worst:.4e} rad/s at t = {t_worst:.3e} s exceeds g_z/2"
        )
    env = swipht_envelope(t_mid, d).astype(complex)
    return PulseWaveform(sample_period=period, samples=env, carrier=d.carrier)


def swipht_gate_time(g_z: float) -> float:
    if g_z <= 0:
        raise ValueError("g_z must be positive")
    return SWIPHT_TIME_FACTOR / g_z
