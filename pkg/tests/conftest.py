import math

import numpy as np
import pytest

from zzforge.device_model import (
    REFERENCE_COHERENCE,
    CouplingSpec,
    TransmonSpec,
    calibrate_capacitive,
    effective_params_exact,
)

GHZ = 2 * math.pi * 1e9
MHZ = 2 * math.pi * 1e6


@pytest.fixture(scope="session")
def reference_device():
    """Calibrated capacitive model of the reference device."""
    return calibrate_capacitive()


@pytest.fixture(scope="session")
def reference_params(reference_device):
    cal = reference_device
    return effective_params_exact(cal.q1, cal.q2, cal.coupling)


@pytest.fixture(scope="session")
def reference_coherence():
    return REFERENCE_COHERENCE


def random_density_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (a + a.conj().T) / 2.0


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def make_transmon(f_ghz, alpha_mhz, levels=3):
    return TransmonSpec(omega01=f_ghz * GHZ, anharmonicity=alpha_mhz * MHZ, levels=levels)


def random_perturbative_capacitive(rng, ratio=0.05):
    """Capacitive spec with every coupling at most `ratio` of its denominator."""
    q1 = make_transmon(rng.uniform(4.8, 5.0), rng.uniform(-350, -250))
    q2 = make_transmon(rng.uniform(5.5, 5.7), rng.uniform(-350, -250))
    e1, e2 = q1.energies(), q2.energies()
    dens = [
        abs(e1[j] - e1[j + 1] + e2[a + 1] - e2[a])
        / (math.sqrt(j + 1) * math.sqrt(a + 1))
        for j in range(2)
        for a in range(2)
    ]
    g1 = ratio * min(dens)
    return q1, q2, CouplingSpec(topology="capacitive", g1=g1)


def random_dispersive_resonator(rng, ratio=0.03):
    # Keep both straddling denominators positive (second-qubit detuning
    # below both anharmonicity magnitudes) so the ZZ terms add instead of
    # cancelling; the reduction's relative accuracy degrades badly in
    # fine-tuned cancellation regimes.
    f1 = rng.uniform(4.8, 5.0)
    q1 = make_transmon(f1, rng.uniform(-330, -280))
    q2 = make_transmon(f1 + rng.uniform(0.10, 0.15), rng.uniform(-330, -280))
    omega_c = rng.uniform(7.5, 8.0) * GHZ
    dets = []
    for q in (q1, q2):
        e = q.energies()
        dets += [abs(e[k + 1] - e[k] - omega_c) / math.sqrt(k + 1) for k in range(2)]
    h = ratio * min(dets)
    return q1, q2, CouplingSpec(
        topology="resonator", omega_c=omega_c, h1=h, h2=h, n_max=3
    )
