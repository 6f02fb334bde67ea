"""Statistical reconstruction and gate metrics.

Maximum-likelihood state reconstruction uses a Cholesky-style
parameterization (rho = T^dag T / Tr, T lower triangular), so every
iterate is physical by construction. Process reconstruction is two-stage:
linear inversion of the measured frequencies followed by alternating
projections of the Choi matrix onto the completely-positive cone and the
trace-preserving affine subspace. Fidelities follow the Pauli
transfer-matrix conventions fixed in ``qcore.pauli_basis``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from .dynamics import QuantumProcess, choi_to_superop, superop_to_choi
from .qcore import DimensionMismatchError, dagger, pauli_basis


class FitFailedError(RuntimeError):
    """Raised when the exponential decay fit does not converge."""


def state_fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """<psi| rho |psi> for a pure target state."""
    rho = np.asarray(rho, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if rho.shape != (psi.size, psi.size):
        raise DimensionMismatchError(
            f"density matrix {rho.shape} does not match state of length {psi.size}"
        )
    val = complex(np.conj(psi) @ rho @ psi)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"fidelity has imaginary part {val.imag}")
    return float(val.real)


def unitary_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Process fidelity |Tr(u^dag v)|^2 / d^2; invariant to global phase."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"shapes {u.shape} and {v.shape} differ")
    d = u.shape[0]
    return float(abs(np.trace(dagger(u) @ v)) ** 2 / d**2)


def block_unitary_fidelity(
    u: np.ndarray, v: np.ndarray, blocks: Sequence[Sequence[int]]
) -> list[float]:
    """Per-block process fidelities with an independent phase per block."""
    out = []
    for idx in blocks:
        idx = list(idx)
        out.append(unitary_fidelity(u[np.ix_(idx, idx)], v[np.ix_(idx, idx)]))
    return out


def _pauli_change_of_basis(n_qubits: int) -> np.ndarray:
    """Columns are vec(P_i)/sqrt(d); unitary because Tr(Pi Pj) = d delta."""
    paulis = pauli_basis(n_qubits)
    d = paulis[0].shape[0]
    return np.column_stack([p.reshape(-1, order="F") / math.sqrt(d) for p in paulis])


def ptm_of_process(process: QuantumProcess | np.ndarray) -> np.ndarray:
    """Pauli transfer matrix R_ij = Tr[P_i Lambda(P_j)] / d.

    Accepts a QuantumProcess or a bare unitary matrix.
    """
    if isinstance(process, np.ndarray):
        process = QuantumProcess.from_unitary(process)
    d = process.dim
    n_qubits = {2: 1, 4: 2}.get(d)
    if n_qubits is None:
        raise DimensionMismatchError("Pauli transfer matrices need 1 or 2 qubits")
    b = _pauli_change_of_basis(n_qubits)
    r = dagger(b) @ process.superoperator() @ b
    if float(np.max(np.abs(r.imag))) > 1e-9:
        raise ValueError("transfer matrix has nonreal entries; map is unphysical")
    return r.real


def ptm_to_superoperator(r: np.ndarray) -> np.ndarray:
    n_qubits = {4: 1, 16: 2}[r.shape[0]]
    b = _pauli_change_of_basis(n_qubits)
    return b @ r.astype(complex) @ dagger(b)


def average_gate_fidelity(r_exp: np.ndarray, r_ideal: np.ndarray) -> float:
    """(Tr[R_exp^T R_ideal]/4 + 1) / 5 for two-qubit transfer matrices."""
    r_exp = np.asarray(r_exp, dtype=float)
    r_ideal = np.asarray(r_ideal, dtype=float)
    if r_exp.shape != (16, 16) or r_ideal.shape != (16, 16):
        raise DimensionMismatchError("expected 16x16 transfer matrices")
    return float((np.trace(r_exp.T @ r_ideal) / 4.0 + 1.0) / 5.0)


def ptm_purity(r: np.ndarray) -> float:
    """Unitarity-style purity Tr[Ru^T Ru]/15 of the unital block Ru.

    This is the artifact's convention: 1 for unitaries (orthogonal unital
    block), p^2 for depolarizing with parameter p, 0 when fully
    depolarizing.
    """
    r = np.asarray(r, dtype=float)
    first = np.zeros(r.shape[0])
    first[0] = 1.0
    if float(np.max(np.abs(r[0] - first))) > 1e-9:
        raise ValueError("transfer matrix is not trace preserving")
    ru = r[1:, 1:]
    return float(np.trace(ru.T @ ru) / ru.shape[0])


# ---------------------------------------------------------------------------
# Maximum-likelihood state reconstruction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MLEStateResult:
    rho: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float
    log_likelihood_history: np.ndarray


def _tri_indices(d: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(d) for j in range(i + 1)]


def _params_to_t(theta: np.ndarray, d: int) -> np.ndarray:
    t = np.zeros((d, d), dtype=complex)
    idx = 0
    for (i, j) in _tri_indices(d):
        if i == j:
            t[i, j] = theta[idx]
            idx += 1
        else:
            t[i, j] = theta[idx] + 1j * theta[idx + 1]
            idx += 2
    return t


def _rho_of_t(t: np.ndarray) -> tuple[np.ndarray, float]:
    g = dagger(t) @ t
    tau = float(np.real(np.trace(g)))
    return g / tau, tau


def measurement_projectors(settings: Sequence[np.ndarray]) -> list[list[np.ndarray]]:
    """Effective projectors S^dag |o><o| S for z-basis readout after S."""
    out = []
    for s in settings:
        s = np.asarray(s, dtype=complex)
        d = s.shape[0]
        row = []
        for o in range(d):
            m = np.outer(np.conj(s[o, :]), s[o, :])
            row.append(m)
        out.append(row)
    return out


def assert_informationally_complete(settings: Sequence[np.ndarray]) -> None:
    """The effective projectors must span the full operator space."""
    projs = measurement_projectors(settings)
    d = settings[0].shape[0]
    stack = np.stack([m.reshape(-1) for row in projs for m in row])
    if np.linalg.matrix_rank(stack, tol=1e-9) < d * d:
        raise ValueError("measurement settings are not informationally complete")


def mle_density_matrix(
    counts: np.ndarray,
    settings: Sequence[np.ndarray],
    grad_tol: float = 1e-8,
    max_iter: int = 10_000,
) -> MLEStateResult:
    """Multinomial maximum-likelihood density matrix.

    ``counts[s, o]`` are outcomes of z-basis readout after the setting
    unitary ``settings[s]``. Gradient ascent with a backtracking line
    search on the Cholesky parameterization; the per-step likelihood is
    monotone by construction. Convergence is declared when the gradient
    norm of the mean log-likelihood drops below ``grad_tol``. Returns the
    best iterate with a flag when the iteration cap is hit instead.
    """
    counts = np.asarray(counts, dtype=float)
    assert_informationally_complete(settings)
    projs = measurement_projectors(settings)
    d = settings[0].shape[0]
    n_tot = float(counts.sum())
    if n_tot <= 0:
        raise ValueError("dataset has no counts")

    flat_m = []
    flat_n = []
    for s in range(counts.shape[0]):
        for o in range(counts.shape[1]):
            flat_m.append(projs[s][o])
            flat_n.append(counts[s, o])
    marr = np.stack(flat_m)
    narr = np.array(flat_n) / n_tot

    def loglike_and_grad(theta: np.ndarray) -> tuple[float, np.ndarray]:
        t = _params_to_t(theta, d)
        rho, tau = _rho_of_t(t)
        probs = np.real(np.einsum("kij,ji->k", marr, rho))
        probs = np.clip(probs, 1e-14, None)
        ll = float(np.sum(narr * np.log(probs)))
        weights = narr / probs
        grad_rho = np.einsum("k,kij->ij", weights, marr)
        m = grad_rho - np.trace(grad_rho @ rho) * np.eye(d)
        gt = (t @ m) * (2.0 / tau)
        grad = np.zeros_like(theta)
        idx = 0
        for (i, j) in _tri_indices(d):
            if i == j:
                grad[idx] = gt[i, j].real
                idx += 1
            else:
                grad[idx] = gt[i, j].real
                grad[idx + 1] = gt[i, j].imag
                idx += 2
        return ll, grad

    theta = np.zeros(d * d)
    idx = 0
    for (i, j) in _tri_indices(d):
        if i == j:
            theta[idx] = 1.0
        idx += 1 if i == j else 2

    ll, grad = loglike_and_grad(theta)
    history = [ll]
    step = 1.0
    converged = False
    iterations = 0
    stalled = 0
    prev_theta = prev_grad = None
    for iterations in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < grad_tol:
            converged = True
            break
        # Barzilai-Borwein step seed (plain doubling crawls in the
        # ill-conditioned valleys of this likelihood), safeguarded by an
        # Armijo backtracking line search so the ascent stays monotone.
        trial = step * 2.0
        if prev_theta is not None:
            ds = theta - prev_theta
            dg = grad - prev_grad
            curv = -float(np.dot(ds, dg))
            if curv > 0:
                trial = float(np.dot(ds, ds)) / curv
        prev_theta, prev_grad = theta, grad
        accepted = False
        for _ in range(80):
            cand = theta + trial * grad
            ll_new, grad_new = loglike_and_grad(cand)
            if ll_new >= ll + 1e-4 * trial * gnorm**2:
                gain = ll_new - ll
                theta, ll, grad = cand, ll_new, grad_new
                history.append(ll)
                step = trial
                accepted = True
                break
            trial /= 2.0
        if not accepted:
            converged = gnorm < 1e3 * grad_tol
            break
        # Likelihood plateaus below round-off long before the gradient
        # norm does on rank-deficient optima; treat a long stall as done.
        stalled = stalled + 1 if gain < 1e-14 else 0
        if stalled >= 25:
            converged = True
            break
    rho, _ = _rho_of_t(_params_to_t(theta, d))
    rho = (rho + dagger(rho)) / 2.0
    return MLEStateResult(
        rho=rho,
        converged=converged,
        iterations=iterations,
        log_likelihood=ll,
        log_likelihood_history=np.array(history),
    )


# ---------------------------------------------------------------------------
# Process reconstruction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MLEPTMResult:
    ptm: np.ndarray
    converged: bool
    iterations: int


def _project_choi_cp(choi: np.ndarray) -> np.ndarray:
    h = (choi + dagger(choi)) / 2.0
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    return (v * w) @ dagger(v)


def _project_choi_tp(choi: np.ndarray) -> np.ndarray:
    d = math.isqrt(choi.shape[0])
    pt = np.trace(choi.reshape(d, d, d, d), axis1=1, axis2=3)
    return choi + np.kron((np.eye(d) - pt) / d, np.eye(d))


def project_cptp(
    superop: np.ndarray, tol: float = 1e-9, max_alternations: int = 10_000
) -> tuple[np.ndarray, bool, int]:
    """Alternating Choi-space projections onto CP and TP, ending on TP."""
    choi = superop_to_choi(superop)
    converged = False
    k = 0
    for k in range(1, max_alternations + 1):
        nxt = _project_choi_tp(_project_choi_cp(choi))
        delta = float(np.max(np.abs(nxt - choi)))
        choi = nxt
        if delta < tol:
            converged = True
            break
    return choi_to_superop(choi), converged, k


def qpt_linear_inversion(
    frequencies: np.ndarray,
    prep_states: Sequence[np.ndarray],
    settings: Sequence[np.ndarray],
) -> np.ndarray:
    """Least-squares transfer matrix from measured outcome frequencies.

    ``frequencies[i, s, o]`` is the observed frequency of outcome ``o``
    for input state ``i`` and measurement setting ``s``. The model is
    p = (1/d) m^T R r with r, m the Pauli vectors of the input state and
    the effective measurement projector.
    """
    paulis = pauli_basis(2)
    d = 4
    prep_vecs = np.array(
        [[np.real(np.trace(p @ rho)) for p in paulis] for rho in prep_states]
    )
    projs = measurement_projectors(settings)
    meas_vecs = np.array(
        [
            [[np.real(np.trace(p @ m)) for p in paulis] for m in row]
            for row in projs
        ]
    )
    n_prep, n_set, n_out = frequencies.shape
    rows = []
    target = []
    for i in range(n_prep):
        for s in range(n_set):
            for o in range(n_out):
                rows.append(np.outer(meas_vecs[s][o], prep_vecs[i]).ravel() / d)
                target.append(frequencies[i, s, o])
    a = np.array(rows)
    b = np.array(target)
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return x.reshape(16, 16)


def mle_ptm(
    counts: np.ndarray,
    prep_states: Sequence[np.ndarray],
    settings: Sequence[np.ndarray],
    tol: float = 1e-9,
    max_alternations: int = 10_000,
    refine_iterations: int = 500,
) -> MLEPTMResult:
    """Physical transfer matrix by constrained maximum likelihood.

    Three stages: linear inversion of the outcome frequencies, projection
    onto the CPTP set (alternating Choi projections), then multinomial
    likelihood ascent by projected gradient with backtracking. The
    refinement matters at finite shots: the bare projection of the noisy
    inversion systematically shrinks the map and costs close to a percent
    of average gate fidelity at 1000 shots, while the likelihood optimum
    does not. The returned matrix satisfies the trace-preservation row
    exactly and complete positivity within the Choi eigenvalue floor.
    """
    counts = np.asarray(counts, dtype=float)
    shots = counts.sum(axis=2, keepdims=True)
    if np.any(shots <= 0):
        raise ValueError("every (preparation, setting) cell needs counts")
    freqs = counts / shots
    r_lin = qpt_linear_inversion(freqs, prep_states, settings)
    s_proj, proj_converged, proj_iterations = project_cptp(
        ptm_to_superoperator(r_lin), tol=tol, max_alternations=max_alternations
    )

    projs = measurement_projectors(settings)
    ops = np.stack(
        [np.kron(rho.T, m) for rho in prep_states for row in projs for m in row]
    )
    weights = counts.reshape(-1)
    weights = weights / weights.sum()

    def ll_and_grad(choi: np.ndarray) -> tuple[float, np.ndarray]:
        probs = np.real(np.einsum("kij,ji->k", ops, choi))
        probs = np.clip(probs, 1e-12, None)
        ll = float(np.sum(weights * np.log(probs)))
        grad = np.einsum("k,kij->ij", weights / probs, ops)
        return ll, grad

    def project(choi: np.ndarray) -> np.ndarray:
        s, _, _ = project_cptp(
            choi_to_superop(choi), tol=1e-10, max_alternations=3000
        )
        return superop_to_choi(s)

    choi = superop_to_choi(s_proj)
    ll, grad = ll_and_grad(choi)
    step = 0.05
    converged = False
    it = 0
    stalled = 0
    for it in range(1, refine_iterations + 1):
        direction = grad / np.linalg.norm(grad)
        accepted = False
        trial = min(step * 2.0, 2.0)
        while trial > 1e-12:
            cand = project(choi + trial * direction)
            ll_new, grad_new = ll_and_grad(cand)
            if ll_new > ll + 1e-13:
                gain = ll_new - ll
                choi, ll, grad = cand, ll_new, grad_new
                step = trial
                accepted = True
                break
            trial /= 2.0
        if not accepted:
            converged = True
            break
        # The gains shrink geometrically; once they drop below 1e-9 of
        # mean log-likelihood the remaining tail cannot move any fidelity
        # beyond the 1e-5 level.
        stalled = stalled + 1 if gain < 1e-9 else 0
        if stalled >= 5:
            converged = True
            break
    # Final strict polish: residual positivity violations at the working
    # projection tolerance would push the unital-block norm above 1.
    s_final, _, _ = project_cptp(
        choi_to_superop(choi), tol=1e-13, max_alternations=50_000
    )
    b = _pauli_change_of_basis(2)
    r = np.real(dagger(b) @ s_final @ b)
    r[0, :] = 0.0
    r[0, 0] = 1.0
    return MLEPTMResult(
        ptm=r, converged=converged and proj_converged, iterations=proj_iterations + it
    )


# ---------------------------------------------------------------------------
# Randomized-benchmarking decay fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """A p^m + B fit of the sequence-averaged survival probability.

    ``average_gate_fidelity`` is the per-generator value 1 - (1 - p)/2
    under the usual gate-independent depolarizing interpretation.
    """

    amplitude: float
    base: float
    offset: float
    average_gate_fidelity: float
    covariance: np.ndarray
    residuals: np.ndarray

    @property
    def error_per_gate(self) -> float:
        return (1.0 - self.base) / 2.0


def fit_decay(
    m: np.ndarray, mean_fidelity: np.ndarray, stderr: np.ndarray | None = None
) -> DecayFit:
    """Bounded least-squares fit of the exponential decay curve."""
    m = np.asarray(m, dtype=float)
    f = np.asarray(mean_fidelity, dtype=float)
    if m.size < 4:
        raise FitFailedError("need at least 4 truncation points")

    def model(x, a, p, b):
        return a * p**x + b

    if float(f.max() - f.min()) < 1e-12:
        # Constant data: p is unidentifiable, report the lossless fit.
        return DecayFit(
            amplitude=0.0,
            base=1.0,
            offset=float(f.mean()),
            average_gate_fidelity=1.0,
            covariance=np.zeros((3, 3)),
            residuals=f - f.mean(),
        )

    sigma = None
    if stderr is not None:
        sigma = np.clip(np.asarray(stderr, dtype=float), 1e-6, None)
    p0 = (max(f[0] - f[-1], 0.1), 0.99, min(f[-1], 0.9))
    try:
        popt, pcov = curve_fit(
            model,
            m,
            f,
            p0=p0,
            sigma=sigma,
            bounds=([0.0, 1e-6, 0.0], [1.0, 1.0, 1.0]),
            maxfev=20_000,
        )
    except RuntimeError as exc:
        raise FitFailedError(f"decay fit failed: {exc}") from exc
    a, p, b = popt
    resid = f - model(m, *popt)
    return DecayFit(
        amplitude=float(a),
        base=float(p),
        offset=float(b),
        average_gate_fidelity=float(1.0 - (1.0 - p) / 2.0),
        covariance=pcov,
        residuals=resid,
    )
