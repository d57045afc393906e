"""Two-qubit entanglement quantification and protocol-level aggregation.

Closed-form measures: pure-state entropy of entanglement, Wootters
concurrence (via the R-matrix chain), entanglement of formation from
concurrence, the fully entangled fraction over the canonical Bell basis,
and the fidelity-based lower bound on distillable entanglement of
formation.  A variational decomposition search
(:func:`brute_force_mixed_eof`) provides an independent numerical check
of the closed form on mixed states.

Aggregation: :func:`success_probability` and
:func:`expected_entanglement` fold a :class:`~.protocol.ProtocolResult`
chain of conditional per-round records into the protocol's total success
probability and entanglement yield; the ``assemble_*`` variants accept
already-unconditional sequences as reported in experiment tables, with
a flag for either convention on the strong-measurement column.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import tolerances as tol
from .errors import DataError, InvalidArgumentError
from .protocol import ProtocolResult
from .qstate import (
    DensityMatrix,
    QuantumState,
    Statevector,
    as_density_matrix,
    fidelity,
    hermitian_eigensystem,
    hermitian_eigenvalues,
    matrix_sqrt_psd,
    partial_trace,
)

_SQRT2 = math.sqrt(2.0)

# canonical Bell basis, in the weight-index order used by BellDiagonalWeights
PHI_PLUS = Statevector(np.array([1, 0, 0, 1]) / _SQRT2)
PHI_MINUS = Statevector(np.array([1, 0, 0, -1]) / _SQRT2)
PSI_PLUS = Statevector(np.array([0, 1, 1, 0]) / _SQRT2)
PSI_MINUS = Statevector(np.array([0, 1, -1, 0]) / _SQRT2)
BELL_BASIS = (PHI_PLUS, PHI_MINUS, PSI_PLUS, PSI_MINUS)

_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_YY = np.kron(_Y, _Y)


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2 (1-x), with h(0) = h(1) = 0."""
    if not -1e-12 <= x <= 1.0 + 1e-12:
        raise InvalidArgumentError(f"entropy argument {x} outside [0, 1]")
    x = min(1.0, max(0.0, x))
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def _check_two_qubit_pure(psi: Statevector) -> Statevector:
    if psi.n_qubits != 2:
        raise InvalidArgumentError("need a 2-qubit pure state")
    if abs(psi.norm_squared() - 1.0) > tol.ATOL_FIDELITY_CLAMP:
        raise InvalidArgumentError(
            f"state norm^2 = {psi.norm_squared()} is not 1")
    return psi.normalized()


def pure_eof(psi: Statevector) -> float:
    """Entropy of entanglement of a 2-qubit pure state.

    Von Neumann entropy (base 2) of either reduced single-qubit state —
    symmetric in which qubit is traced out.
    """
    psi = _check_two_qubit_pure(psi)
    reduced = partial_trace(psi, [0])
    evals = hermitian_eigenvalues(reduced.elements)
    out = 0.0
    for lam in evals:
        lam = float(lam)
        if lam < -tol.EIG_CLAMP:
            raise InvalidArgumentError(f"reduced state eigenvalue {lam} < 0")
        if lam > tol.EIG_CLAMP:
            out -= lam * math.log2(lam)
    return out


def pure_concurrence(psi: Statevector) -> float:
    """Closed form ``2 |a d - b c|`` for pure 2-qubit amplitudes."""
    psi = _check_two_qubit_pure(psi)
    a = psi.amplitudes
    return float(2.0 * abs(a[0] * a[3] - a[1] * a[2]))


def _check_two_qubit_mixed(rho: QuantumState) -> np.ndarray:
    rho = as_density_matrix(rho)
    if rho.n_qubits != 2:
        raise InvalidArgumentError("need a 2-qubit state")
    m = rho.elements
    if np.max(np.abs(m - m.conj().T)) > tol.ATOL_CONCURRENCE_INPUT:
        raise InvalidArgumentError("density matrix is not Hermitian")
    tr = float(np.real(np.trace(m)))
    if abs(tr - 1.0) > tol.ATOL_CONCURRENCE_INPUT:
        raise InvalidArgumentError(f"density matrix trace {tr} is not 1")
    return m


def concurrence(rho: QuantumState) -> float:
    """Wootters concurrence of a 2-qubit state.

    Computes the spin-flipped partner ``rho~ = (Y (x) Y) rho* (Y (x) Y)``,
    forms ``R = sqrt(sqrt(rho) rho~ sqrt(rho))``, and returns
    ``max(0, l1 - l2 - l3 - l4)`` over R's descending eigenvalues.
    """
    m = _check_two_qubit_mixed(rho)
    tilde = _YY @ m.conj() @ _YY
    root = matrix_sqrt_psd(m)
    inner = root @ tilde @ root
    # inner is PSD up to float noise; its PSD square root's eigenvalues
    # are the Wootters lambdas
    r = matrix_sqrt_psd((inner + inner.conj().T) / 2.0)
    lams = hermitian_eigenvalues(r)
    c = float(lams[0] - lams[1] - lams[2] - lams[3])
    return max(0.0, min(1.0, c))


def eof_from_concurrence(c: float) -> float:
    """Entanglement of formation from the concurrence.

    ``E = h((1 + sqrt(1 - C^2)) / 2)``; monotone increasing in C.
    """
    if not -tol.ATOL_CONCURRENCE_INPUT <= c <= 1.0 + tol.ATOL_CONCURRENCE_INPUT:
        raise InvalidArgumentError(f"concurrence {c} outside [0, 1]")
    c = min(1.0, max(0.0, c))
    return binary_entropy((1.0 + math.sqrt(1.0 - c * c)) / 2.0)


def bennett_lower_bound(theta_max: float) -> float:
    """Lower bound on EoF from the fully entangled fraction.

    ``f(t) = h(1/2 - sqrt(t (1-t)))`` for t > 1/2, else 0; continuous at
    the threshold and tight exactly on Bell-diagonal states.
    """
    if not -1e-12 <= theta_max <= 1.0 + 1e-12:
        raise InvalidArgumentError(f"fraction {theta_max} outside [0, 1]")
    theta_max = min(1.0, max(0.0, theta_max))
    if theta_max <= 0.5:
        return 0.0
    return binary_entropy(0.5 - math.sqrt(theta_max * (1.0 - theta_max)))


def fully_entangled_fraction(rho: QuantumState) -> float:
    """Largest overlap with the four canonical Bell states."""
    rho = as_density_matrix(rho)
    if rho.n_qubits != 2:
        raise InvalidArgumentError("need a 2-qubit state")
    return max(fidelity(rho, bell) for bell in BELL_BASIS)


@dataclass(frozen=True)
class BellDiagonalWeights:
    """Convex weights over the Bell basis (Phi+, Phi-, Psi+, Psi-)."""

    theta: tuple

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        object.__setattr__(self, "theta", theta)
        if len(theta) != 4:
            raise InvalidArgumentError("need exactly four Bell weights")
        for t in theta:
            if not -1e-12 <= t <= 1.0 + 1e-12:
                raise InvalidArgumentError(f"weight {t} outside [0, 1]")
        if abs(sum(theta) - 1.0) > tol.ATOL_NORM:
            raise InvalidArgumentError(f"weights sum to {sum(theta)}, not 1")

    @property
    def theta_max(self) -> float:
        return max(self.theta)

    def state(self) -> DensityMatrix:
        out = np.zeros((4, 4), dtype=complex)
        for t, bell in zip(self.theta, BELL_BASIS):
            out += t * np.outer(bell.amplitudes, bell.amplitudes.conj())
        return DensityMatrix(out)


def bell_diagonal_state(theta) -> DensityMatrix:
    return BellDiagonalWeights(tuple(theta)).state()


class ReportMethod(enum.Enum):
    WOOTTERS_EXACT = "wootters-exact"
    BENNETT_BOUND = "bennett-bound"
    PURE_STATE_ENTROPY = "pure-state-entropy"


@dataclass(frozen=True)
class EntanglementReport:
    """Summary of one distilled pair's entanglement content."""

    pair_fidelity: float
    concurrence: float
    eof: float
    eof_lower_bound: float
    method: ReportMethod

    def __post_init__(self):
        for name in ("pair_fidelity", "concurrence", "eof", "eof_lower_bound"):
            v = getattr(self, name)
            if not -1e-9 <= v <= 1.0 + 1e-9:
                raise InvalidArgumentError(f"{name} = {v} outside [0, 1]")
        if self.eof_lower_bound > self.eof + 1e-9:
            raise InvalidArgumentError(
                f"lower bound {self.eof_lower_bound} exceeds EoF {self.eof}")


def build_entanglement_report(state: QuantumState,
                              bound_only: bool = False) -> EntanglementReport:
    """Report fidelity/concurrence/EoF plus the fidelity-based bound.

    ``bound_only=True`` reports the Bennett bound *as* the EoF column —
    the honest choice when only a Bell-basis fidelity is trusted.
    """
    pair_fid = fidelity(as_density_matrix(state), PSI_PLUS)
    fraction = fully_entangled_fraction(state)
    bound = bennett_lower_bound(fraction)
    if bound_only:
        return EntanglementReport(pair_fid, 0.0, bound, bound,
                                  ReportMethod.BENNETT_BOUND)
    if isinstance(state, Statevector):
        c = pure_concurrence(state)
        return EntanglementReport(pair_fid, c, pure_eof(state), bound,
                                  ReportMethod.PURE_STATE_ENTROPY)
    c = concurrence(state)
    return EntanglementReport(pair_fid, c, eof_from_concurrence(c), bound,
                              ReportMethod.WOOTTERS_EXACT)


# ---------------------------------------------------------------------------
# Protocol-level aggregation
# ---------------------------------------------------------------------------


def _survival_prefix(result: ProtocolResult) -> list:
    """Unconditional probability of *reaching* each round (index k-1)."""
    reach = []
    carry = 1.0
    for rec in result.rounds:
        total = rec.p_w + rec.p_epr_total + rec.p_fail
        if abs(total - 1.0) > tol.ATOL_BRANCH_SUM:
            raise DataError(
                f"round {rec.round_index} probabilities sum to {total}")
        reach.append(carry)
        carry *= rec.p_w
    reach.append(carry)   # probability of surviving all weak rounds
    return reach


def success_probability(result: ProtocolResult) -> float:
    """Total probability that the protocol ends holding a pair.

    Folds the conditional per-round records: each round's success
    probability weighted by the probability of reaching it, plus the
    strong measurement on the fully surviving branch.
    """
    reach = _survival_prefix(result)
    total = 0.0
    for rec, weight in zip(result.rounds, reach):
        total += weight * rec.p_epr_total
    total += reach[-1] * result.strong_record.p_epr
    return total


STRONG_KEY = "strong"


def eof_map_from_result(result: ProtocolResult) -> dict:
    """EoF of every stored success branch, keyed ``(round, party)`` plus
    ``"strong"``, computed by the exact concurrence closed form."""
    out = {}
    for rec in result.rounds:
        for party, state in rec.distilled_states.items():
            out[(rec.round_index, party)] = eof_from_concurrence(concurrence(state))
    if result.strong_record.distilled_state is not None:
        out[STRONG_KEY] = eof_from_concurrence(
            concurrence(result.strong_record.distilled_state))
    return out


def expected_entanglement(result: ProtocolResult,
                          eof_per_branch: Optional[dict] = None) -> float:
    """Expected distilled entanglement per protocol run.

    Weights each success branch's EoF by the unconditional probability of
    that branch: per round, each party's firing probability times the
    probability of reaching the round; plus the strong branch.  With all
    EoF values pinned to 1 this reduces to :func:`success_probability`.

    ``eof_per_branch`` maps ``(round_index, party)`` and ``"strong"`` to
    EoF values; by default they are computed from the stored states.
    """
    if eof_per_branch is None:
        eof_per_branch = eof_map_from_result(result)
    reach = _survival_prefix(result)
    total = 0.0
    for rec, weight in zip(result.rounds, reach):
        for party, p in enumerate(rec.p_epr_by_party):
            if p == 0.0:
                continue
            key = (rec.round_index, party)
            if key not in eof_per_branch:
                raise DataError(f"no EoF value for success branch {key}")
            total += weight * p * eof_per_branch[key]
    if result.strong_record.p_epr > 0.0:
        if STRONG_KEY not in eof_per_branch:
            raise DataError("no EoF value for the strong-measurement branch")
        total += reach[-1] * result.strong_record.p_epr * eof_per_branch[STRONG_KEY]
    return total


class StrongConvention(enum.Enum):
    """How a reported strong-measurement probability is normalized.

    UNCONDITIONAL: already multiplied by the survival probability.
    CONDITIONAL: given survival; must be multiplied by the last
    cumulative continue probability.
    """

    UNCONDITIONAL = "unconditional"
    CONDITIONAL = "conditional"


def _strong_term(p_strong: float, p_w_cumulative,
                 convention: StrongConvention) -> float:
    if convention is StrongConvention.UNCONDITIONAL:
        return p_strong
    if not p_w_cumulative:
        raise DataError("conditional strong term needs the survival chain")
    return p_strong * float(p_w_cumulative[-1])


def assemble_success_probability(p_epr_rounds, p_w_cumulative, p_strong,
                                 convention=StrongConvention.UNCONDITIONAL,
                                 ) -> float:
    """Total success from already-unconditional per-round probabilities.

    ``p_epr_rounds[k-1]`` is the unconditional probability of winning the
    pair in round k; ``p_w_cumulative[k-1]`` the unconditional probability
    the state survives rounds 1..k.  The flag states whether ``p_strong``
    is already unconditional or still conditioned on survival.
    """
    return float(sum(p_epr_rounds)) + _strong_term(
        float(p_strong), [float(v) for v in p_w_cumulative], convention)


def assemble_expected_entanglement(p_epr_rounds, p_w_cumulative, p_strong,
                                   eof_rounds, eof_strong,
                                   convention=StrongConvention.UNCONDITIONAL,
                                   ) -> float:
    """Expected EoF from unconditional probabilities and per-round EoFs."""
    p_epr_rounds = [float(v) for v in p_epr_rounds]
    eof_rounds = [float(v) for v in eof_rounds]
    if len(eof_rounds) != len(p_epr_rounds):
        raise DataError("need one EoF value per round")
    total = sum(p * e for p, e in zip(p_epr_rounds, eof_rounds))
    total += _strong_term(float(p_strong),
                          [float(v) for v in p_w_cumulative],
                          convention) * float(eof_strong)
    return float(total)


# ---------------------------------------------------------------------------
# Variational cross-check of the mixed-state EoF
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    converged: bool


def _ensemble_average_eof(x: np.ndarray, roots: np.ndarray, m: int) -> float:
    """Mean pure-state EoF of the ensemble parameterized by x.

    ``roots`` holds sqrt(eigenvalue)-scaled eigenvectors column-wise; the
    ensemble is their image under the first columns of expm(i H(x)).
    The objective is evaluated many times per minimization, so every
    member is handled at once: the hermitian generator is exponentiated
    through its own eigensystem, and each member's pure EoF comes from
    the reduced-state eigenvalues (1 +/- sqrt(1 - 4 |det M|^2))/2, where
    M is the member's 2x2 coefficient matrix.
    """
    h = np.zeros((m, m), dtype=complex)
    h[np.diag_indices(m)] = x[:m]
    off = x[m:]
    iu, ju = np.triu_indices(m, k=1)
    h[iu, ju] = off[0::2] + 1j * off[1::2]
    h[ju, iu] = off[0::2] - 1j * off[1::2]
    phases, basis = np.linalg.eigh(h)
    u = (basis * np.exp(1j * phases)) @ basis.conj().T
    members = u[:, : roots.shape[1]] @ roots.T   # row j = unnormalized |phi_j>
    weights = np.einsum("jk,jk->j", members.conj(), members).real
    dets = np.abs(members[:, 0] * members[:, 3]
                  - members[:, 1] * members[:, 2])
    live = weights > 1e-14
    tau = np.zeros_like(weights)
    tau[live] = np.minimum(1.0, 2.0 * dets[live] / weights[live])
    lam_hi = 0.5 * (1.0 + np.sqrt(np.maximum(0.0, 1.0 - tau * tau)))
    lam_lo = 1.0 - lam_hi
    entropy = np.zeros_like(weights)
    interior = live & (lam_lo > 0.0)
    entropy[interior] = -(lam_hi[interior] * np.log2(lam_hi[interior])
                          + lam_lo[interior] * np.log2(lam_lo[interior]))
    return float(np.dot(weights, entropy))


def brute_force_mixed_eof(rho: QuantumState, ensemble_size: int = 6,
                          restarts: int = 4,
                          rng_seed: int = 20240901) -> BruteForceResult:
    """Numerical minimization of average pure EoF over decompositions.

    Parameterizes ensembles of ``ensemble_size`` members through unitaries
    acting on the purification and minimizes with several seeded restarts.
    Returns the best value found and whether the optimizer reported
    convergence — an independent check of the concurrence closed form,
    not a production path.
    """
    m_elements = _check_two_qubit_mixed(rho)
    evals, vecs = hermitian_eigensystem(m_elements)
    support = [(lam, vecs[:, i]) for i, lam in enumerate(evals) if lam > 1e-12]
    rank = len(support)
    if ensemble_size < rank:
        raise InvalidArgumentError(
            f"ensemble size {ensemble_size} below state rank {rank}")
    if rank == 1:
        lam, vec = support[0]
        return BruteForceResult(pure_eof(Statevector(vec)), True)
    roots = np.stack([math.sqrt(float(lam)) * vec
                      for lam, vec in support], axis=1)   # 4 x rank
    m = int(ensemble_size)
    n_params = m * m
    rng = np.random.default_rng(rng_seed)
    best = math.inf
    converged = False
    for _ in range(int(restarts)):
        x0 = rng.normal(scale=0.5, size=n_params)
        res = minimize(_ensemble_average_eof, x0, args=(roots, m),
                       method="L-BFGS-B",
                       options={"maxiter": 400, "ftol": 1e-12})
        if res.fun < best - 1e-12:
            best = float(res.fun)
            converged = bool(res.success)
        elif res.fun < best + 1e-9 and res.success:
            converged = True
    return BruteForceResult(best, converged)
