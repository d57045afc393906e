"""Round-based extraction of an EPR pair from a shared three-party state.

Three drivers:

* :func:`run_random_party` — N weak-coupling rounds with mid-circuit
  ancilla readout, exact branch enumeration, then a strong measurement
  on the surviving branch.
* :func:`run_no_mcm` — the deferred-measurement variant: every round
  couples to the same ancilla trio, whose contents are relocated to
  fresh ancillas by CNOT pairs before the next round; all readout
  happens once, at the end.
* :func:`run_specific_party` — the baseline: a single strong measurement
  on one pre-agreed party.

All drivers return a :class:`ProtocolResult` holding per-round records
with *conditional* probabilities (each round's four outcome classes sum
to one given the round was reached).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import tolerances as tol
from .circuit import CircuitOp, apply, couple_all, measure, strong_measure_party
from .errors import ConfigError, InvalidArgumentError, InvalidStateError
from .qstate import (
    DensityMatrix,
    QuantumState,
    Statevector,
    as_density_matrix,
    partial_trace,
    tensor,
)

PARTY_NAMES = ("a", "b", "c")


def optimal_epsilon(remaining_rounds: int) -> float:
    """Coupling strength that is optimal with ``remaining_rounds`` rounds left.

    Solves the per-round trade-off exactly: with D rounds remaining the
    best achievable total success probability is (D+2)/(D+3), reached by
    coupling at strength 1/sqrt(D+3).  (Weaker couplings early, the
    strongest one last.)
    """
    d = int(remaining_rounds)
    if d < 1:
        raise InvalidArgumentError("remaining_rounds must be >= 1")
    return 1.0 / math.sqrt(d + 3.0)


@dataclass(frozen=True)
class EpsilonSchedule:
    """Per-round coupling strengths, in execution order.

    ``values[k-1]`` is the strength used in round ``k``; with N rounds
    total, round ``k`` has ``D = N - k + 1`` rounds remaining, so the
    entry for D remaining rounds is ``values[N - D]``.
    """

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise InvalidArgumentError("schedule must contain at least one round")
        for v in vals:
            if not 0.0 < v <= 1.0:
                raise InvalidArgumentError(f"coupling strength {v} outside (0, 1]")

    @classmethod
    def optimal(cls, n_rounds: int) -> "EpsilonSchedule":
        if n_rounds < 1:
            raise InvalidArgumentError("n_rounds must be >= 1")
        return cls(tuple(optimal_epsilon(n_rounds - k + 1)
                         for k in range(1, n_rounds + 1)))

    @classmethod
    def uniform(cls, epsilon: float, n_rounds: int) -> "EpsilonSchedule":
        return cls((float(epsilon),) * n_rounds)

    @property
    def n_rounds(self) -> int:
        return len(self.values)

    def for_round(self, round_index: int) -> float:
        """Strength for 1-based round ``round_index``."""
        if not 1 <= round_index <= len(self.values):
            raise InvalidArgumentError(f"round {round_index} outside schedule")
        return self.values[round_index - 1]

    def for_remaining(self, remaining_rounds: int) -> float:
        """Strength of the entry with ``remaining_rounds`` rounds left."""
        return self.for_round(len(self.values) - remaining_rounds + 1)


class Variant(enum.Enum):
    MCM = "mcm"
    NO_MCM = "no-mcm"
    SPECIFIC_PARTY = "specific-party"


# A stage hook receives the conditioned 3-party state about to enter a
# stage (weak rounds are stages 1..N, the strong measurement is stage
# N+1) and returns the state to use instead.  The noise module builds
# fidelity-ramp hooks with this signature.
StageHook = Callable[[DensityMatrix, int], DensityMatrix]


@dataclass(frozen=True)
class ProtocolConfig:
    n_rounds: int
    schedule: EpsilonSchedule
    variant: Variant = Variant.MCM
    strong_party: int = 0
    stage_hook: Optional[StageHook] = None

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ConfigError("n_rounds must be >= 1")
        if self.schedule.n_rounds != self.n_rounds:
            raise ConfigError(
                f"schedule has {self.schedule.n_rounds} entries "
                f"for {self.n_rounds} rounds")
        if self.strong_party not in (0, 1, 2):
            raise ConfigError("strong_party must be 0, 1, or 2")


class OutcomeKind(enum.Enum):
    CONTINUE = "continue"
    SUCCESS = "success"
    FAIL = "fail"


@dataclass(frozen=True)
class Classification:
    kind: OutcomeKind
    party: Optional[int] = None   # the party whose ancilla fired, for SUCCESS


def classify_outcome(bits: str) -> Classification:
    """Sort a 3-bit ancilla readout into continue / success / fail.

    All-zero means the shared state survived and the round repeats; a
    single firing ancilla means its party dropped out and the *other two*
    parties now hold the pair; two or more firings mean failure.
    """
    if len(bits) != 3 or any(ch not in "01" for ch in bits):
        raise InvalidArgumentError(f"need a 3-bit string, got {bits!r}")
    n_ones = bits.count("1")
    if n_ones == 0:
        return Classification(OutcomeKind.CONTINUE)
    if n_ones == 1:
        return Classification(OutcomeKind.SUCCESS, bits.index("1"))
    return Classification(OutcomeKind.FAIL)


def pair_parties(fired_party: int) -> tuple:
    """The two parties that keep the pair when ``fired_party`` drops out."""
    if fired_party not in (0, 1, 2):
        raise InvalidArgumentError(f"no party {fired_party}")
    return tuple(p for p in range(3) if p != fired_party)


@dataclass(frozen=True)
class RoundRecord:
    """Outcome statistics of one weak round, conditioned on reaching it.

    :param round_index: 1-based round number
    :param p_w: probability of the all-quiet outcome (state survives)
    :param p_epr_by_party: per-party probability that exactly that
        party's ancilla fired
    :param p_fail: probability of two or more ancillas firing
    :param distilled_states: fired party -> 2-qubit state held by the
        other two parties
    :param w_state_after: 3-party state conditioned on the all-quiet
        outcome (None if that outcome has zero probability)
    """

    round_index: int
    p_w: float
    p_epr_by_party: tuple
    p_fail: float
    distilled_states: dict
    w_state_after: Optional[DensityMatrix]

    def __post_init__(self):
        total = self.p_w + sum(self.p_epr_by_party) + self.p_fail
        if abs(total - 1.0) > tol.ATOL_BRANCH_SUM:
            raise InvalidStateError(
                f"round {self.round_index} branch probabilities sum to {total}")

    @property
    def p_epr_total(self) -> float:
        return float(sum(self.p_epr_by_party))


@dataclass(frozen=True)
class StrongRecord:
    """The final strong measurement on the surviving branch."""

    p_epr: float
    distilled_state: Optional[DensityMatrix]
    party: int


@dataclass(frozen=True)
class ProtocolResult:
    rounds: tuple
    strong_record: StrongRecord
    variant: Variant

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)


_ANCILLA_GROUND = Statevector.basis_state(3, 0)


def _round_record_from_branches(round_index: int, branches,
                                reduce_pair, reduce_w) -> RoundRecord:
    """Assemble a RoundRecord given this round's measurement branches.

    ``reduce_pair(branch, fired_party)`` and ``reduce_w(branch)`` map a
    full-register branch to the stored 2-qubit / 3-qubit states; they
    differ between the mid-circuit and deferred drivers.
    """
    p_w = 0.0
    p_epr = [0.0, 0.0, 0.0]
    p_fail = 0.0
    distilled = {}
    w_after = None
    for branch in branches:
        cls = classify_outcome(branch.outcome)
        if cls.kind is OutcomeKind.CONTINUE:
            p_w = branch.probability
            w_after = reduce_w(branch)
        elif cls.kind is OutcomeKind.SUCCESS:
            p_epr[cls.party] = branch.probability
            distilled[cls.party] = reduce_pair(branch, cls.party)
        else:
            p_fail += branch.probability
    return RoundRecord(round_index, p_w, tuple(p_epr), p_fail, distilled, w_after)


def run_random_party(config: ProtocolConfig,
                     initial: QuantumState) -> ProtocolResult:
    """Exact enumeration of the N-round mid-circuit-measurement protocol.

    Per round: attach three ground ancillas, weakly couple each party to
    its ancilla at the scheduled strength, read the ancillas out, and
    classify.  Only the all-quiet branch continues; its conditioned state
    feeds the next round, and after round N the configured party measures
    strongly.  ``config.stage_hook``, if set, transforms the state about
    to enter each stage.
    """
    if initial.n_qubits != 3:
        raise InvalidArgumentError("initial state must cover exactly 3 parties")
    if config.variant is Variant.NO_MCM:
        raise ConfigError("use run_no_mcm for the deferred-measurement variant")
    cur = as_density_matrix(initial).normalized()
    n = config.n_rounds
    rounds = []
    for k in range(1, n + 1):
        if config.stage_hook is not None:
            cur = config.stage_hook(cur, k)
        six = tensor(cur, _ANCILLA_GROUND)
        coupled = couple_all(six, config.schedule.for_round(k))
        branches = measure(coupled, [3, 4, 5])
        record = _round_record_from_branches(
            k, branches,
            reduce_pair=lambda b, f: partial_trace(b.post_state, pair_parties(f)),
            reduce_w=lambda b: partial_trace(b.post_state, (0, 1, 2)),
        )
        rounds.append(record)
        if record.w_state_after is None:
            break
        cur = record.w_state_after
    strong = _strong_stage(cur if rounds[-1].w_state_after is not None else None,
                           config)
    return ProtocolResult(tuple(rounds), strong, Variant.MCM)


def _strong_stage(w_state: Optional[DensityMatrix],
                  config: ProtocolConfig) -> StrongRecord:
    if w_state is None:
        return StrongRecord(0.0, None, config.strong_party)
    if config.stage_hook is not None:
        w_state = config.stage_hook(w_state, config.n_rounds + 1)
    branches = strong_measure_party(w_state, config.strong_party)
    p_epr = 0.0
    distilled = None
    for branch in branches:
        if branch.outcome == "1":
            p_epr = branch.probability
            distilled = as_density_matrix(branch.post_state)
    return StrongRecord(p_epr, distilled, config.strong_party)


def run_specific_party(initial: QuantumState, party: int = 0) -> ProtocolResult:
    """Baseline: the pre-agreed party measures strongly, no weak rounds."""
    if initial.n_qubits != 3:
        raise InvalidArgumentError("initial state must cover exactly 3 parties")
    if party not in (0, 1, 2):
        raise InvalidArgumentError("party must be 0, 1, or 2")
    state = as_density_matrix(initial).normalized()
    branches = strong_measure_party(state, party)
    p_epr = 0.0
    distilled = None
    for branch in branches:
        if branch.outcome == "1":
            p_epr = branch.probability
            distilled = as_density_matrix(branch.post_state)
    strong = StrongRecord(p_epr, distilled, party)
    return ProtocolResult((), strong, Variant.SPECIFIC_PARTY)


# ---------------------------------------------------------------------------
# Deferred-measurement variant
# ---------------------------------------------------------------------------
#
# Register layout: parties on qubits 0..2; ancilla trio for *slot* s on
# qubits 3+3s .. 5+3s, with N slots.  Every round couples to slot 0; a
# relocation pass before rounds 2..N moves each occupied slot one up, so
# the freshly written bits of round r come to rest in slot N-r.  One
# relocation hop is a pair of CNOTs: copy src into the (ground) dst,
# then clear src controlled on dst — an exact state transfer.


def _slot_qubit(slot: int, party: int) -> int:
    return 3 + 3 * slot + party


def _resting_slot(round_index: int, n_rounds: int) -> int:
    return n_rounds - round_index


def no_mcm_circuit(config: ProtocolConfig) -> list:
    """The full deferred-measurement gate list for a 3+3N-qubit register."""
    n = config.n_rounds
    ops = []
    for k in range(1, n + 1):
        if k >= 2:
            for s in range(k - 2, -1, -1):
                for party in range(3):
                    src = _slot_qubit(s, party)
                    dst = _slot_qubit(s + 1, party)
                    ops.append(CircuitOp.cnot(src, dst))
                    ops.append(CircuitOp.cnot(dst, src))
        eps = config.schedule.for_round(k)
        for party in range(3):
            ops.append(CircuitOp.cry_from_strength(eps, party, _slot_qubit(0, party)))
    return ops


def _fixed_index_map(n: int, fixed: dict) -> np.ndarray:
    """Full-register indices of the subspace where ``fixed`` qubits hold
    the given bits, ordered by the remaining qubits' little-endian index."""
    kept = [q for q in range(n) if q not in fixed]
    sub = np.arange(2 ** len(kept), dtype=np.int64)
    full = np.zeros_like(sub)
    for i, q in enumerate(kept):
        full |= ((sub >> i) & 1) << q
    base = sum(bit << q for q, bit in fixed.items())
    return full + base


def _extract_fixed(state: QuantumState, fixed: dict) -> QuantumState:
    """Drop qubits whose value is pinned, renormalizing.

    Any population outside the pinned subspace is projected away, so this
    doubles as "condition on those qubits reading the given bits".
    """
    n = state.n_qubits
    idx = _fixed_index_map(n, fixed)
    if isinstance(state, Statevector):
        sub = state.amplitudes[idx]
        norm2 = float(np.sum(np.abs(sub) ** 2))
        if norm2 < tol.ATOL_ZERO_STATE:
            raise InvalidStateError("conditioning removed all population")
        return Statevector(sub / math.sqrt(norm2))
    sub = state.elements[np.ix_(idx, idx)]
    tr = float(np.real(np.trace(sub)))
    if tr < tol.ATOL_ZERO_STATE:
        raise InvalidStateError("conditioning removed all population")
    return DensityMatrix(sub / tr)


def run_no_mcm(config: ProtocolConfig, initial: QuantumState) -> ProtocolResult:
    """Deferred-measurement driver: one static circuit, one readout.

    ``initial`` is either the 3-party state (the ancilla register is
    allocated here) or a pre-built register of 3 + 3N qubits with all
    ancillas in the ground state.  Outcome statistics are reconstructed
    from the final state by walking the rounds in order and classifying
    on the first non-quiet trio — exactly the mid-circuit statistics, by
    the deferred-measurement principle.  Stored states are conditioned on
    every *other* round reading quiet, which on noiseless input
    reproduces the mid-circuit records.

    Stage hooks are not supported here: with readout deferred there is no
    per-round conditioned state to hand a hook.
    """
    n = config.n_rounds
    if config.stage_hook is not None:
        raise ConfigError("stage_hook is not supported in the deferred variant")
    reg_qubits = 3 + 3 * n
    if initial.n_qubits == 3:
        state = tensor(initial, Statevector.basis_state(3 * n, 0))
    elif initial.n_qubits == reg_qubits:
        state = initial
        excited = _ancilla_population(state)
        if excited > tol.ATOL_ANCILLA_GROUND:
            raise ConfigError(
                f"ancilla register carries population {excited:.3e} outside ground")
    else:
        raise ConfigError(
            f"register must have 3 or {reg_qubits} qubits for "
            f"{n} rounds, got {initial.n_qubits}")

    for op in no_mcm_circuit(config):
        state = apply(op, state)

    # Walk the deferred outcomes round by round, conditioning forward on
    # the quiet branch just as the mid-circuit driver recurses on it.
    fixed_quiet = {}   # ancilla qubits already pinned to 0 (earlier rounds)
    cur = state
    rounds = []
    for k in range(1, n + 1):
        trio = [_slot_qubit(_resting_slot(k, n), party) for party in range(3)]
        branches = measure(cur, trio)
        later = [_slot_qubit(_resting_slot(j, n), party)
                 for j in range(k + 1, n + 1) for party in range(3)]

        def reduce_pair(branch, fired, trio=trio, later=later,
                        fixed_quiet=fixed_quiet):
            fixed = dict(fixed_quiet)
            fixed.update({q: int(b) for q, b in zip(trio, branch.outcome)})
            fixed.update({q: 0 for q in later})
            party_state = _extract_fixed(branch.post_state, fixed)
            return partial_trace(party_state, pair_parties(fired))

        def reduce_w(branch, trio=trio, later=later, fixed_quiet=fixed_quiet):
            fixed = dict(fixed_quiet)
            fixed.update({q: 0 for q in trio})
            fixed.update({q: 0 for q in later})
            party_state = _extract_fixed(branch.post_state, fixed)
            return as_density_matrix(party_state)

        record = _round_record_from_branches(k, branches, reduce_pair, reduce_w)
        rounds.append(record)
        quiet = next((b for b in branches if b.outcome == "000"), None)
        if quiet is None:
            break
        fixed_quiet.update({q: 0 for q in trio})
        cur = quiet.post_state

    if rounds[-1].w_state_after is not None:
        final_party = _extract_fixed(cur, dict(fixed_quiet))
        branches = strong_measure_party(final_party, config.strong_party)
        p_epr = 0.0
        distilled = None
        for branch in branches:
            if branch.outcome == "1":
                p_epr = branch.probability
                distilled = as_density_matrix(branch.post_state)
        strong = StrongRecord(p_epr, distilled, config.strong_party)
    else:
        strong = StrongRecord(0.0, None, config.strong_party)
    return ProtocolResult(tuple(rounds), strong, Variant.NO_MCM)


def _ancilla_population(state: QuantumState) -> float:
    n = state.n_qubits
    idx = np.arange(2 ** n)
    outside = (idx >> 3) != 0
    if isinstance(state, Statevector):
        return float(np.sum(np.abs(state.amplitudes[outside]) ** 2))
    return float(np.sum(np.real(np.diagonal(state.elements)[outside])))
