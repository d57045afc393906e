"""Trajectory sampling and trial-averaged estimation for the protocol.

The runners in :mod:`.protocol` enumerate every measurement branch exactly;
this module instead draws individual shots the way an experiment would and
reduces repeated trials to means with 1-sigma sample error bars.  Each shot
follows a single trajectory: the shared register is carried through all
weak-measurement rounds, every round's three ancilla bits are drawn from
their exact conditional distribution given the shot's history, optional
classical readout flips corrupt the *recorded* bits, and the strong
measurement is drawn for the shots whose record stayed quiet throughout.

Shots are classified from the recorded bits exactly as an experimenter
post-processing a static circuit would: the first round whose record is not
all zeros ends the analysis for that shot; a one-hot record counts as a
distilled pair held by the two quiet parties, any other pattern as a
failure; an all-quiet record hands the shot to the strong measurement,
whose bit is recorded faithfully.  Because flips act only on the record,
a shot can be counted as a success while its underlying state never
branched — the same false-positive bias a hardware run suffers — and
readout mitigation of the per-round histograms removes that bias to first
order.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import tolerances as tol
from .circuit import couple_all, measure, prepare_w, strong_measure_party
from .errors import ConfigError, DataError, InvalidArgumentError
from .measures import StrongConvention, assemble_success_probability
from .noise import CountsTable, NoisyWParams, ReadoutModel, mitigate_readout
from .protocol import (ProtocolConfig, ProtocolResult, Variant, pair_parties)
from .qstate import (DensityMatrix, Statevector, as_density_matrix, fidelity,
                     partial_trace, tensor)

_N_OUTCOMES = 8
_ONE_HOT = {1: 0, 2: 1, 4: 2}   # observed outcome index -> fired party
_ANCILLA_GROUND = Statevector.basis_state(3, 0)


@dataclass(frozen=True)
class ShotPlan:
    """How many shots to draw and how often to repeat the experiment.

    :param shots_per_trial: number of independent shots in one trial
    :param trials: number of trial repetitions used for the error bars
    :param master_seed: root seed; trial ``t`` draws from the stream
        spawned with key ``(t,)``, and every shot consumes a dedicated row
        of that trial's uniform table, so all per-shot draws are unique
        and independent of execution order
    """

    shots_per_trial: int
    trials: int
    master_seed: int

    def __post_init__(self):
        for name in ("shots_per_trial", "trials"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidArgumentError(f"{name} must be an integer")
            if value < 1:
                raise InvalidArgumentError(f"{name} must be at least 1")
        seed = self.master_seed
        if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
            raise InvalidArgumentError("master_seed must be an integer")
        if seed < 0:
            raise InvalidArgumentError("master_seed must be non-negative")


@dataclass(frozen=True)
class EstimateWithError:
    """A mean with a 1-sigma sample error bar over repeated trials.

    ``sigma`` is the sample standard deviation (ddof=1) across trials and
    is NaN when only one trial contributed, since a single repetition
    carries no spread information.  Exact-enumeration results set
    ``analytic=True`` and ``sigma=0`` instead.  ``analytic_sigma`` is an
    optional binomial error bar reported for diagnostics only.
    """

    mean: float
    sigma: float
    trials: int
    analytic_sigma: Optional[float] = None
    analytic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "sigma", float(self.sigma))
        if self.trials < 1:
            raise InvalidArgumentError("an estimate needs at least one trial")
        if self.analytic:
            if self.sigma != 0.0:
                raise InvalidArgumentError("analytic estimates carry sigma 0")
        elif self.trials == 1:
            if not math.isnan(self.sigma):
                raise InvalidArgumentError(
                    "a single sampled trial has undefined sigma; use NaN")
        elif not self.sigma >= 0.0:
            raise InvalidArgumentError(f"sigma {self.sigma} must be non-negative")
        if self.analytic_sigma is not None and not self.analytic_sigma >= 0.0:
            raise InvalidArgumentError("analytic_sigma must be non-negative")


@dataclass(frozen=True)
class SampledTrial:
    """Everything recorded from one trial's worth of shots.

    ``rounds[k-1]`` is the histogram of round-``k`` recorded ancilla
    patterns over the shots whose record was still all-quiet before the
    round (character ``i`` of a key is party ``i``'s ancilla bit).
    ``strong`` is the 1-bit histogram of the strong measurement over the
    shots that stayed quiet through every round.

    ``conditioned_w[k-1]`` is the average register state of the shots
    still quiet after round ``k`` (``None`` when no shot survived) and
    ``conditioned_w_shots[k-1]`` their number; ``pair_states[k-1]`` is the
    average kept-pair state over the shots first flagged one-hot in round
    ``k``, taken at the flag round — the pair is shelved from then on.
    """

    rounds: tuple
    strong: CountsTable
    conditioned_w: tuple
    conditioned_w_shots: tuple
    pair_states: tuple
    pair_shots: tuple
    strong_pair_state: Optional[DensityMatrix]
    strong_pair_shots: int


@dataclass(frozen=True)
class RateEstimates:
    """Trial-averaged protocol rates.

    ``p_w[k-1]`` estimates the unconditional probability that the first
    ``k`` rounds all record quiet; ``p_epr_given_w[k-1]`` the probability
    of a one-hot record in round ``k`` given quiet records before it;
    ``p_strong`` the unconditional probability that the run survives every
    round and the strong measurement succeeds; ``p_success`` their total.
    """

    p_w: tuple
    p_epr_given_w: tuple
    p_strong: EstimateWithError
    p_success: EstimateWithError
    mitigated: bool


@dataclass
class _Node:
    state: DensityMatrix
    depth: int
    on_spine: bool


@dataclass
class _Children:
    probs: np.ndarray
    cdf: np.ndarray
    child_ids: np.ndarray


@dataclass
class _StrongInfo:
    p_one: float
    pair: Optional[DensityMatrix]


class _TrajectoryTree:
    """Lazily grown tree of conditioned register states.

    One node per distinct outcome history; children are materialised the
    first time a shot reaches the node.  The tree is shared between trials
    and worker threads — the lock keeps growth single-writer, so every
    node state is computed exactly once and sampling is bit-reproducible
    for any degree of parallelism.

    A stage hook only ever fires on the all-quiet spine: that is the only
    history on which the protocol still holds (a degraded copy of) the
    shared target state, which is what the degradation laws describe.
    """

    def __init__(self, config: ProtocolConfig, initial, hook, n_rounds: int):
        self._config = config
        self._hook = hook
        self._n_rounds = n_rounds
        self._lock = threading.Lock()
        self._nodes = [_Node(as_density_matrix(initial).normalized(), 0, True)]
        self._children: dict = {}
        self._strong: dict = {}
        self._pairs: dict = {}

    @property
    def root(self) -> int:
        return 0

    def state(self, node_id: int) -> DensityMatrix:
        return self._nodes[node_id].state

    def children(self, node_id: int) -> _Children:
        got = self._children.get(node_id)
        if got is not None:
            return got
        with self._lock:
            got = self._children.get(node_id)
            if got is not None:
                return got
            node = self._nodes[node_id]
            stage = node.depth + 1
            state = node.state
            if self._hook is not None and node.on_spine:
                state = self._hook(state, stage)
            coupled = couple_all(tensor(state, _ANCILLA_GROUND),
                                 self._config.schedule.for_round(stage))
            probs = np.zeros(_N_OUTCOMES)
            child_ids = np.full(_N_OUTCOMES, -1, dtype=np.int64)
            for branch in measure(coupled, [3, 4, 5]):
                idx = sum(int(ch) << i for i, ch in enumerate(branch.outcome))
                probs[idx] = branch.probability
                self._nodes.append(_Node(
                    partial_trace(branch.post_state, (0, 1, 2)),
                    node.depth + 1,
                    node.on_spine and idx == 0))
                child_ids[idx] = len(self._nodes) - 1
            got = _Children(probs, np.cumsum(probs), child_ids)
            self._children[node_id] = got
            return got

    def strong(self, node_id: int) -> _StrongInfo:
        got = self._strong.get(node_id)
        if got is not None:
            return got
        with self._lock:
            got = self._strong.get(node_id)
            if got is not None:
                return got
            node = self._nodes[node_id]
            state = node.state
            if self._hook is not None and node.on_spine:
                state = self._hook(state, self._n_rounds + 1)
            p_one = 0.0
            pair = None
            for branch in strong_measure_party(state, self._config.strong_party):
                if branch.outcome == "1":
                    p_one = branch.probability
                    pair = as_density_matrix(branch.post_state)
            got = _StrongInfo(p_one, pair)
            self._strong[node_id] = got
            return got

    def pair_state(self, node_id: int, fired_party: int) -> DensityMatrix:
        key = (node_id, fired_party)
        got = self._pairs.get(key)
        if got is not None:
            return got
        with self._lock:
            got = self._pairs.get(key)
            if got is not None:
                return got
            got = partial_trace(self._nodes[node_id].state,
                                pair_parties(fired_party))
            self._pairs[key] = got
            return got


def _sample_trial(tree: _TrajectoryTree, plan: ShotPlan,
                  readout: Optional[ReadoutModel], n_rounds: int,
                  trial_index: int) -> SampledTrial:
    """Draw one trial's shots and aggregate its records.

    The uniform table has one row per shot: columns ``0..n-1`` drive the
    round outcomes, column ``n`` the strong bit, and the remaining ``3n``
    columns the per-round readout flips, so adding or removing a readout
    model never disturbs the outcome draws.
    """
    shots = plan.shots_per_trial
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(plan.master_seed, spawn_key=(trial_index,))))
    u = rng.random((shots, n_rounds + 1 + 3 * n_rounds))
    active = np.arange(shots)
    node_ids = np.full(shots, tree.root, dtype=np.int64)
    if readout is not None:
        p01 = np.asarray(readout.p01, dtype=float)
        p10 = np.asarray(readout.p10, dtype=float)

    round_tables = []
    cond_states: list = []
    cond_shots: list = []
    pair_states: list = []
    pair_shots: list = []
    for k in range(n_rounds):
        if active.size == 0:
            round_tables.append(CountsTable({}, 0.0, 3))
            cond_states.append(None)
            cond_shots.append(0)
            pair_states.append(None)
            pair_shots.append(0)
            continue
        ids = node_ids[active]
        uniq, inverse = np.unique(ids, return_inverse=True)
        true_out = np.empty(active.size, dtype=np.int64)
        next_ids = np.empty(active.size, dtype=np.int64)
        draws = u[active, k]
        for gi, nid in enumerate(uniq):
            ch = tree.children(int(nid))
            sel = inverse == gi
            idx = np.searchsorted(ch.cdf, draws[sel] * ch.cdf[-1], side="right")
            idx = np.minimum(idx, _N_OUTCOMES - 1)
            true_out[sel] = idx
            next_ids[sel] = ch.child_ids[idx]
        if readout is None:
            observed = true_out
        else:
            observed = np.zeros_like(true_out)
            for j in range(3):
                bit = (true_out >> j) & 1
                threshold = np.where(bit == 1, p10[j], p01[j])
                flip = (u[active, n_rounds + 1 + 3 * k + j]
                        < threshold).astype(np.int64)
                observed |= (bit ^ flip) << j
        round_tables.append(CountsTable.from_vector(
            np.bincount(observed, minlength=_N_OUTCOMES).astype(float), 3))
        node_ids[active] = next_ids

        pair_acc = np.zeros((4, 4), dtype=complex)
        n_pairs = 0
        for obs_idx, party in _ONE_HOT.items():
            flagged = node_ids[active[observed == obs_idx]]
            if flagged.size == 0:
                continue
            n_pairs += int(flagged.size)
            for nid, count in zip(*np.unique(flagged, return_counts=True)):
                pair_acc += count * tree.pair_state(int(nid), party).elements
        pair_states.append(DensityMatrix(pair_acc / n_pairs) if n_pairs else None)
        pair_shots.append(n_pairs)

        active = active[observed == 0]
        if active.size:
            w_acc = np.zeros((8, 8), dtype=complex)
            for nid, count in zip(*np.unique(node_ids[active], return_counts=True)):
                w_acc += count * tree.state(int(nid)).elements
            cond_states.append(DensityMatrix(w_acc / active.size))
        else:
            cond_states.append(None)
        cond_shots.append(int(active.size))

    ones = 0
    strong_pair_acc = np.zeros((4, 4), dtype=complex)
    n_strong_pairs = 0
    if active.size:
        ids = node_ids[active]
        uniq, inverse = np.unique(ids, return_inverse=True)
        draws = u[active, n_rounds]
        for gi, nid in enumerate(uniq):
            info = tree.strong(int(nid))
            wins = int(np.count_nonzero(draws[inverse == gi] < info.p_one))
            if wins:
                ones += wins
                strong_pair_acc += wins * info.pair.elements
                n_strong_pairs += wins
    strong_table = CountsTable.from_vector(
        np.array([active.size - ones, ones], dtype=float), 1)
    return SampledTrial(
        rounds=tuple(round_tables),
        strong=strong_table,
        conditioned_w=tuple(cond_states),
        conditioned_w_shots=tuple(cond_shots),
        pair_states=tuple(pair_states),
        pair_shots=tuple(pair_shots),
        strong_pair_state=(DensityMatrix(strong_pair_acc / n_strong_pairs)
                           if n_strong_pairs else None),
        strong_pair_shots=n_strong_pairs)


def sample_protocol(config: ProtocolConfig, plan: ShotPlan,
                    noise: Optional[NoisyWParams] = None,
                    readout: Optional[ReadoutModel] = None,
                    workers: int = 1) -> tuple:
    """Simulate the protocol shot by shot and return one record per trial.

    Parameters
    ----------
    config : ProtocolConfig
        Protocol to sample.  The random-party and deferred variants share
        the same outcome statistics, so both are sampled with the same
        per-round trajectory model; the specific-party variant skips the
        weak rounds and draws only the strong bit.
    plan : ShotPlan
        Shot count, trial count and master seed.
    noise : NoisyWParams, optional
        Imperfect preparation (and, via its schedule, between-stage
        degradation) of the shared state.  A degradation law may come from
        either ``config.stage_hook`` or the noise schedule, not both.
    readout : ReadoutModel, optional
        3-bit classical flip model applied to each round's recorded
        ancilla pattern.  The strong bit is recorded faithfully.
    workers : int
        Worker threads used to run trials concurrently.  Results are
        bit-identical for any value.

    Returns
    -------
    tuple of SampledTrial
        Trial records ordered by trial index.
    """
    if readout is not None and readout.n_qubits != 3:
        raise InvalidArgumentError(
            "readout model must cover the 3 per-round ancilla bits")
    if workers < 1:
        raise InvalidArgumentError("workers must be at least 1")
    if noise is not None:
        initial = noise.prepared_state()
        noise_hook = noise.stage_hook()
    else:
        initial = prepare_w(3)
        noise_hook = None
    hook = config.stage_hook
    if hook is not None and noise_hook is not None:
        raise ConfigError(
            "give the degradation either as config.stage_hook or as the "
            "noise schedule, not both")
    if hook is None:
        hook = noise_hook
    if config.variant is Variant.SPECIFIC_PARTY:
        if hook is not None:
            raise ConfigError(
                "stage hooks are not supported for the specific-party variant")
        n_rounds = 0
    else:
        if config.variant is Variant.NO_MCM and hook is not None:
            raise ConfigError("stage_hook is not supported in the deferred variant")
        n_rounds = config.n_rounds

    tree = _TrajectoryTree(config, initial, hook, n_rounds)
    if workers == 1 or plan.trials == 1:
        return tuple(_sample_trial(tree, plan, readout, n_rounds, t)
                     for t in range(plan.trials))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sample_trial, tree, plan, readout, n_rounds, t)
                   for t in range(plan.trials)]
        return tuple(f.result() for f in futures)


def _binomial_sigma(mean: float, denominator: float) -> Optional[float]:
    if denominator <= 0.0:
        return None
    p = min(max(mean, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / denominator)


def _trial_estimate(values, denominator: float) -> EstimateWithError:
    values = np.asarray(values, dtype=float)
    trials = int(values.size)
    mean = float(values.mean())
    sigma = float(np.std(values, ddof=1)) if trials > 1 else float("nan")
    return EstimateWithError(mean, sigma, trials,
                             analytic_sigma=_binomial_sigma(mean, denominator))


def estimate_rate(trials: Sequence[SampledTrial], mitigated: bool = False,
                  readout: Optional[ReadoutModel] = None) -> RateEstimates:
    """Reduce sampled trials to trial-averaged protocol rates.

    Each trial is assembled on its own — per-round survival and one-hot
    fractions are read off its (optionally mitigated) histograms, chained
    into unconditional probabilities and summed with the strong term —
    and the mean and sample standard deviation are taken across trials.
    ``p_strong`` is reported unconditionally, matching how the per-round
    probabilities combine into ``p_success``.

    With ``mitigated=True`` the per-round histograms are corrected with
    the inverse confusion model (negative weights clamped away) before
    the fractions are read off; ``readout`` must then be given.
    """
    trials = tuple(trials)
    if not trials:
        raise DataError("need at least one sampled trial")
    n_rounds = len(trials[0].rounds)
    if any(len(t.rounds) != n_rounds for t in trials):
        raise DataError("trials disagree on the number of rounds")
    if mitigated:
        if readout is None:
            raise InvalidArgumentError("mitigation requires a readout model")
        if readout.n_qubits != 3:
            raise InvalidArgumentError(
                "readout model must cover the 3 per-round ancilla bits")

    n_trials = len(trials)
    p_w_values = np.empty((n_trials, n_rounds))
    p_epr_given_w_values = np.empty((n_trials, n_rounds))
    p_strong_values = np.empty(n_trials)
    p_success_values = np.empty(n_trials)
    for t, trial in enumerate(trials):
        survival = 1.0
        p_epr_rounds = []
        p_w_cumulative = []
        for k, table in enumerate(trial.rounds):
            if table.shots <= 0:
                raise DataError(
                    f"round {k + 1} has no recorded shots; the estimate is undefined")
            if mitigated:
                table = mitigate_readout(readout, table, clamp=True)
            vec = table.vector()
            total = float(vec.sum())
            quiet = float(vec[0]) / total
            one_hot = float(vec[1] + vec[2] + vec[4]) / total
            p_epr_rounds.append(survival * one_hot)
            survival *= quiet
            p_w_cumulative.append(survival)
            p_epr_given_w_values[t, k] = one_hot
            p_w_values[t, k] = survival
        if trial.strong.shots <= 0:
            raise DataError(
                "no shots reached the strong measurement; the estimate is undefined")
        strong_one = (float(trial.strong.counts.get("1", 0.0))
                      / float(trial.strong.shots))
        p_strong_values[t] = survival * strong_one
        p_success_values[t] = assemble_success_probability(
            p_epr_rounds, p_w_cumulative, p_strong_values[t],
            StrongConvention.UNCONDITIONAL)

    total_shots = float(sum(
        (t.rounds[0].shots if n_rounds else t.strong.shots) for t in trials))
    live_shots = [float(sum(t.rounds[k].shots for t in trials))
                  for k in range(n_rounds)]
    return RateEstimates(
        p_w=tuple(_trial_estimate(p_w_values[:, k], total_shots)
                  for k in range(n_rounds)),
        p_epr_given_w=tuple(_trial_estimate(p_epr_given_w_values[:, k],
                                            live_shots[k])
                            for k in range(n_rounds)),
        p_strong=_trial_estimate(p_strong_values, total_shots),
        p_success=_trial_estimate(p_success_values, total_shots),
        mitigated=bool(mitigated))


def _check_round_index(round_index: int, n_rounds: int) -> None:
    if not 1 <= round_index <= n_rounds:
        raise InvalidArgumentError(
            f"round index {round_index} outside 1..{n_rounds}")


def _exact_conditioned_fidelity(result: ProtocolResult, target: Statevector,
                                round_index: Optional[int]) -> EstimateWithError:
    n_rounds = result.n_rounds
    if target.n_qubits == 3:
        k = n_rounds if round_index is None else round_index
        _check_round_index(k, n_rounds)
        state = result.rounds[k - 1].w_state_after
        if state is None:
            raise DataError(f"no branch survives past round {k}")
        value = fidelity(state, target)
    elif round_index is None:
        record = result.strong_record
        if record is None or record.distilled_state is None or record.p_epr <= 0.0:
            raise DataError("the strong measurement never succeeds")
        value = fidelity(record.distilled_state, target)
    else:
        _check_round_index(round_index, n_rounds)
        record = result.rounds[round_index - 1]
        acc = np.zeros((4, 4), dtype=complex)
        weight = 0.0
        for party, p in enumerate(record.p_epr_by_party):
            state = record.distilled_states.get(party)
            if state is None or p <= 0.0:
                continue
            acc += p * as_density_matrix(state).elements
            weight += p
        if weight <= 0.0:
            raise DataError(f"no pair branch has weight in round {round_index}")
        value = fidelity(DensityMatrix(acc / weight), target)
    return EstimateWithError(float(value), 0.0, 1, analytic=True)


def conditioned_fidelity(source: Union[ProtocolResult, Sequence[SampledTrial]],
                         target: Statevector,
                         round_index: Optional[int] = None) -> EstimateWithError:
    """Fidelity of a post-selected state against a target.

    A 3-qubit target selects the register state conditioned on quiet
    records through ``round_index`` (default: the last round).  A 2-qubit
    target selects the kept pair: the strong-measurement branch when
    ``round_index`` is None, otherwise the pairs first flagged in that
    round (pooled over the three one-hot patterns by their weight).

    Exact enumeration (``source`` a :class:`ProtocolResult`) returns the
    analytic conditional fidelity with ``sigma=0`` flagged ``analytic``;
    sampled trials return the mean and sample sigma over the trials whose
    post-selected set is non-empty.  An empty post-selection in every
    trial is an error.
    """
    if not isinstance(target, Statevector):
        raise InvalidArgumentError("target must be a Statevector")
    if target.n_qubits not in (2, 3):
        raise InvalidArgumentError(
            "target must describe the 3-qubit register or a 2-qubit pair")
    if abs(target.norm_squared() - 1.0) > tol.ATOL_FIDELITY_CLAMP:
        raise InvalidArgumentError("target must be normalized")
    if isinstance(source, ProtocolResult):
        return _exact_conditioned_fidelity(source, target, round_index)

    trials = tuple(source)
    if not trials:
        raise DataError("need at least one sampled trial")
    if not all(isinstance(t, SampledTrial) for t in trials):
        raise InvalidArgumentError(
            "source must be a ProtocolResult or sampled trials")
    n_rounds = len(trials[0].rounds)
    if target.n_qubits == 3:
        k = n_rounds if round_index is None else round_index
        _check_round_index(k, n_rounds)
        states = [t.conditioned_w[k - 1] for t in trials]
    elif round_index is None:
        states = [t.strong_pair_state for t in trials]
    else:
        _check_round_index(round_index, n_rounds)
        states = [t.pair_states[round_index - 1] for t in trials]
    values = [fidelity(s, target) for s in states if s is not None]
    if not values:
        raise DataError("post-selection left no shots in any trial")
    sigma = float(np.std(values, ddof=1)) if len(values) > 1 else float("nan")
    return EstimateWithError(float(np.mean(values)), sigma, len(values))
