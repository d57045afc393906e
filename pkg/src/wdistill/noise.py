"""White-noise channels and readout-error modeling/mitigation.

Noise enters the simulation in exactly two places:

* **State noise** — convex mixing with the maximally mixed state, both
  for preparing an imperfect shared state (:func:`noisy_w`) and for
  degrading the surviving branch between protocol stages
  (:func:`degrade_between_rounds`, :func:`make_fidelity_ramp`).
* **Readout noise** — independent per-qubit bit flips described by a
  tensor-product confusion model (:class:`ReadoutModel`), with the
  standard inverse-confusion mitigation (:func:`mitigate_readout`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import tolerances as tol
from .circuit import prepare_w
from .errors import (
    DataError,
    InvalidArgumentError,
    NumericalDomainError,
)
from .qstate import DensityMatrix, fidelity
from .protocol import StageHook

_W_STATE = prepare_w(3)
_MIXED_FLOOR = 1.0 / 8.0   # fidelity of the maximally mixed 3-qubit state to W


def noisy_w(p: float) -> DensityMatrix:
    """Imperfect shared state: ``(1-p) |W><W| + p/8 * identity``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"depolarizing weight {p} outside [0, 1]")
    ideal = _W_STATE.to_density_matrix().elements
    return DensityMatrix((1.0 - p) * ideal + p * np.eye(8) / 8.0)


def depolarizing_weight_for_fidelity(target_fidelity: float) -> float:
    """Invert ``F = (1-p) + p/8`` for the weight giving that fidelity."""
    if not _MIXED_FLOOR <= target_fidelity <= 1.0:
        raise InvalidArgumentError(
            f"no depolarizing weight reaches fidelity {target_fidelity}")
    return (1.0 - target_fidelity) * 8.0 / 7.0


def degrade_between_rounds(state: DensityMatrix, p_k: float) -> DensityMatrix:
    """Mix a state with the maximally mixed one at weight ``p_k``.

    Same channel form as :func:`noisy_w`, applied to an arbitrary state;
    trace- and positivity-preserving for all valid weights.
    """
    if not 0.0 <= p_k <= 1.0:
        raise InvalidArgumentError(f"depolarizing weight {p_k} outside [0, 1]")
    dim = state.dim
    return DensityMatrix((1.0 - p_k) * state.elements + p_k * np.eye(dim) / dim)


def degrade_to_fidelity(state: DensityMatrix,
                        target_fidelity: float) -> DensityMatrix:
    """Degrade a 3-party state until its overlap with the ideal shared
    state drops to ``target_fidelity``.

    The mixing weight solves ``(1-p)*F_cur + p/8 = F_target``.  A state
    already at or below the target is returned unchanged (this channel
    never *improves* fidelity), and the weight saturates at 1 — fidelity
    cannot be pushed below the maximally-mixed floor of 1/8.
    """
    if state.n_qubits != 3:
        raise InvalidArgumentError("fidelity-targeted degradation needs 3 qubits")
    f_cur = fidelity(state, _W_STATE)
    if f_cur <= target_fidelity:
        return state
    denom = f_cur - _MIXED_FLOOR
    if denom <= 0.0:
        return state
    p_k = min(1.0, (f_cur - target_fidelity) / denom)
    return degrade_between_rounds(state, p_k)


def make_fidelity_ramp(initial_fidelity: float,
                       fidelity_step: float) -> StageHook:
    """Stage hook: before stage ``k`` the surviving state is degraded to
    fidelity ``initial_fidelity - k * fidelity_step``.

    With the defaults used throughout (initial 0.97, step 0.07) the state
    entering round 1 sits at fidelity 0.90, and each later stage —
    including the final strong measurement — starts another step lower.
    """
    if not _MIXED_FLOOR < initial_fidelity <= 1.0:
        raise InvalidArgumentError(
            f"initial fidelity {initial_fidelity} outside (1/8, 1]")
    if fidelity_step < 0.0:
        raise InvalidArgumentError("fidelity step must be >= 0")

    def hook(state: DensityMatrix, stage_index: int) -> DensityMatrix:
        target = initial_fidelity - stage_index * fidelity_step
        return degrade_to_fidelity(state, max(target, _MIXED_FLOOR))

    return hook


def make_depolarizing_schedule(p_values) -> StageHook:
    """Stage hook applying a fixed per-stage mixing weight.

    ``p_values[k-1]`` is used before stage ``k``; stages beyond the end
    of the list pass through unchanged.
    """
    weights = tuple(float(p) for p in p_values)
    for p in weights:
        if not 0.0 <= p <= 1.0:
            raise InvalidArgumentError(f"depolarizing weight {p} outside [0, 1]")

    def hook(state: DensityMatrix, stage_index: int) -> DensityMatrix:
        if 1 <= stage_index <= len(weights):
            return degrade_between_rounds(state, weights[stage_index - 1])
        return state

    return hook


@dataclass(frozen=True)
class NoisyWParams:
    """Preparation noise plus an optional per-stage degradation schedule.

    :param p: depolarizing weight of the prepared shared state
    :param schedule: optional per-stage mixing weights (stage k uses
        entry k-1); None means no between-stage degradation
    """

    p: float
    schedule: Optional[tuple] = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidArgumentError(f"depolarizing weight {self.p} outside [0, 1]")
        if self.schedule is not None:
            sched = tuple(float(v) for v in self.schedule)
            object.__setattr__(self, "schedule", sched)
            for v in sched:
                if not 0.0 <= v <= 1.0:
                    raise InvalidArgumentError(
                        f"schedule weight {v} outside [0, 1]")

    def prepared_state(self) -> DensityMatrix:
        return noisy_w(self.p)

    def stage_hook(self) -> Optional[StageHook]:
        if self.schedule is None:
            return None
        return make_depolarizing_schedule(self.schedule)


# ---------------------------------------------------------------------------
# Readout error model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReadoutModel:
    """Independent per-qubit classical bit-flip model.

    :param p01: per-qubit probability that a true 0 is read as 1
    :param p10: per-qubit probability that a true 1 is read as 0

    Qubit ``i`` of the model corresponds to character ``i`` of the bit
    strings it is applied to.
    """

    p01: tuple
    p10: tuple

    def __post_init__(self):
        p01 = tuple(float(v) for v in self.p01)
        p10 = tuple(float(v) for v in self.p10)
        object.__setattr__(self, "p01", p01)
        object.__setattr__(self, "p10", p10)
        if len(p01) != len(p10):
            raise InvalidArgumentError("p01 and p10 must cover the same qubits")
        if not p01:
            raise InvalidArgumentError("model must cover at least one qubit")
        for v in p01 + p10:
            if not 0.0 <= v <= 0.5:
                raise InvalidArgumentError(f"flip probability {v} outside [0, 0.5]")

    @classmethod
    def symmetric(cls, rates) -> "ReadoutModel":
        rates = tuple(float(r) for r in rates)
        return cls(rates, rates)

    @classmethod
    def ideal(cls, n_qubits: int) -> "ReadoutModel":
        return cls((0.0,) * n_qubits, (0.0,) * n_qubits)

    @property
    def n_qubits(self) -> int:
        return len(self.p01)

    def confusion_matrix(self, qubit: int) -> np.ndarray:
        """2x2 column-stochastic matrix ``C[observed, true]``."""
        a, b = self.p01[qubit], self.p10[qubit]
        return np.array([[1.0 - a, b], [a, 1.0 - b]])

    def mitigation_matrix(self, qubit: int) -> np.ndarray:
        c = self.confusion_matrix(qubit)
        det = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
        if det <= 1e-12:
            raise NumericalDomainError(
                f"confusion matrix for qubit {qubit} is singular")
        return np.array([[c[1, 1], -c[0, 1]], [-c[1, 0], c[0, 0]]]) / det


def default_ancilla_model() -> ReadoutModel:
    """Bundled 3-qubit calibration with realistic ancilla flip rates."""
    return ReadoutModel.symmetric((0.0244, 0.0310, 0.0259))


def save_readout_model(model: ReadoutModel, path) -> None:
    """Write a model as a plain-text key-value document."""
    lines = [f"qubits = {model.n_qubits}"]
    for q in range(model.n_qubits):
        lines.append(f"q{q}_p01 = {model.p01[q]!r}")
        lines.append(f"q{q}_p10 = {model.p10[q]!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_readout_model(path) -> ReadoutModel:
    """Read a model written by :func:`save_readout_model`."""
    entries = {}
    for raw_line in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"malformed line in readout model file: {raw_line!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    try:
        n = int(entries.pop("qubits"))
        p01 = [float(entries.pop(f"q{q}_p01")) for q in range(n)]
        p10 = [float(entries.pop(f"q{q}_p10")) for q in range(n)]
    except KeyError as exc:
        raise DataError(f"readout model file missing entry {exc}") from exc
    if entries:
        raise DataError(f"unexpected entries in readout model file: {sorted(entries)}")
    return ReadoutModel(tuple(p01), tuple(p10))


# ---------------------------------------------------------------------------
# Counts tables and mitigation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountsTable:
    """Histogram over fixed-width bit strings.

    Raw tables hold non-negative integers summing to ``shots``; mitigated
    tables hold real weights (possibly negative) with the same total.
    """

    counts: dict
    shots: float
    width: int

    def __post_init__(self):
        counts = dict(self.counts)
        object.__setattr__(self, "counts", counts)
        for key in counts:
            if len(key) != self.width or any(ch not in "01" for ch in key):
                raise DataError(f"bad bit string {key!r} for width {self.width}")
        total = float(sum(counts.values()))
        if abs(total - self.shots) > tol.ATOL_MITIGATION_WEIGHT * max(1.0, self.shots):
            raise DataError(
                f"counts sum to {total}, expected {self.shots} shots")

    def vector(self) -> np.ndarray:
        """Dense weight vector, bit ``i`` of the index = character ``i``."""
        v = np.zeros(2 ** self.width)
        for key, c in self.counts.items():
            v[_string_to_index(key)] += c
        return v

    @classmethod
    def from_vector(cls, vec: np.ndarray, width: int,
                    keep_zeros: bool = False) -> "CountsTable":
        vec = np.asarray(vec)
        if vec.shape != (2 ** width,):
            raise InvalidArgumentError(
                f"need {2 ** width} entries for width {width}, "
                f"got shape {vec.shape}")
        counts = {}
        for k, val in enumerate(vec):
            if keep_zeros or val != 0.0:
                counts[_index_to_string(k, width)] = float(val)
        return cls(counts, float(np.sum(vec)), width)


def _string_to_index(bits: str) -> int:
    return sum(int(ch) << i for i, ch in enumerate(bits))


def _index_to_string(index: int, width: int) -> str:
    return "".join(str((index >> i) & 1) for i in range(width))


def apply_readout(model: ReadoutModel, counts: CountsTable,
                  rng_seed: int) -> CountsTable:
    """Sample what the noisy readout would report for each recorded shot.

    Every shot's bits flip independently with the model's per-qubit
    probabilities; the draw is deterministic for a given seed (keys are
    processed in sorted order from a counter-based generator).
    """
    if model.n_qubits != counts.width:
        raise InvalidArgumentError(
            f"model covers {model.n_qubits} qubits, table is {counts.width} wide")
    rng = np.random.Generator(np.random.Philox(rng_seed))
    width = counts.width
    out = np.zeros(2 ** width)
    for key in sorted(counts.counts):
        c = counts.counts[key]
        c_int = int(round(c))
        if abs(c - c_int) > 1e-9 or c_int < 0:
            raise InvalidArgumentError(
                f"apply_readout needs non-negative integer counts, got {c!r}")
        if c_int == 0:
            continue
        probs = _product_distribution(model, key)
        out += rng.multinomial(c_int, probs)
    return CountsTable.from_vector(out, width)


def _product_distribution(model: ReadoutModel, true_bits: str) -> np.ndarray:
    """P(observed index | true string) under independent per-qubit flips."""
    probs = np.ones(1)
    for i, ch in enumerate(true_bits):
        col = model.confusion_matrix(i)[:, int(ch)]
        # index bit i = character i, so qubit i is the next-faster axis:
        # new[j + b << i] = old[j] * col[b]
        probs = np.concatenate([probs * col[0], probs * col[1]])
    return probs


def mitigate_readout(model: ReadoutModel, counts: CountsTable,
                     clamp: bool = False) -> CountsTable:
    """Invert the confusion model on a counts table.

    Applies the tensor product of per-qubit inverse confusion matrices to
    the dense counts vector.  The raw result can carry small negative
    weights; ``clamp=True`` instead zeroes negatives and rescales so the
    total weight is preserved.
    """
    if model.n_qubits != counts.width:
        raise InvalidArgumentError(
            f"model covers {model.n_qubits} qubits, table is {counts.width} wide")
    width = counts.width
    v = counts.vector().reshape((2,) * width)
    for q in range(width):
        inv = model.mitigation_matrix(q)
        axis = width - 1 - q   # index bit q = character q sits on this axis
        v = np.moveaxis(np.tensordot(inv, v, axes=([1], [axis])), 0, axis)
    vec = v.reshape(-1)
    if clamp:
        clamped = np.clip(vec, 0.0, None)
        total = float(np.sum(clamped))
        if total <= 0.0:
            raise NumericalDomainError("clamping removed all mitigated weight")
        vec = clamped * (float(np.sum(vec)) / total)
    return CountsTable.from_vector(vec, width)
