"""Minimal gate set, W-state preparation, and projective measurement.

Gates are dense unitaries applied by tensor contraction, so statevector
registers up to a dozen qubits stay cheap.  Measurements return every
branch with its exact probability (no sampling here — see ``stats`` for
shot-based estimation).

Register layout used throughout the protocol: parties a, b, c are qubits
0, 1, 2; their ancillas are qubits 3, 4, 5.  The controlled-RY weak
coupling has the *system* qubit as control and the ancilla as target:
``|0>_anc |1>_sys -> sqrt(1-eps^2) |01> + eps |11>`` at coupling strength
``eps`` (rotation angle ``theta = 2*arcsin(eps)``), and does nothing when
the system qubit is ``|0>``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import tolerances as tol
from .errors import (
    InvalidArgumentError,
    InvalidStateError,
    PreconditionError,
    UnsupportedError,
)
from .qstate import DensityMatrix, QuantumState, Statevector, partial_trace


class OpKind(enum.Enum):
    RY = "ry"
    CRY = "cry"
    CNOT = "cnot"
    X = "x"
    W_PREP = "w_prep"
    PROJECTOR_F = "projector_f"   # |0><0| on one qubit
    PROJECTOR_G = "projector_g"   # |1><1| on one qubit


_UNITARY_KINDS = {OpKind.RY, OpKind.CRY, OpKind.CNOT, OpKind.X}


@dataclass(frozen=True)
class CircuitOp:
    """A gate or projector bound to qubit indices.

    :param kind: operation type
    :param targets: target qubit indices
    :param controls: control qubit indices (CRY/CNOT only)
    :param angle: rotation angle in radians (RY/CRY only)
    """

    kind: OpKind
    targets: tuple
    controls: tuple = ()
    angle: float | None = None

    def __post_init__(self):
        targets = tuple(int(q) for q in self.targets)
        controls = tuple(int(q) for q in self.controls)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "controls", controls)
        if set(targets) & set(controls):
            raise InvalidArgumentError(
                f"targets {targets} and controls {controls} overlap")
        if len(set(targets)) != len(targets):
            raise InvalidArgumentError(f"duplicate targets {targets}")
        n_t, n_c = len(targets), len(controls)
        kind = self.kind
        if kind in (OpKind.RY, OpKind.X, OpKind.PROJECTOR_F, OpKind.PROJECTOR_G):
            if n_t != 1 or n_c != 0:
                raise InvalidArgumentError(f"{kind.value} takes 1 target, 0 controls")
        elif kind in (OpKind.CRY, OpKind.CNOT):
            if n_t != 1 or n_c != 1:
                raise InvalidArgumentError(f"{kind.value} takes 1 target, 1 control")
        elif kind is OpKind.W_PREP:
            if n_t != 3 or n_c != 0:
                raise InvalidArgumentError("w_prep takes 3 targets, 0 controls")
        if kind in (OpKind.RY, OpKind.CRY):
            if self.angle is None or not math.isfinite(self.angle):
                raise InvalidArgumentError(f"{kind.value} needs a finite angle")
        elif self.angle is not None:
            raise InvalidArgumentError(f"{kind.value} takes no angle")

    # -- constructors -------------------------------------------------

    @classmethod
    def ry(cls, angle: float, target: int) -> "CircuitOp":
        return cls(OpKind.RY, (target,), angle=angle)

    @classmethod
    def cry(cls, angle: float, control: int, target: int) -> "CircuitOp":
        return cls(OpKind.CRY, (target,), (control,), angle=angle)

    @classmethod
    def cry_from_strength(cls, epsilon: float, control: int,
                          target: int) -> "CircuitOp":
        """CRY at angle ``2*arcsin(epsilon)`` for strength in [0, 1]."""
        if not 0.0 <= epsilon <= 1.0:
            raise InvalidArgumentError(
                f"coupling strength {epsilon} outside [0, 1]")
        return cls.cry(2.0 * math.asin(epsilon), control, target)

    @classmethod
    def cnot(cls, control: int, target: int) -> "CircuitOp":
        return cls(OpKind.CNOT, (target,), (control,))

    @classmethod
    def x(cls, target: int) -> "CircuitOp":
        return cls(OpKind.X, (target,))

    @classmethod
    def w_prep(cls, targets=(0, 1, 2)) -> "CircuitOp":
        return cls(OpKind.W_PREP, tuple(targets))

    @classmethod
    def projector_f(cls, target: int) -> "CircuitOp":
        """Keep the ``|0>`` component of one qubit (unnormalized)."""
        return cls(OpKind.PROJECTOR_F, (target,))

    @classmethod
    def projector_g(cls, target: int) -> "CircuitOp":
        """Keep the ``|1>`` component of one qubit (unnormalized)."""
        return cls(OpKind.PROJECTOR_G, (target,))

    # -- matrix forms --------------------------------------------------

    def matrix(self) -> np.ndarray:
        """Dense matrix on the op's qubits, control as the high bit."""
        k = self.kind
        if k is OpKind.RY or k is OpKind.CRY:
            half = self.angle / 2.0
            u = np.array([[math.cos(half), -math.sin(half)],
                          [math.sin(half), math.cos(half)]], dtype=complex)
        elif k is OpKind.X or k is OpKind.CNOT:
            u = np.array([[0, 1], [1, 0]], dtype=complex)
        elif k is OpKind.PROJECTOR_F:
            return np.diag([1.0, 0.0]).astype(complex)
        elif k is OpKind.PROJECTOR_G:
            return np.diag([0.0, 1.0]).astype(complex)
        else:
            raise InvalidArgumentError(f"{k.value} has no fixed matrix form")
        if k in (OpKind.CRY, OpKind.CNOT):
            p0 = np.diag([1.0, 0.0]).astype(complex)
            p1 = np.diag([0.0, 1.0]).astype(complex)
            return np.kron(p0, np.eye(2, dtype=complex)) + np.kron(p1, u)
        return u


def _apply_operator(tensor_arr: np.ndarray, u: np.ndarray, axes) -> np.ndarray:
    """Contract a k-qubit operator into the given tensor axes (MSB first)."""
    k = len(axes)
    u_t = u.reshape((2,) * (2 * k))
    res = np.tensordot(u_t, tensor_arr, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(res, range(k), axes)


def apply(op: CircuitOp, state: QuantumState) -> QuantumState:
    """Apply a gate or projector, returning a new state of the same type.

    Unitary ops preserve norm; projector ops return the raw (unnormalized)
    projected state — renormalization is the measurement layer's job.
    """
    n = state.n_qubits
    qubits = op.controls + op.targets
    for q in qubits:
        if not 0 <= q < n:
            raise InvalidArgumentError(f"qubit {q} out of range for {n}-qubit state")

    if op.kind is OpKind.W_PREP:
        return _apply_w_prep(op, state)

    u = op.matrix()
    # tensor axis for qubit q is (n-1-q); op.matrix() puts the control on
    # the high bit, so list control's axis first.
    axes = [n - 1 - q for q in qubits]
    if isinstance(state, Statevector):
        t = state.amplitudes.reshape((2,) * n)
        out = _apply_operator(t, u, axes)
        return Statevector(out.reshape(-1))
    t = state.elements.reshape((2,) * (2 * n))
    out = _apply_operator(t, u, axes)
    out = _apply_operator(out, u.conj(), [n + ax for ax in axes])
    return DensityMatrix(out.reshape(2 ** n, 2 ** n))


def _apply_w_prep(op: CircuitOp, state: QuantumState) -> QuantumState:
    """Preparation macro: replaces a 3-qubit ground register with the W state."""
    if state.n_qubits != 3 or op.targets != (0, 1, 2):
        raise PreconditionError(
            "w_prep macro requires a 3-qubit register with targets (0, 1, 2)")
    if isinstance(state, Statevector):
        if abs(abs(state.amplitudes[0]) ** 2 - 1.0) > tol.ATOL_NORM:
            raise PreconditionError("w_prep macro requires the ground state")
        return prepare_w(3)
    if abs(float(state.elements[0, 0].real) - 1.0) > tol.ATOL_NORM:
        raise PreconditionError("w_prep macro requires the ground state")
    return prepare_w(3).to_density_matrix()


def prepare_w(n_parties: int = 3) -> Statevector:
    """The shared three-party single-excitation-hole state
    ``(|011> + |101> + |110>)/sqrt(3)``.

    Only the three-party case is supported.
    """
    if n_parties != 3:
        raise UnsupportedError("only the 3-party state is supported")
    amps = np.zeros(8, dtype=complex)
    amps[[3, 5, 6]] = 1.0 / math.sqrt(3.0)   # |011>, |101>, |110> little-endian
    return Statevector(amps)


def couple_all(state: QuantumState, epsilon: float) -> QuantumState:
    """Weakly couple each party to its ancilla at strength ``epsilon``.

    Expects a 6-qubit register — parties on qubits 0..2, ancillas on
    qubits 3..5 — with the ancillas in their ground state.
    """
    if state.n_qubits != 6:
        raise InvalidArgumentError(
            f"couple_all needs a 6-qubit register, got {state.n_qubits}")
    if not 0.0 <= epsilon <= 1.0:
        raise InvalidArgumentError(f"coupling strength {epsilon} outside [0, 1]")
    excited = _ancilla_excited_mass(state)
    if excited > tol.ATOL_ANCILLA_GROUND:
        raise PreconditionError(
            f"ancilla register carries population {excited:.3e} outside |000>")
    out = state
    for party in range(3):
        out = apply(CircuitOp.cry_from_strength(epsilon, party, party + 3), out)
    return out


def _ancilla_excited_mass(state: QuantumState) -> float:
    idx = np.arange(2 ** 6)
    outside = (idx >> 3) != 0   # any of bits 3..5 set
    if isinstance(state, Statevector):
        return float(np.sum(np.abs(state.amplitudes[outside]) ** 2))
    return float(np.sum(np.real(np.diagonal(state.elements)[outside])))


@dataclass(frozen=True)
class MeasurementBranch:
    """One outcome of a projective measurement.

    :param outcome: bit string, character ``i`` giving measured qubit ``i``'s value
    :param probability: branch probability
    :param post_state: renormalized post-measurement state
    """

    outcome: str
    probability: float
    post_state: QuantumState


def measure(state: QuantumState, qubits) -> list:
    """Measure the given qubits in the computational basis.

    Returns one :class:`MeasurementBranch` per outcome with probability
    above ``PRUNE_PROBABILITY``, ordered by outcome string.  Post-states
    keep the full register (measured qubits collapsed in place).
    """
    n = state.n_qubits
    qubits = [int(q) for q in qubits]
    if not qubits:
        raise InvalidArgumentError("must measure at least one qubit")
    if len(set(qubits)) != len(qubits):
        raise InvalidArgumentError(f"duplicate qubits {qubits}")
    for q in qubits:
        if not 0 <= q < n:
            raise InvalidArgumentError(f"qubit {q} out of range for {n}-qubit state")

    m = len(qubits)
    dim = 2 ** n
    idx = np.arange(dim)
    # outcome integer: qubits[0] is the most significant character
    keys = np.zeros(dim, dtype=np.int64)
    for pos, q in enumerate(qubits):
        keys |= ((idx >> q) & 1) << (m - 1 - pos)

    if isinstance(state, Statevector):
        weights = np.abs(state.amplitudes) ** 2
    else:
        weights = np.real(np.diagonal(state.elements)).copy()
    total = float(np.sum(weights))
    if total < tol.ATOL_ZERO_STATE:
        raise InvalidStateError("cannot measure a zero state")

    probs = np.bincount(keys, weights=weights, minlength=2 ** m)
    branches = []
    for k in range(2 ** m):
        p = float(probs[k])
        if p < tol.PRUNE_PROBABILITY:
            continue
        outcome = "".join(str((k >> (m - 1 - pos)) & 1) for pos in range(m))
        sel = keys == k
        if isinstance(state, Statevector):
            amps = np.where(sel, state.amplitudes, 0.0) / math.sqrt(p)
            post = Statevector(amps)
        else:
            mask = np.outer(sel, sel)
            post = DensityMatrix(np.where(mask, state.elements, 0.0) / p)
        branches.append(MeasurementBranch(outcome, p, post))
    return branches


def strong_measure_party(state: QuantumState, party: int) -> list:
    """Measure one qubit and drop it from the register.

    Returns branches ordered by outcome ("0" then "1"); each post-state
    lives on the remaining qubits (the measured qubit's value is fixed by
    the branch outcome, so nothing is lost by removing it).
    """
    n = state.n_qubits
    if not 0 <= party < n:
        raise InvalidArgumentError(f"qubit {party} out of range for {n}-qubit state")
    if n < 2:
        raise InvalidArgumentError("need at least one qubit left after removal")
    keep = [q for q in range(n) if q != party]
    out = []
    for branch in measure(state, [party]):
        if isinstance(branch.post_state, Statevector):
            t = branch.post_state.amplitudes.reshape((2,) * n)
            sub = np.take(t, int(branch.outcome), axis=n - 1 - party)
            post = Statevector(sub.reshape(-1))
        else:
            post = partial_trace(branch.post_state, keep)
        out.append(MeasurementBranch(branch.outcome, branch.probability, post))
    return out
