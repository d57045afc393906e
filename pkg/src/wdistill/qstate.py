"""Dense statevectors and density matrices for small qubit registers.

Qubit ordering convention (used by every module in this package):
little-endian — qubit ``q`` is bit ``q`` of the basis-state index, so
qubit 0 is the least-significant bit.  A ket written ``|abc>`` assigns
the leftmost letter to qubit 0: ``|011>`` means qubit0=0, qubit1=1,
qubit2=1 and lives at index ``0 + 2 + 4 = 6``.  Use
:func:`index_of_label` / :func:`label_of_index` rather than hand-rolled
bit twiddling.

All operations are pure functions; the state containers are immutable
after construction and safe to share between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError, NumericalDomainError
from . import tolerances as tol

QUBIT_ORDERING = "little-endian"


def index_of_label(label: str) -> int:
    """Basis index of a ket label, leftmost character = qubit 0."""
    if any(ch not in "01" for ch in label):
        raise InvalidArgumentError(f"not a bit label: {label!r}")
    return sum(int(ch) << pos for pos, ch in enumerate(label))


def label_of_index(index: int, n_qubits: int) -> str:
    """Inverse of :func:`index_of_label`."""
    return "".join(str((index >> q) & 1) for q in range(n_qubits))


def _require_power_of_two(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim <= 0 or (1 << n) != dim:
        raise InvalidStateError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class Statevector:
    """Pure state over ``n_qubits`` qubits as a dense amplitude vector."""

    amplitudes: np.ndarray
    n_qubits: int = field(init=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "n_qubits", _require_power_of_two(amps.size))
        amps.setflags(write=False)

    @classmethod
    def basis_state(cls, n_qubits: int, label_or_index) -> "Statevector":
        idx = (index_of_label(label_or_index)
               if isinstance(label_or_index, str) else int(label_or_index))
        amps = np.zeros(2 ** n_qubits, dtype=complex)
        amps[idx] = 1.0
        return cls(amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm_squared(self) -> float:
        return float(np.real(np.vdot(self.amplitudes, self.amplitudes)))

    def normalized(self) -> "Statevector":
        n2 = self.norm_squared()
        if n2 < tol.ATOL_ZERO_STATE:
            raise InvalidStateError("cannot normalize a zero state")
        return Statevector(self.amplitudes / math.sqrt(n2))

    def validate(self) -> None:
        if abs(self.norm_squared() - 1.0) > tol.ATOL_NORM:
            raise InvalidStateError(
                f"statevector norm² = {self.norm_squared()} is not 1")

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes,
                                      self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state over ``n_qubits`` qubits as a dense matrix."""

    elements: np.ndarray
    n_qubits: int = field(init=False)

    def __post_init__(self):
        m = np.array(self.elements, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidStateError(f"density matrix must be square, got {m.shape}")
        object.__setattr__(self, "elements", m)
        object.__setattr__(self, "n_qubits", _require_power_of_two(m.shape[0]))
        m.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def trace(self) -> float:
        return float(np.real(np.trace(self.elements)))

    def normalized(self) -> "DensityMatrix":
        tr = self.trace()
        if tr < tol.ATOL_ZERO_STATE:
            raise InvalidStateError("cannot normalize a zero-trace matrix")
        return DensityMatrix(self.elements / tr)

    def validate(self) -> None:
        """Full physicality check: hermitian, unit trace, PSD up to tolerance."""
        m = self.elements
        if np.max(np.abs(m - m.conj().T)) > tol.ATOL_HERM:
            raise InvalidStateError("density matrix is not Hermitian")
        if abs(self.trace() - 1.0) > tol.ATOL_TRACE:
            raise InvalidStateError(f"density matrix trace = {self.trace()} is not 1")
        evals = hermitian_eigenvalues(m)
        if evals[-1] < -tol.EIG_CLAMP:
            raise InvalidStateError(
                f"density matrix has eigenvalue {evals[-1]} < -{tol.EIG_CLAMP}")


QuantumState = Statevector | DensityMatrix


def as_density_matrix(state: QuantumState) -> DensityMatrix:
    return state.to_density_matrix() if isinstance(state, Statevector) else state


def tensor(a: QuantumState, b: QuantumState) -> QuantumState:
    """Kronecker composition placing ``a`` on the low qubits.

    The result has ``a.n_qubits + b.n_qubits`` qubits; qubit ``q`` of ``a``
    stays qubit ``q``, qubit ``q`` of ``b`` becomes qubit ``a.n_qubits + q``.
    Mixing a Statevector with a DensityMatrix promotes the result to a
    DensityMatrix.
    """
    if isinstance(a, Statevector) and isinstance(b, Statevector):
        # little-endian: low-qubit factor varies fastest -> kron(high, low)
        return Statevector(np.kron(b.amplitudes, a.amplitudes))
    da, db = as_density_matrix(a), as_density_matrix(b)
    return DensityMatrix(np.kron(db.elements, da.elements))


def partial_trace(rho: QuantumState, keep) -> DensityMatrix:
    """Trace out every qubit not in ``keep``.

    Parameters
    ----------
    rho : DensityMatrix or Statevector
        State on n qubits.
    keep : iterable of int
        Qubit indices to retain.  The result's qubit ``i`` is the i-th
        smallest retained index.

    Returns
    -------
    DensityMatrix on ``len(keep)`` qubits with the same trace.
    """
    rho = as_density_matrix(rho)
    n = rho.n_qubits
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise InvalidArgumentError("keep set must not be empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise InvalidArgumentError(f"keep {keep} out of range for {n} qubits")
    traced = [q for q in range(n) if q not in keep]
    # reshape to one axis per qubit on each side; numpy axis 0 is the
    # most-significant bit, so qubit q sits on axis (half - 1 - q), with
    # `half` the current number of surviving qubits.  Tracing in descending
    # qubit order keeps that formula valid: every qubit below the one being
    # traced is still present, so its axis index is unchanged.
    t = rho.elements.reshape((2,) * (2 * n))
    for q in sorted(traced, reverse=True):
        half = t.ndim // 2
        ax = half - 1 - q
        t = np.trace(t, axis1=ax, axis2=ax + half)
    k = len(keep)
    return DensityMatrix(t.reshape(2 ** k, 2 ** k))


def fidelity(rho: QuantumState, psi: Statevector) -> float:
    """Overlap ``<psi| rho |psi>`` as a real number in [0, 1].

    Values within ``ATOL_FIDELITY_CLAMP`` of the interval boundary are
    clamped; anything further outside raises.
    """
    if rho.n_qubits != psi.n_qubits:
        raise InvalidArgumentError(
            f"dimension mismatch: {rho.n_qubits} vs {psi.n_qubits} qubits")
    if isinstance(rho, Statevector):
        val = abs(np.vdot(psi.amplitudes, rho.amplitudes)) ** 2
    else:
        val = float(np.real(psi.amplitudes.conj() @ rho.elements @ psi.amplitudes))
    if val < -tol.ATOL_FIDELITY_CLAMP or val > 1.0 + tol.ATOL_FIDELITY_CLAMP:
        raise NumericalDomainError(f"fidelity {val} outside [0, 1]")
    return min(1.0, max(0.0, val))


def _jacobi_hermitian(matrix: np.ndarray):
    """Cyclic Jacobi diagonalisation of a complex Hermitian matrix.

    Returns (eigenvalues descending, eigenvector columns).  Dimensions here
    never exceed a few dozen, where the quadratic convergence of Jacobi
    sweeps makes robustness cheap.
    """
    a = np.array(matrix, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(tol.JACOBI_MAX_SWEEPS):
        off = math.sqrt(max(0.0, np.linalg.norm(a) ** 2
                            - np.linalg.norm(np.diagonal(a)) ** 2))
        if off <= tol.JACOBI_SWEEP_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= tol.JACOBI_SWEEP_TOL * scale / n:
                    continue
                phase = apq / r
                theta = 0.5 * math.atan2(2.0 * r,
                                         float(a[p, p].real - a[q, q].real))
                c, s = math.cos(theta), math.sin(theta)
                # unitary plane transform: col_p' = c*phase*col_p + s*col_q,
                # col_q' = -s*phase*col_p + c*col_q  (zeroes a[p,q])
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * phase * col_p + s * col_q
                a[:, q] = -s * phase * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * np.conj(phase) * row_p + s * row_q
                a[q, :] = -s * np.conj(phase) * row_p + c * row_q
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * phase * vp + s * vq
                v[:, q] = -s * phase * vp + c * vq
    evals = np.real(np.diagonal(a)).copy()
    order = np.argsort(evals)[::-1]
    return evals[order], v[:, order]


def hermitian_eigensystem(matrix: np.ndarray):
    """Eigenvalues (descending) and eigenvector columns of a Hermitian matrix."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError(f"matrix must be square, got {m.shape}")
    herm_defect = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if herm_defect > 1e-10:
        raise InvalidArgumentError(
            f"matrix is not Hermitian (defect {herm_defect:.3e})")
    # symmetrise away float dirt below tolerance before sweeping
    return _jacobi_hermitian((m + m.conj().T) / 2.0)


def hermitian_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix, sorted descending."""
    evals, _ = hermitian_eigensystem(matrix)
    return evals


def matrix_sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    """Principal square root of a positive-semidefinite Hermitian matrix.

    Eigenvalues in ``[-EIG_CLAMP, 0)`` are treated as float noise and
    clamped to zero; anything more negative raises
    :class:`NumericalDomainError`.  Positive eigenvalues below
    ``SQRT_SPECTRAL_FLOOR`` relative to the largest are zeroed too — the
    square root would otherwise amplify machine-epsilon dirt into errors
    eight orders of magnitude larger.
    """
    evals, vecs = hermitian_eigensystem(matrix)
    if evals[-1] < -tol.EIG_CLAMP:
        raise NumericalDomainError(
            f"matrix is not PSD: eigenvalue {evals[-1]}")
    floor = tol.SQRT_SPECTRAL_FLOOR * max(evals[0], 0.0)
    clamped = np.where(evals > floor, evals, 0.0)
    return (vecs * np.sqrt(clamped)) @ vecs.conj().T
