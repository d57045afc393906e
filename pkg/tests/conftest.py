"""Shared helpers for the test suite: seeded random states and small oracles."""

import numpy as np

from wdistill import DensityMatrix, Statevector


def random_pure_state(rng, n_qubits=2) -> Statevector:
    """Haar-ish random pure state from a complex Gaussian vector."""
    dim = 2 ** n_qubits
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return Statevector(vec / np.linalg.norm(vec))


def random_density_matrix(rng, n_qubits=2, rank=None) -> DensityMatrix:
    """Random mixed state from a Ginibre factor of the given rank."""
    dim = 2 ** n_qubits
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def binary_entropy_oracle(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return float(-x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x))


def concurrence_oracle(rho: np.ndarray) -> float:
    """Textbook spin-flip concurrence, straight from the eigenvalues."""
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]])
    yy = np.kron(sy, sy)
    lam = np.sqrt(np.abs(np.real(np.linalg.eigvals(rho @ (yy @ rho.conj() @ yy)))))
    lam.sort()
    return max(0.0, lam[-1] - lam[-2] - lam[-3] - lam[-4])


def werner_state(weight: float) -> DensityMatrix:
    """weight * |Psi+><Psi+| + (1 - weight) * I/4."""
    psi = np.array([0.0, 1.0, 1.0, 0.0]) / np.sqrt(2.0)
    return DensityMatrix(weight * np.outer(psi, psi) + (1.0 - weight) * np.eye(4) / 4.0)
