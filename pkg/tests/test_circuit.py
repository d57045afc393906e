"""State preparation, weak coupling, and measurement branching."""

import numpy as np
import pytest

from wdistill import (InvalidArgumentError, Statevector, UnsupportedError,
                      as_density_matrix, couple_all, fidelity, measure,
                      partial_trace, prepare_w, strong_measure_party, tensor)

W = prepare_w(3)
ANCILLA_GROUND = Statevector.basis_state(3, 0)


def test_prepare_w_amplitudes():
    amps = prepare_w(3).amplitudes
    hot = {3, 5, 6}
    for idx in range(8):
        if idx in hot:
            assert amps[idx] == pytest.approx(1.0 / np.sqrt(3.0))
        else:
            assert amps[idx] == 0.0
    with pytest.raises(UnsupportedError):
        prepare_w(4)


def test_measure_single_branch_on_basis_state():
    state = Statevector.basis_state(2, "10")
    branches = measure(state, [0, 1])
    assert len(branches) == 1
    branch = branches[0]
    # outcome char i reports the i-th measured qubit
    assert branch.outcome == "10"
    assert branch.probability == pytest.approx(1.0)


def test_measure_branches_partition_probability():
    rng = np.random.default_rng(2)
    vec = rng.normal(size=8) + 1j * rng.normal(size=8)
    state = Statevector(vec / np.linalg.norm(vec))
    branches = measure(state, [1])
    assert sorted(b.outcome for b in branches) == ["0", "1"]
    assert sum(b.probability for b in branches) == pytest.approx(1.0)
    for b in branches:
        post = as_density_matrix(b.post_state)
        assert post.trace() == pytest.approx(1.0)


def test_couple_all_requires_full_register():
    with pytest.raises(InvalidArgumentError):
        couple_all(W, 0.3)   # missing the ancilla register


def test_continue_branch_leaves_shared_state_invariant():
    # every term has exactly two excited parties, so the all-quiet branch
    # scales uniformly: the conditioned state is the original one
    for eps in (0.1, 0.5, 0.9):
        coupled = couple_all(tensor(W, ANCILLA_GROUND), eps)
        branches = {b.outcome: b for b in measure(coupled, [3, 4, 5])}
        cont = branches["000"]
        u = eps * eps
        assert cont.probability == pytest.approx((1.0 - u) ** 2, abs=1e-12)
        survivor = partial_trace(cont.post_state, [0, 1, 2])
        assert fidelity(survivor, W) == pytest.approx(1.0, abs=1e-12)


def test_single_round_branch_probabilities():
    eps = 0.3
    u = eps * eps
    coupled = couple_all(tensor(W, ANCILLA_GROUND), eps)
    probs = {b.outcome: b.probability for b in measure(coupled, [3, 4, 5])}
    one_hots = ("100", "010", "001")
    for outcome in one_hots:
        assert probs[outcome] == pytest.approx(2.0 * u * (1.0 - u) / 3.0,
                                               abs=1e-12)
    # each two-excitation term can fire only its own two ancillas
    for outcome in ("110", "101", "011"):
        assert probs.get(outcome, 0.0) == pytest.approx(u * u / 3.0, abs=1e-12)
    assert probs.get("111", 0.0) == pytest.approx(0.0, abs=1e-14)
    assert sum(probs.values()) == pytest.approx(1.0, abs=1e-12)


def test_one_hot_branch_distills_the_pair():
    eps = 0.4
    coupled = couple_all(tensor(W, ANCILLA_GROUND), eps)
    branches = {b.outcome: b for b in measure(coupled, [3, 4, 5])}
    psi_plus = Statevector(np.array([0.0, 1.0, 1.0, 0.0]) / np.sqrt(2.0))
    # party 0's ancilla fired -> parties 1 and 2 hold the pair
    fired = branches["100"]
    pair = partial_trace(fired.post_state, [1, 2])
    assert fidelity(pair, psi_plus) == pytest.approx(1.0, abs=1e-12)
    # the dropped-out party is left excited
    dropped = partial_trace(fired.post_state, [0])
    assert dropped.elements[1, 1] == pytest.approx(1.0, abs=1e-12)


def test_strong_measure_party_on_shared_state():
    psi_plus = Statevector(np.array([0.0, 1.0, 1.0, 0.0]) / np.sqrt(2.0))
    for party in (0, 1, 2):
        branches = {b.outcome: b for b in strong_measure_party(W, party)}
        assert branches["1"].probability == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert branches["0"].probability == pytest.approx(1.0 / 3.0, abs=1e-12)
        pair = as_density_matrix(branches["1"].post_state)
        assert pair.n_qubits == 2
        assert fidelity(pair, psi_plus) == pytest.approx(1.0, abs=1e-12)
        # the quiet outcome leaves the other two parties both excited
        rest = as_density_matrix(branches["0"].post_state)
        assert rest.elements[3, 3] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        strong_measure_party(W, 3)


def test_coupling_strength_bounds():
    state = tensor(W, ANCILLA_GROUND)
    for bad in (-0.1, 1.5):
        with pytest.raises(InvalidArgumentError):
            couple_all(state, bad)
    # the closed interval ends are usable
    couple_all(state, 1.0)
