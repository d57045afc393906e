"""Depolarizing preparation/degradation and readout error modelling."""

import numpy as np
import pytest

from wdistill import (CountsTable, DataError, InvalidArgumentError,
                      NoisyWParams, NumericalDomainError, ReadoutModel,
                      as_density_matrix, default_ancilla_model,
                      degrade_between_rounds, degrade_to_fidelity,
                      depolarizing_weight_for_fidelity, fidelity,
                      load_readout_model, make_depolarizing_schedule,
                      make_fidelity_ramp, mitigate_readout, noisy_w,
                      prepare_w, save_readout_model)
from wdistill.noise import apply_readout


def confusion_tensor(model: ReadoutModel) -> np.ndarray:
    """Full observed|true matrix with vector-index bit i meaning qubit i."""
    full = np.eye(1)
    for q in range(model.n_qubits):   # highest qubit outermost in the kron
        full = np.kron(model.confusion_matrix(q), full) \
            if q else model.confusion_matrix(0)
    return full

W = prepare_w(3)


def test_noisy_w_fidelity_relation():
    # mixing weight p pulls the overlap to (1 - p) + p/8
    for p in (0.0, 0.1, 0.5, 1.0):
        assert fidelity(noisy_w(p), W) == pytest.approx(1.0 - 7.0 * p / 8.0,
                                                        abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        noisy_w(-0.01)
    with pytest.raises(InvalidArgumentError):
        noisy_w(1.01)


def test_depolarizing_weight_roundtrip():
    for target in (0.97, 0.9, 0.5, 0.125):
        p = depolarizing_weight_for_fidelity(target)
        assert fidelity(noisy_w(p), W) == pytest.approx(target, abs=1e-12)
    assert depolarizing_weight_for_fidelity(1.0) == 0.0
    assert depolarizing_weight_for_fidelity(0.125) == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        depolarizing_weight_for_fidelity(0.1)   # below the mixed floor
    with pytest.raises(InvalidArgumentError):
        depolarizing_weight_for_fidelity(1.1)


def test_degrade_between_rounds():
    state = as_density_matrix(W)
    out = degrade_between_rounds(state, 0.2)
    assert fidelity(out, W) == pytest.approx(1.0 - 7.0 * 0.2 / 8.0, abs=1e-12)
    assert out.trace() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        degrade_between_rounds(state, 1.5)


def test_degrade_to_fidelity_hits_target_exactly():
    state = noisy_w(depolarizing_weight_for_fidelity(0.97))
    out = degrade_to_fidelity(state, 0.9)
    assert fidelity(out, W) == pytest.approx(0.9, abs=1e-12)
    # never improves: asking for a higher fidelity is a no-op
    same = degrade_to_fidelity(out, 0.95)
    assert fidelity(same, W) == pytest.approx(0.9, abs=1e-12)


def test_fidelity_ramp_hook_schedule():
    hook = make_fidelity_ramp(0.97, 0.07)
    state = noisy_w(depolarizing_weight_for_fidelity(0.97))
    stage1 = hook(state, 1)
    assert fidelity(stage1, W) == pytest.approx(0.90, abs=1e-12)
    stage2 = hook(stage1, 2)
    assert fidelity(stage2, W) == pytest.approx(0.83, abs=1e-12)
    # a zero step leaves the state alone
    flat = make_fidelity_ramp(0.97, 0.0)
    assert fidelity(flat(state, 1), W) == pytest.approx(0.97, abs=1e-12)


def test_depolarizing_schedule_hook():
    hook = make_depolarizing_schedule([0.1, 0.25])
    state = as_density_matrix(W)
    assert fidelity(hook(state, 1), W) == pytest.approx(1.0 - 7.0 * 0.1 / 8.0,
                                                        abs=1e-12)
    assert fidelity(hook(state, 2), W) == pytest.approx(1.0 - 7.0 * 0.25 / 8.0,
                                                        abs=1e-12)
    # stages beyond the listed weights pass through unchanged
    assert fidelity(hook(state, 3), W) == pytest.approx(1.0, abs=1e-12)


def test_noisy_w_params():
    p = depolarizing_weight_for_fidelity(0.97)
    params = NoisyWParams(p)
    assert fidelity(params.prepared_state(), W) == pytest.approx(0.97,
                                                                 abs=1e-12)
    assert params.stage_hook() is None
    ramped = NoisyWParams(p, schedule=(0.1, 0.25))
    hook = ramped.stage_hook()
    assert hook is not None
    assert fidelity(hook(as_density_matrix(W), 1), W) == pytest.approx(
        1.0 - 7.0 * 0.1 / 8.0, abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        NoisyWParams(-0.2)


def test_counts_table_vector_roundtrip():
    counts = CountsTable({"000": 70.0, "100": 20.0, "011": 10.0}, 100.0, 3)
    vec = counts.vector()
    # char i of the outcome is bit i of the vector index
    assert vec[0] == 70.0
    assert vec[1] == 20.0
    assert vec[6] == 10.0
    back = CountsTable.from_vector(vec, 3)
    assert back.counts == counts.counts
    assert back.shots == pytest.approx(100.0)
    padded = CountsTable.from_vector(vec, 3, keep_zeros=True)
    assert len(padded.counts) == 8
    with pytest.raises(DataError):
        CountsTable({"00": 1.0}, 1.0, 3)          # width mismatch
    with pytest.raises(InvalidArgumentError):
        CountsTable.from_vector(np.ones(6), 3)    # not 2**width entries


def test_readout_model_construction():
    model = ReadoutModel.symmetric((0.01, 0.02, 0.03))
    assert model.n_qubits == 3
    assert model.p01 == pytest.approx((0.01, 0.02, 0.03))
    assert model.p01 == model.p10
    asym = ReadoutModel(p01=(0.1,), p10=(0.3,))
    col = asym.confusion_matrix(0)
    # column q of the per-qubit matrix is the observed distribution given
    # true bit q
    assert col[:, 0] == pytest.approx([0.9, 0.1])
    assert col[:, 1] == pytest.approx([0.3, 0.7])
    with pytest.raises(InvalidArgumentError):
        ReadoutModel(p01=(0.6,), p10=(0.0,))      # outside [0, 0.5]
    with pytest.raises(InvalidArgumentError):
        ReadoutModel(p01=(0.1, 0.1), p10=(0.1,))  # length mismatch


def test_apply_readout_samples_product_distribution():
    model = ReadoutModel(p01=(0.02, 0.05, 0.10), p10=(0.04, 0.01, 0.20))
    shots = 100_000
    truth = CountsTable({"110": float(shots)}, float(shots), 3)
    observed = apply_readout(model, truth, rng_seed=99)
    assert observed.shots == pytest.approx(float(shots))
    # same seed, same table; different seed, different table
    again = apply_readout(model, truth, rng_seed=99)
    assert again.counts == observed.counts
    assert apply_readout(model, truth, rng_seed=100).counts != observed.counts

    expect = confusion_tensor(model)[:, 3]   # true outcome index 3 = "110"
    freq = observed.vector() / shots
    for idx in range(8):
        sigma = np.sqrt(expect[idx] * (1.0 - expect[idx]) / shots)
        assert abs(freq[idx] - expect[idx]) < 5.0 * sigma + 1e-9


def test_mitigation_inverts_expected_forward_noise_exactly():
    rng = np.random.default_rng(31)
    model = ReadoutModel(p01=tuple(rng.uniform(0.0, 0.05, 3)),
                         p10=tuple(rng.uniform(0.0, 0.05, 3)))
    truth_vec = rng.uniform(0.0, 100.0, 8)
    observed_vec = confusion_tensor(model) @ truth_vec
    observed = CountsTable.from_vector(observed_vec, 3)
    recovered = mitigate_readout(model, observed)
    assert np.allclose(recovered.vector(), truth_vec, atol=1e-9)


def test_mitigation_clamp_preserves_total():
    model = ReadoutModel.symmetric((0.2, 0.2, 0.2))
    # impossible empirical table: all mass on one outcome forces negative
    # entries in the plain inverse
    skewed = CountsTable({"100": 1000.0}, 1000.0, 3)
    plain = mitigate_readout(model, skewed)
    assert plain.vector().min() < 0.0
    clamped = mitigate_readout(model, skewed, clamp=True)
    vec = clamped.vector()
    assert vec.min() >= 0.0
    assert vec.sum() == pytest.approx(1000.0, abs=1e-9)


def test_mitigation_rejects_singular_model():
    model = ReadoutModel.symmetric((0.5, 0.0, 0.0))
    counts = CountsTable({"000": 10.0}, 10.0, 3)
    with pytest.raises(NumericalDomainError):
        mitigate_readout(model, counts)


def test_mitigation_width_must_match_model():
    model = ReadoutModel.symmetric((0.01, 0.01, 0.01))
    with pytest.raises(InvalidArgumentError):
        mitigate_readout(model, CountsTable({"01": 5.0}, 5.0, 2))


def test_default_ancilla_model_magnitudes():
    model = default_ancilla_model()
    assert model.n_qubits == 3
    for value in model.p01 + model.p10:
        assert 0.0066 <= value <= 0.031


def test_readout_model_file_roundtrip(tmp_path):
    model = ReadoutModel(p01=(0.0066, 0.031, 0.0125),
                         p10=(0.02, 0.01, 0.005))
    path = tmp_path / "readout.model"
    save_readout_model(model, path)
    loaded = load_readout_model(path)
    assert loaded.p01 == pytest.approx(model.p01, abs=1e-12)
    assert loaded.p10 == pytest.approx(model.p10, abs=1e-12)
