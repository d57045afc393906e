"""Exact enumeration drivers: schedules, round records, and variants."""

import numpy as np
import pytest

from wdistill import (ConfigError, EpsilonSchedule, InvalidArgumentError,
                      ProtocolConfig, Statevector, Variant, classify_outcome,
                      fidelity, optimal_epsilon, pair_parties, prepare_w,
                      run_no_mcm, run_random_party, run_specific_party,
                      success_probability)
from wdistill.protocol import OutcomeKind, no_mcm_circuit

W = prepare_w(3)
PSI_PLUS = Statevector(np.array([0.0, 1.0, 1.0, 0.0]) / np.sqrt(2.0))


def closed_form_success(n_rounds: int) -> float:
    return (n_rounds + 2.0) / (n_rounds + 3.0)


def test_optimal_epsilon_values():
    # D remaining rounds -> strength 1/sqrt(D+3); the last round couples
    # hardest
    assert optimal_epsilon(1) == pytest.approx(0.5, abs=1e-15)
    assert optimal_epsilon(2) == pytest.approx(1.0 / np.sqrt(5.0), abs=1e-15)
    assert optimal_epsilon(5) == pytest.approx(1.0 / np.sqrt(8.0), abs=1e-15)
    with pytest.raises(InvalidArgumentError):
        optimal_epsilon(0)


def test_schedule_construction_and_lookup():
    sched = EpsilonSchedule.optimal(3)
    assert sched.n_rounds == 3
    assert sched.values == pytest.approx(
        (1.0 / np.sqrt(6.0), 1.0 / np.sqrt(5.0), 0.5))
    assert sched.for_round(3) == pytest.approx(0.5)
    assert sched.for_remaining(1) == pytest.approx(0.5)
    assert sched.for_remaining(3) == pytest.approx(1.0 / np.sqrt(6.0))
    uniform = EpsilonSchedule.uniform(0.25, 4)
    assert uniform.values == (0.25,) * 4
    with pytest.raises(InvalidArgumentError):
        sched.for_round(4)
    with pytest.raises(InvalidArgumentError):
        EpsilonSchedule(())
    with pytest.raises(InvalidArgumentError):
        EpsilonSchedule((0.0, 0.5))       # strengths live in (0, 1]
    with pytest.raises(InvalidArgumentError):
        EpsilonSchedule((0.5, 1.2))


def test_config_validation():
    with pytest.raises(ConfigError):
        ProtocolConfig(n_rounds=2, schedule=EpsilonSchedule.optimal(3))
    with pytest.raises(ConfigError):
        ProtocolConfig(n_rounds=1, schedule=EpsilonSchedule.optimal(1),
                       strong_party=5)


def test_classify_outcome_and_pair_parties():
    assert classify_outcome("000").kind is OutcomeKind.CONTINUE
    success = classify_outcome("010")
    assert success.kind is OutcomeKind.SUCCESS and success.party == 1
    assert classify_outcome("110").kind is OutcomeKind.FAIL
    assert classify_outcome("111").kind is OutcomeKind.FAIL
    with pytest.raises(InvalidArgumentError):
        classify_outcome("01")
    assert pair_parties(0) == (1, 2)
    assert pair_parties(2) == (0, 1)
    with pytest.raises(InvalidArgumentError):
        pair_parties(3)


@pytest.mark.parametrize("n_rounds", [1, 2, 3])
def test_random_party_closed_form(n_rounds):
    config = ProtocolConfig(n_rounds=n_rounds,
                            schedule=EpsilonSchedule.optimal(n_rounds))
    result = run_random_party(config, W)
    assert result.n_rounds == n_rounds
    assert success_probability(result) == pytest.approx(
        closed_form_success(n_rounds), abs=1e-12)

    for k, rec in enumerate(result.rounds, start=1):
        remaining = n_rounds - k + 1
        u = 1.0 / (remaining + 3.0)
        assert rec.round_index == k
        assert rec.p_w == pytest.approx((1.0 - u) ** 2, abs=1e-12)
        for p in rec.p_epr_by_party:
            assert p == pytest.approx(2.0 * u * (1.0 - u) / 3.0, abs=1e-12)
        assert rec.p_fail == pytest.approx(u * u, abs=1e-12)
        assert rec.p_epr_total == pytest.approx(2.0 * u * (1.0 - u), abs=1e-12)
        # surviving state stays the ideal shared state; every distilled
        # pair is the perfect triplet
        assert fidelity(rec.w_state_after, W) == pytest.approx(1.0, abs=1e-12)
        assert set(rec.distilled_states) == {0, 1, 2}
        for pair in rec.distilled_states.values():
            assert fidelity(pair, PSI_PLUS) == pytest.approx(1.0, abs=1e-12)

    strong = result.strong_record
    assert strong.p_epr == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert fidelity(strong.distilled_state, PSI_PLUS) == pytest.approx(
        1.0, abs=1e-12)


def test_random_party_requires_three_party_state():
    config = ProtocolConfig(n_rounds=1, schedule=EpsilonSchedule.optimal(1))
    with pytest.raises(InvalidArgumentError):
        run_random_party(config, Statevector.basis_state(2, 0))


def test_uniform_schedule_peaks_at_one_half_for_single_round():
    def total(eps):
        config = ProtocolConfig(n_rounds=1,
                                schedule=EpsilonSchedule.uniform(eps, 1))
        return success_probability(run_random_party(config, W))

    peak = total(0.5)
    assert peak == pytest.approx(0.75, abs=1e-12)
    for eps in (0.1, 0.3, 1.0 / np.sqrt(6.0), 0.7, 0.9):
        assert total(eps) < peak
    # and the closed form for a uniform strength: 2u(1-u) + (1-u)^2 * 2/3
    u = 0.09
    assert total(0.3) == pytest.approx(2 * u * (1 - u) + (1 - u) ** 2 * 2 / 3,
                                       abs=1e-12)


def test_stage_hook_sees_every_stage():
    seen = []

    def hook(state, stage):
        seen.append(stage)
        return state

    config = ProtocolConfig(n_rounds=3, schedule=EpsilonSchedule.optimal(3),
                            stage_hook=hook)
    result = run_random_party(config, W)
    # stages 1..N ahead of each round plus N+1 ahead of the strong
    # measurement
    assert seen == [1, 2, 3, 4]
    assert success_probability(result) == pytest.approx(
        closed_form_success(3), abs=1e-12)


def test_specific_party_baseline():
    for party in (0, 1, 2):
        result = run_specific_party(W, party)
        assert result.n_rounds == 0
        assert result.variant is Variant.SPECIFIC_PARTY
        assert result.strong_record.party == party
        assert success_probability(result) == pytest.approx(2.0 / 3.0,
                                                            abs=1e-12)
        assert fidelity(result.strong_record.distilled_state,
                        PSI_PLUS) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(InvalidArgumentError):
        run_specific_party(W, 4)


@pytest.mark.parametrize("n_rounds", [1, 2])
def test_no_mcm_matches_mid_circuit_variant(n_rounds):
    schedule = EpsilonSchedule.optimal(n_rounds)
    mcm = run_random_party(
        ProtocolConfig(n_rounds=n_rounds, schedule=schedule), W)
    deferred = run_no_mcm(
        ProtocolConfig(n_rounds=n_rounds, schedule=schedule,
                       variant=Variant.NO_MCM), W)
    assert deferred.variant is Variant.NO_MCM
    for rec_m, rec_d in zip(mcm.rounds, deferred.rounds):
        assert rec_d.p_w == pytest.approx(rec_m.p_w, abs=1e-12)
        assert rec_d.p_fail == pytest.approx(rec_m.p_fail, abs=1e-12)
        for a, b in zip(rec_m.p_epr_by_party, rec_d.p_epr_by_party):
            assert b == pytest.approx(a, abs=1e-12)
        assert np.allclose(rec_d.w_state_after.elements,
                           rec_m.w_state_after.elements, atol=1e-12)
        for party in (0, 1, 2):
            assert np.allclose(rec_d.distilled_states[party].elements,
                               rec_m.distilled_states[party].elements,
                               atol=1e-12)
    assert deferred.strong_record.p_epr == pytest.approx(
        mcm.strong_record.p_epr, abs=1e-12)
    assert np.allclose(deferred.strong_record.distilled_state.elements,
                       mcm.strong_record.distilled_state.elements, atol=1e-12)


def test_no_mcm_rejects_stage_hook():
    config = ProtocolConfig(n_rounds=1, schedule=EpsilonSchedule.optimal(1),
                            variant=Variant.NO_MCM,
                            stage_hook=lambda state, stage: state)
    with pytest.raises(ConfigError):
        run_no_mcm(config, W)


def test_no_mcm_circuit_register_layout():
    config = ProtocolConfig(n_rounds=2, schedule=EpsilonSchedule.optimal(2),
                            variant=Variant.NO_MCM)
    ops = no_mcm_circuit(config)
    assert ops   # a concrete static gate list exists
    touched = set()
    for op in ops:
        touched.update(op.targets)
        touched.update(op.controls)
    # parties 0..2 plus one fresh 3-ancilla block per round
    assert touched <= set(range(3 + 3 * config.n_rounds))
    assert max(touched) >= 3 + 3 * (config.n_rounds - 1)
