# -*- coding: utf-8 -*-

import numpy as np
import pytest

from clicksim.oracle import Oracle, OracleSpec, TabularPolicy, TheoryAudit, TinyMdp


def _single_query_mdp(horizon, gamma=1.0, rewards=None):
    mdp = TinyMdp({0: tuple(t % 3 for t in range(horizon))}, {0: 1.0}, n_docs=3, gamma=gamma)
    if rewards is not None:
        mdp.rewards = rewards(mdp)
    return mdp


# ------------------------------------------------------------------ oracles
@pytest.mark.parametrize("kwargs", [
    dict(family="ccm", serp_length=2, attractiveness=np.ones((1, 2)), exam=np.ones(2)),
    dict(family="pbm", serp_length=2, attractiveness=np.ones((1, 2))),
    dict(family="pbm", serp_length=2, attractiveness=np.ones((1, 2)), exam=np.ones(3)),
    dict(family="pbm", serp_length=2, attractiveness=np.full((1, 2), 1.5), exam=np.ones(2)),
    dict(family="sdbn", serp_length=2, attractiveness=np.ones((1, 2)), satisfaction=np.ones((2, 2))),
])
def test_invalid_oracles_are_rejected(kwargs):
    with pytest.raises(ValueError):
        OracleSpec(**kwargs)


def test_certain_clicks_and_certain_skips():
    ones = OracleSpec("pbm", 3, np.ones((2, 4)), exam=np.ones(3))
    zeros = OracleSpec("pbm", 3, np.zeros((2, 4)), exam=np.ones(3))
    rng = np.random.default_rng(0)
    assert np.all(Oracle.synth_generate(ones, 50, rng).train.clicks == 1)
    assert np.all(Oracle.synth_generate(zeros, 50, rng).train.clicks == 0)


def test_satisfied_sdbn_user_clicks_once():
    spec = OracleSpec("sdbn", 3, np.ones((1, 3)), satisfaction=np.ones((1, 3)))
    data = Oracle.synth_generate(spec, 20, np.random.default_rng(0))
    np.testing.assert_array_equal(data.train.clicks, np.tile([1, 0, 0], (len(data.train), 1)))


def test_vocabulary_smaller_than_the_result_list_raises():
    spec = OracleSpec.random("pbm", serp_length=5, n_queries=2, n_docs=3)
    with pytest.raises(ValueError):
        Oracle.synth_generate(spec, 10, np.random.default_rng(0))


def test_generated_dataset_layout():
    spec = OracleSpec.random("sdbn", serp_length=3, n_queries=2, n_docs=5, seed=1, n_verticals=2)
    data = Oracle.synth_generate(spec, 100, np.random.default_rng(0))
    assert (len(data.train), len(data.valid), len(data.test)) == (80, 10, 10)
    assert data.vocab_sizes == (4, 7, 4, 4)
    # documents are drawn without replacement within a list
    assert all(len(set(row)) == 3 for row in data.train.docs)
    assert data.annotations.grade(2, 2) == int(round(spec.attractiveness[0, 0] * 4))


def test_oracle_perplexity_floors():
    certain = OracleSpec("pbm", 3, np.ones((1, 3)), exam=np.ones(3))
    data = Oracle.synth_generate(certain, 30, np.random.default_rng(0))
    assert Oracle.oracle_ppl(certain, data)[1] == pytest.approx(1.0, abs=1e-5)
    coin = OracleSpec("pbm", 3, np.full((1, 3), 0.5), exam=np.ones(3))
    data = Oracle.synth_generate(coin, 30, np.random.default_rng(0))
    np.testing.assert_allclose(Oracle.oracle_ppl(coin, data)[0], 2.0)


def test_oracle_is_the_best_model_of_its_own_data():
    spec = OracleSpec.random("pbm", serp_length=3, n_queries=2, n_docs=4, seed=5)
    data = Oracle.synth_generate(spec, 3000, np.random.default_rng(1))
    _, oracle = Oracle.oracle_ppl(spec, data)
    _, coin = Oracle.oracle_ppl(OracleSpec("pbm", 3, np.full((2, 4), 0.5), exam=np.ones(3)), data)
    assert 1.0 < oracle < coin


# ---------------------------------------------------------------- tiny MDPs
@pytest.mark.parametrize("kwargs", [
    dict(schedules={0: (0, 1, 2, 0, 1)}, query_probs={0: 1.0}, n_docs=3),
    dict(schedules={0: (0, 1)}, query_probs={0: 1.0}, n_docs=4),
    dict(schedules={0: (0, 1)}, query_probs={0: 0.7}, n_docs=2),
    dict(schedules={0: (0, 1), 1: (0,)}, query_probs={0: 0.5, 1: 0.5}, n_docs=2),
    dict(schedules={0: (0, 1)}, query_probs={0: 1.0}, n_docs=2, gamma=1.5),
])
def test_invalid_mdps_are_rejected(kwargs):
    with pytest.raises(ValueError):
        TinyMdp(**kwargs)


def test_reward_over_the_declared_bound_is_rejected():
    state = (0, (0,), ())
    with pytest.raises(ValueError):
        TinyMdp({0: (0,)}, {0: 1.0}, n_docs=1, rewards={(state, 1): 2.0}, r_max=1.0)


def test_one_step_uniform_occupancy():
    mdp = _single_query_mdp(1)
    rho = Oracle.enumerate_occupancy(TabularPolicy(), mdp)
    state = (0, (0,), ())
    assert rho.masses == pytest.approx({(state, 0): 0.5, (state, 1): 0.5})


def test_discounted_two_step_occupancy():
    mdp = _single_query_mdp(2, gamma=0.5)
    rho = Oracle.enumerate_occupancy(TabularPolicy(), mdp)
    first = (0, (0,), ())
    expected = {(first, 0): 1 / 3, (first, 1): 1 / 3}
    for prev in (0, 1):
        for a in (0, 1):
            expected[((0, (0, 1), (prev,)), a)] = 1 / 12
    assert rho.masses == pytest.approx(expected)
    assert rho.total() == pytest.approx(1.0)


def test_occupancy_sums_to_one_on_random_instances():
    rng = np.random.default_rng(4)
    for horizon in (1, 2, 3, 4):
        mdp = TinyMdp.random(rng, horizon)
        assert Oracle.enumerate_occupancy(TabularPolicy.random(mdp, rng), mdp).total() == pytest.approx(1.0)
        assert len(mdp.states()) == len(mdp.query_probs) * (2 ** horizon - 1)


def test_identical_policies_have_no_gap():
    rng = np.random.default_rng(0)
    mdp = TinyMdp.random(rng, 3)
    expert = TabularPolicy.random(mdp, rng)
    assert Oracle.utility_gap(expert, expert, mdp) == 0.0
    assert Oracle.eps_bc(expert, expert, mdp) == pytest.approx(0.0, abs=1e-12)
    assert Oracle.eps_gail(expert, expert, mdp) == pytest.approx(0.0, abs=1e-12)
    assert Oracle.check_bc_bound(expert, expert, mdp).holds
    assert Oracle.check_gail_bound(expert, expert, mdp).holds
    np.testing.assert_allclose(expert.mixed(TabularPolicy(), 0.0, mdp).probs(mdp.states()[0]),
                               expert.probs(mdp.states()[0]))


def test_zero_rewards_give_zero_gap():
    mdp = _single_query_mdp(3)
    rng = np.random.default_rng(1)
    assert Oracle.utility_gap(TabularPolicy.random(mdp, rng), TabularPolicy.random(mdp, rng), mdp) == 0.0


def test_utility_of_rewarded_clicks():
    mdp = _single_query_mdp(3, gamma=0.5, rewards=lambda m: {(s, 1): 1.0 for s in m.states()})
    always = TabularPolicy.from_function(mdp, lambda s: 1.0)
    assert Oracle.utility(always, mdp) == pytest.approx(1.75)
    assert Oracle.utility(TabularPolicy(), mdp) == pytest.approx(0.875)


def test_divergences():
    assert Oracle.js_divergence([1.0, 0.0], [0.0, 1.0]) == pytest.approx(np.log(2))
    assert Oracle.js_divergence([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0)
    assert Oracle.kl_divergence([0.5, 0.5], [1.0, 0.0]) == np.inf
    assert Oracle.kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(np.log(2))


def test_monte_carlo_agrees_with_enumeration():
    rng = np.random.default_rng(7)
    mdp = TinyMdp.random(rng, 4)
    policy = TabularPolicy.random(mdp, rng)
    mean, se = Oracle.monte_carlo_utility(policy, mdp, 20000, np.random.default_rng(8))
    assert se > 0
    assert abs(mean - Oracle.utility(policy, mdp)) < 4 * se


# ------------------------------------------------------------------- audits
@pytest.mark.parametrize("horizon", [1, 2, 3, 4])
def test_bounds_hold_on_random_instances(horizon):
    rows = TheoryAudit.run(40, horizon, seed=horizon)
    assert len(rows) == 40
    assert all(row[-1] == 1 for row in rows)
    assert all(row[6] >= -1e-12 and row[9] >= -1e-12 for row in rows)


def test_audit_is_reproducible(tmp_path):
    TheoryAudit.write(tmp_path / "a.tsv", TheoryAudit.run(5, 3, seed=1))
    TheoryAudit.write(tmp_path / "b.tsv", TheoryAudit.run(5, 3, seed=1))
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
    assert (tmp_path / "a.tsv").read_text().splitlines()[0].split("\t") == list(TheoryAudit.COLUMNS)


def test_compounding_errors_grow_superlinearly():
    rows = TheoryAudit.bc_scaling_audit((2, 3, 4), eta=0.01)
    gaps = [row[3] for row in rows]
    assert gaps == pytest.approx([0.0299, 0.059601, 0.09900499])
    assert [row[2] for row in rows] == [0.0, 0.0, 0.0]
    assert rows[0][5] == pytest.approx(0.0299 / np.sqrt(-np.log(0.99)), rel=1e-9)
    assert rows[0][5] == pytest.approx(0.29825, abs=1e-4)
    assert TheoryAudit.grows_superlinearly(gaps)
    assert all(row[3] <= row[6] for row in rows)
    assert all(row[3] <= row[8] for row in rows)


def test_a_non_compounding_learner_loses_linearly():
    rows = TheoryAudit.bc_scaling_audit((2, 3, 4), eta=0.01)
    mixture_gaps = [row[9] for row in rows]
    assert mixture_gaps == pytest.approx([0.02, 0.03, 0.04], abs=1e-12)
    assert TheoryAudit.grows_at_most_linearly(mixture_gaps)
    assert not TheoryAudit.grows_at_most_linearly([row[3] for row in rows])
    assert all(row[9] <= row[11] for row in rows)
    assert all(row[10] > 0 for row in rows)


def test_linear_growth_is_not_superlinear():
    assert not TheoryAudit.grows_superlinearly([1.0, 2.0, 3.0])
    assert not TheoryAudit.grows_superlinearly([3.0, 2.0, 1.5])


def test_at_most_linear_growth():
    assert TheoryAudit.grows_at_most_linearly([1.0, 2.0, 3.0])
    assert TheoryAudit.grows_at_most_linearly([1.0, 3.0, 4.0])
    assert not TheoryAudit.grows_at_most_linearly([1.0, 2.0, 4.0])
