import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linpess.instances import tabular_embed
from linpess.model import (
    InstanceError,
    LinearInstance,
    apply_bellman,
    best_response,
    clip,
    conditional_variance,
    duality_gap,
    evaluate_policy,
    load_instance,
    ne_values_mg,
    optimal_values_mdp,
    save_instance,
    uniform_policy,
)

from conftest import small_mdp, small_mg
from oracles import brute_force_optimal_mdp, deterministic_opponent_values, tabular_tables


def random_policy(rng, H, S, n):
    return rng.dirichlet(np.ones(n), size=(H, S))


def test_bellman_zero_continuation_is_reward(mdp3):
    inst, _ = mdp3
    np.testing.assert_array_equal(apply_bellman(inst, np.zeros(3), 1), inst.mean_reward(1))


def test_bellman_constant_case():
    inst = tabular_embed(np.ones((1, 1, 1)), np.ones((1, 1)), H=2)
    assert apply_bellman(inst, np.array([3.0]), 0)[0, 0] == 4.0


def test_bellman_matches_enumerated_tables(mdp3):
    inst, _ = mdp3
    P, R = tabular_tables(inst)
    V = np.array([0.3, -1.2, 2.5])
    for h in range(inst.H):
        direct = R[h] + P[h] @ V
        np.testing.assert_allclose(apply_bellman(inst, V, h), direct, atol=1e-12)


def test_bellman_rejects_bad_shapes(mdp3):
    inst, _ = mdp3
    with pytest.raises(ValueError):
        apply_bellman(inst, np.zeros(4), 0)
    with pytest.raises(ValueError):
        apply_bellman(inst, np.zeros(3), inst.H)


def test_single_state_single_action_return():
    inst = tabular_embed(np.ones((1, 1, 1)), np.ones((1, 1)), H=5)
    assert evaluate_policy(inst, np.ones((5, 1, 1))).V[0, 0] == 5.0


def test_evaluate_requires_nu_for_games(mg2):
    inst, (pi, _) = mg2
    with pytest.raises(ValueError):
        evaluate_policy(inst, pi)


def test_policy_validation(mdp3):
    inst, pi = mdp3
    with pytest.raises(ValueError):
        evaluate_policy(inst, pi[:, :2])
    bad = pi.copy()
    bad[0, 0] = [0.7, 0.7]
    with pytest.raises(ValueError):
        evaluate_policy(inst, bad)


def test_bellman_consistency_of_evaluation(mdp3):
    inst, _ = mdp3
    rng = np.random.default_rng(1)
    pi = random_policy(rng, inst.H, 3, 2)
    table = evaluate_policy(inst, pi)
    assert np.all(table.V[inst.H] == 0)
    for h in range(inst.H):
        Q = apply_bellman(inst, table.V[h + 1], h)
        np.testing.assert_allclose(table.V[h], (Q * pi[h]).sum(1), atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_optimal_matches_brute_force(seed):
    inst, _, _ = small_mdp(seed, S=2, A=2, H=2)
    table, _ = optimal_values_mdp(inst)
    assert abs(inst.initial_dist @ table.V[0] - brute_force_optimal_mdp(inst)) < 1e-12


def test_optimal_single_action_equals_evaluation():
    inst, _, _ = small_mdp(2, S=3, A=1, H=3)
    table, pi = optimal_values_mdp(inst)
    np.testing.assert_array_equal(table.V, evaluate_policy(inst, pi).V)


def test_optimal_dominates_random_policies(mdp3):
    inst, _ = mdp3
    table, _ = optimal_values_mdp(inst)
    rng = np.random.default_rng(0)
    for _ in range(100):
        V = evaluate_policy(inst, random_policy(rng, inst.H, 3, 2)).V
        assert np.all(V <= table.V + 1e-12)


def test_optimal_tie_break_smallest_index():
    inst = tabular_embed(np.full((2, 3, 2), 0.5), np.full((2, 3), 0.5), H=2)
    _, pi = optimal_values_mdp(inst)
    assert np.all(pi[..., 0] == 1)


def pennies():
    r = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    return tabular_embed(np.ones((1, 2, 2, 1)), r, H=1, kind="mg")


def test_matching_pennies_ne():
    table, (pi, nu) = ne_values_mg(pennies())
    assert abs(table.V[0, 0] - 0.5) < 1e-12
    np.testing.assert_allclose(pi[0, 0], [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(nu[0, 0], [0.5, 0.5], atol=1e-12)


def test_uniform_is_ne_for_repeated_pennies():
    r = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    inst = tabular_embed(np.ones((1, 2, 2, 1)), r, H=3, kind="mg")
    u = uniform_policy(3, 1, 2)
    assert abs(duality_gap(inst, u, u)) < 1e-12


def test_ne_with_degenerate_opponent_equals_mdp():
    inst_mdp, P, r = small_mdp(3)
    Pg = np.repeat(P[:, :, None, :], 2, axis=2)
    rg = np.repeat(r[:, :, None], 2, axis=2)
    game = tabular_embed(Pg, rg, inst_mdp.H, kind="mg")
    t_mg, _ = ne_values_mg(game)
    t_mdp, _ = optimal_values_mdp(inst_mdp)
    np.testing.assert_allclose(t_mg.V, t_mdp.V, atol=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_ne_value_sandwiched_by_deterministic_best_responses(seed):
    inst = small_mg(seed)
    table, (pi, nu) = ne_values_mg(inst)
    assert duality_gap(inst, pi, nu) <= 1e-8
    vals = deterministic_opponent_values(inst, pi)
    _, br = best_response(inst, pi, "min")
    # best response is no worse than any enumerated deterministic opponent
    assert np.all(br.V[0] <= vals.min(axis=0) + 1e-12)
    np.testing.assert_allclose(br.V[0], table.V[0], atol=1e-9)


def test_best_response_reward_independent_of_b():
    inst_mdp, P, r = small_mdp(4, S=2, A=2, H=2)
    game = tabular_embed(np.repeat(P[:, :, None, :], 3, axis=2), np.repeat(r[:, :, None], 3, axis=2), 2, kind="mg")
    rng = np.random.default_rng(0)
    pi = random_policy(rng, 2, 2, 2)
    _, br = best_response(game, pi, "min")
    for _ in range(3):
        nu = random_policy(rng, 2, 2, 3)
        np.testing.assert_allclose(br.V, evaluate_policy(game, pi, nu).V, atol=1e-12)


def test_best_response_errors(mdp3, mg2):
    inst, pi = mdp3
    with pytest.raises(ValueError):
        best_response(inst, pi, "min")
    game, (gpi, _) = mg2
    with pytest.raises(ValueError):
        best_response(game, gpi, "both")


@pytest.mark.parametrize("seed", range(3))
def test_value_sandwich_for_arbitrary_pairs(seed):
    inst = small_mg(seed + 10)
    table, _ = ne_values_mg(inst)
    rng = np.random.default_rng(seed)
    for _ in range(10):
        pi, nu = random_policy(rng, 2, 2, 2), random_policy(rng, 2, 2, 2)
        _, lo = best_response(inst, pi, "min")
        _, hi = best_response(inst, nu, "max")
        assert np.all(lo.V[0] <= table.V[0] + 1e-9) and np.all(table.V[0] <= hi.V[0] + 1e-9)
        assert duality_gap(inst, pi, nu) >= -1e-9
        assert duality_gap(inst, pi, nu, x=1) >= -1e-9


def test_conditional_variance_constant_and_exact(mdp3):
    inst, _ = mdp3
    var, trunc = conditional_variance(inst, np.full(3, 2.0), 0)
    assert np.all(var < 1e-15) and np.all(trunc == 1.0)
    V = np.array([0.0, 1.0, 4.0])
    P, _ = tabular_tables(inst)
    var, _ = conditional_variance(inst, V, 1)
    np.testing.assert_allclose(var, P[1] @ (V * V) - (P[1] @ V) ** 2, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(a=st.floats(-50, 50), b=st.floats(-50, 50), M=st.floats(0, 20))
def test_clip_idempotent_and_nonexpansive(a, b, M):
    ca, cb = clip(a, M), clip(b, M)
    assert clip(ca, M) == ca
    assert 0 <= ca <= M
    assert abs(ca - cb) <= abs(a - b) + 1e-12


def test_instance_json_round_trip_is_bit_exact(tmp_path, mg2):
    inst, _ = mg2
    path = tmp_path / "g.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert back.to_json() == inst.to_json()
    assert np.array_equal(back.features, inst.features)
    doc = json.loads(inst.to_json())
    for key in ("kind", "d", "H", "num_states", "num_actions", "num_actions_min", "features", "measures",
                "thetas", "reward_noise", "initial_dist", "metadata"):
        assert key in doc


def _base_doc():
    inst, _, _ = small_mdp(0)
    return json.loads(inst.to_json())


def test_rejects_negative_probabilities():
    doc = _base_doc()
    doc["measures"][0][0][0] -= 0.5
    doc["measures"][0][0][1] += 0.5
    doc["measures"][0][0][0] = -0.2
    with pytest.raises(InstanceError):
        LinearInstance.from_dict(doc)


def test_clamps_tiny_negative_probabilities():
    doc = _base_doc()
    row = doc["measures"][0][0]
    row[0], row[1] = -1e-13, row[1] + row[0] + 1e-13
    inst = LinearInstance.from_dict(doc)
    assert inst.transition(0).min() >= 0


def test_rejects_large_features_and_rewards():
    doc = _base_doc()
    doc["features"][0][0] = [2.0] + [0.0] * (len(doc["features"][0][0]) - 1)
    with pytest.raises(InstanceError):
        LinearInstance.from_dict(doc)
    doc = _base_doc()
    doc["thetas"][0][0] = 1.5
    with pytest.raises(InstanceError):
        LinearInstance.from_dict(doc)


def test_rejects_bad_initial_distribution():
    doc = _base_doc()
    doc["initial_dist"] = [0.5, 0.5, 0.5]
    with pytest.raises(InstanceError):
        LinearInstance.from_dict(doc)
