import math

import numpy as np
import pytest

from linpess.data import collect, coverage_exact
from linpess.instances import (
    LowerBoundSpec,
    action_index,
    action_set,
    behavior_second_moment,
    graded_gap_mdp,
    lower_bound_family,
    mixed_stage_game,
    random_linear_instance,
    tabular_embed,
)
from linpess.model import (
    conditional_variance,
    duality_gap,
    evaluate_policy,
    ne_values_mg,
    occupancy,
    optimal_values_mdp,
    uniform_policy,
)

from conftest import small_mdp
from oracles import tabular_dp


def test_trivial_embedding():
    inst = tabular_embed(np.ones((1, 1, 1)), np.full((1, 1), 0.3), 2)
    assert inst.d == 1 and inst.features.reshape(-1)[0] == 1.0


def test_embedding_matches_tabular_dp():
    inst, P, r = small_mdp(5, S=4, A=3, H=4)
    rng = np.random.default_rng(0)
    pi = rng.dirichlet(np.ones(3), size=(4, 4))
    np.testing.assert_allclose(evaluate_policy(inst, pi).V[0], tabular_dp(P, r, 4, pi), atol=1e-12)
    assert np.allclose(np.linalg.norm(inst.features, axis=-1), 1.0)


def test_embedding_kappa_is_min_occupancy():
    inst, _, _ = small_mdp(6)
    rng = np.random.default_rng(2)
    pi = rng.dirichlet(np.ones(2), size=(3, 3))
    assert coverage_exact(inst, pi)[0] == pytest.approx(occupancy(inst, pi).min(), abs=1e-12)


def test_embedding_rejects_invalid_kernel():
    with pytest.raises(ValueError):
        tabular_embed(np.full((2, 1, 2), 0.7), np.zeros((2, 1)), 2)
    with pytest.raises(ValueError):
        tabular_embed(np.full((2, 1, 2), 0.5), np.full((2, 1), 2.0), 2)
    with pytest.raises(ValueError):
        tabular_embed(np.full((2, 1, 2), 0.5), np.zeros((2, 1)))


def test_random_instances_have_coverage():
    for seed in range(100):
        inst, beh = random_linear_instance("mdp", 3, 2, (3, 2), seed)
        assert coverage_exact(inst, beh)[0] > 0.01
    game, gbeh = random_linear_instance("mg", 4, 2, (2, 2, 2), 0)
    assert coverage_exact(game, gbeh)[0] > 0.01


def test_random_instance_reproducible_and_valid():
    a, _ = random_linear_instance("mdp", 4, 3, (3, 2), 11)
    b, _ = random_linear_instance("mdp", 4, 3, (3, 2), 11)
    assert a.to_json() == b.to_json()
    assert np.linalg.norm(a.features, axis=-1).max() <= 1 + 1e-12
    for h in range(3):
        assert a.mean_reward(h).min() >= 0 and a.mean_reward(h).max() <= 1
    with pytest.raises(ValueError):
        random_linear_instance("mdp", 10, 2, (2, 2), 0)


def test_lower_bound_spec_validation():
    with pytest.raises(ValueError):
        LowerBoundSpec(d=3, H=2, zeta=0.1)
    with pytest.raises(ValueError):
        LowerBoundSpec(d=4, H=2, zeta=1.0)
    with pytest.raises(ValueError):
        LowerBoundSpec(d=4, H=2, zeta=0.1, u=np.ones((2, 3)))
    with pytest.raises(ValueError):
        lower_bound_family(LowerBoundSpec(d=7, H=1, zeta=0.1), "mdp")


def test_lower_bound_structure():
    spec = LowerBoundSpec(d=4, H=3, zeta=1 / math.sqrt(12), seed=2)
    inst, beh, an = lower_bound_family(spec, "mg")
    for h in range(3):
        P = inst.transition(h)
        assert np.all(P == 0.5)
    norms = np.linalg.norm(inst.features, axis=-1)
    assert norms.max() < 1
    assert norms.max() ** 2 == pytest.approx((4 - 2) / 8 + 0.5)
    table, _ = ne_values_mg(inst)
    np.testing.assert_allclose(table.V, an.v_star, atol=1e-12)
    for h in range(2):
        var, _ = conditional_variance(inst, table.V[h + 1], h)
        np.testing.assert_allclose(var, 1 / 6, atol=1e-12)
    var, _ = conditional_variance(inst, table.V[3], 2)
    assert np.all(var == 0)


def test_lower_bound_mdp_variant_and_optimal_actions():
    spec = LowerBoundSpec(d=5, H=2, zeta=0.1, seed=3)
    inst, beh, an = lower_bound_family(spec, "mdp")
    assert inst.kind == "mdp" and inst.features.shape == (2, 27, 5)
    _, pi = optimal_values_mdp(inst)
    for h in range(2):
        assert np.all(pi[h].argmax(-1) == an.optimal_actions[h])
        assert np.array_equal(action_set(5)[an.optimal_actions[h]], an.u[h])


def test_reward_independent_of_min_player():
    spec = LowerBoundSpec(d=4, H=2, zeta=0.2, seed=4)
    inst, _, _ = lower_bound_family(spec, "mg")
    rng = np.random.default_rng(0)
    pi = rng.dirichlet(np.ones(9), size=(2, 2))
    v1 = evaluate_policy(inst, pi, rng.dirichlet(np.ones(9), size=(2, 2))).V
    v2 = evaluate_policy(inst, pi, rng.dirichlet(np.ones(9), size=(2, 2))).V
    np.testing.assert_allclose(v1, v2, atol=1e-12)


def test_second_moment_closed_form():
    d = 4
    spec = LowerBoundSpec(d=d, H=2, zeta=0.1)
    inst, beh, an = lower_bound_family(spec, "mg")
    m = an.second_moment
    np.testing.assert_allclose(m[:2, :2], np.eye(2) / (2 * d * d), atol=1e-15)
    np.testing.assert_allclose(m[:2, 2:], 1 / (4 * d * math.sqrt(d)), atol=1e-15)
    np.testing.assert_allclose(np.diag(m[2:, 2:]), 0.25, atol=1e-15)
    for h in range(2):
        np.testing.assert_allclose(behavior_second_moment(inst, beh, h), m, atol=1e-15)


def test_analytic_gap_matches_duality_gap():
    spec = LowerBoundSpec(d=4, H=2, zeta=1 / math.sqrt(12), seed=9)
    inst, _, an = lower_bound_family(spec, "mg")
    rng = np.random.default_rng(1)
    for _ in range(20):
        pi = rng.dirichlet(np.full(9, 0.3), size=(2, 2))
        nu = rng.dirichlet(np.ones(9), size=(2, 2))
        assert an.gap(pi) == pytest.approx(duality_gap(inst, pi, nu), abs=1e-9)


def test_analytic_mode_any_dimension():
    inst, beh, an = lower_bound_family(LowerBoundSpec(d=12, H=3, zeta=0.05, seed=1), mode="analytic")
    assert inst is None and beh is None
    doc = an.to_dict()
    assert set(doc) == {"v_star", "u", "zeta", "gap_coefficients"}
    assert an.v_star[0, 0] - an.v_star[0, 1] == pytest.approx(2 / math.sqrt(6))


def test_action_index_round_trip():
    acts = action_set(5)
    for i in (0, 5, 26):
        assert action_index(5, acts[i]) == i


def test_graded_gap_instance():
    inst, beh, best = graded_gap_mdp(6, 3, 2, seed=1)
    table, pi = optimal_values_mdp(inst)
    assert np.array_equal(pi.argmax(-1), best)
    Q = table.Q
    gaps = np.sort(Q, axis=-1)[..., -1] - np.sort(Q, axis=-1)[..., -2]
    assert gaps.min() == pytest.approx(0.002) and gaps.max() == pytest.approx(0.3)
    assert np.allclose(beh[np.arange(2)[:, None], np.arange(6)[None], best], 0.25)


def test_mixed_stage_game_has_interior_equilibria():
    inst, beh = mixed_stage_game(seed=3)
    _, (pi, nu) = ne_values_mg(inst)
    assert pi.min() > 0.05 and nu.min() > 0.05
    assert collect(inst, beh, 10, 0).b is not None
