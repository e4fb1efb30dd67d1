import numpy as np
import pytest

from linpess.instances import tabular_embed
from linpess.model import uniform_policy


def small_mdp(seed=0, S=3, A=2, H=3):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(S), size=(S, A))
    r = rng.uniform(size=(S, A))
    return tabular_embed(P, r, H), P, r


def small_mg(seed=0, S=2, A=2, B=2, H=2):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(S), size=(S, A, B))
    r = rng.uniform(size=(S, A, B))
    return tabular_embed(P, r, H, kind="mg")


@pytest.fixture
def mdp3():
    inst, _, _ = small_mdp()
    return inst, uniform_policy(inst.H, inst.num_states, inst.num_actions)


@pytest.fixture
def mg2():
    inst = small_mg()
    H, S = inst.H, inst.num_states
    return inst, (uniform_policy(H, S, 2), uniform_policy(H, S, 2))
