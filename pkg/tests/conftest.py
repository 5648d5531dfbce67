import numpy as np
import pytest

from flier import acpf, cases, netmodel


@pytest.fixture(scope="session")
def case57():
    return cases.load_bundled("case57")


@pytest.fixture(scope="session")
def net57(case57):
    return netmodel.build_admittance(case57)


@pytest.fixture(scope="session")
def model57(net57):
    return net57.flow_model()


@pytest.fixture(scope="session")
def pre57(model57):
    return acpf.newton_solve(model57, tol=1e-11)


@pytest.fixture(scope="session")
def bordered57(model57, pre57):
    return acpf.BorderedSystem(model57, pre57)


@pytest.fixture(scope="session")
def bnet57(net57):
    return netmodel.expand_to_breaker_model(net57)


@pytest.fixture(scope="session")
def smodel57(bnet57):
    return bnet57.flow_model()


@pytest.fixture(scope="session")
def spre57(bnet57, pre57):
    return bnet57.map_state(pre57)


@pytest.fixture(scope="session")
def sbordered57(smodel57, spre57):
    return acpf.BorderedSystem(smodel57, spre57)


@pytest.fixture(scope="session")
def case118():
    return cases.load_bundled("case118")


def tiny_case(n_branches_at_bus1=3, with_load=True):
    """Star network: bus 1 with several branches, optional load, for ring tests."""
    buses = [netmodel.Bus(1, "slack", 0.10 if with_load else 0.0,
                          0.04 if with_load else 0.0, 0.0, 0.0, 1.0, 0.0)]
    branches = []
    for k in range(n_branches_at_bus1):
        buses.append(netmodel.Bus(k + 2, "pq", 0.05, 0.01, 0.0, 0.0, 1.0, 0.0))
        branches.append(netmodel.Branch(1, k + 2, 0.01, 0.05, 0.02))
    gens = [netmodel.Generator(bus=1, Pg=0.0, Qg=0.0, Vset=1.0)]
    return netmodel.RawCase(100.0, buses, gens, branches).validate()


def random_test_case(rng, n=5):
    """Small random connected network with moderate loading (always solvable)."""
    return cases.synthetic_case(n_buses=n, seed=int(rng.integers(1, 2 ** 31)),
                                branch_ratio=1.4, gen_fraction=0.4)


def random_state(model, rng, spread=0.2):
    """Random voltage state around flat, for derivative checks (no solve needed)."""
    n = model.n
    return acpf.SystemState(theta=rng.uniform(-spread, spread, n),
                            vmag=rng.uniform(0.95, 1.05, n),
                            lam=rng.uniform(-0.5, 0.5, model.n_constraints))


def stacked(state):
    return np.concatenate([state.theta, state.vmag])
