import numpy as np
import pytest
import scipy.sparse as sp

from flier import acpf, netmodel
from flier.netmodel import Branch, Bus, Generator, RawCase

from conftest import random_state, random_test_case, stacked


# ---------------------------------------------------------------------------
# power mismatch
# ---------------------------------------------------------------------------

def test_mismatch_zero_network(model57, pre57):
    zero_model = netmodel.PowerFlowModel(
        Y=sp.csr_matrix((57, 57), dtype=complex), s=np.zeros(114),
        C=model57.C, b=model57.b, obs_map=model57.obs_map,
        constraint_labels=model57.constraint_labels,
        vm_start=model57.vm_start, va_start=model57.va_start)
    state = acpf.SystemState(pre57.theta, pre57.vmag,
                             np.arange(1.0, model57.n_constraints + 1))
    r = acpf.power_mismatch(state, zero_model)
    v = stacked(state)
    assert np.allclose(r[:114], model57.C @ state.lam)
    assert np.allclose(r[114:], model57.C.T @ v - model57.b)


def test_mismatch_flat_state_lossless_line():
    # flat voltages on one reactive line: series and shunt terms cancel exactly
    case = RawCase(100.0, [Bus(1, "slack", 0, 0, 0, 0, 1.0, 0.0),
                           Bus(2, "pq", 0, 0, 0, 0, 1.0, 0.0)],
                   [Generator(1, 0, 0, 1.0)],
                   [Branch(1, 2, 0.0, 0.25, 0.0)])
    net = netmodel.build_admittance(case)
    H = acpf.injections(np.zeros(2), np.ones(2), net.Y)
    assert np.max(np.abs(H)) == 0.0


def test_mismatch_solved_case57(model57, pre57):
    assert np.max(np.abs(acpf.power_mismatch(pre57, model57))) < 1e-8


# ---------------------------------------------------------------------------
# jacobian
# ---------------------------------------------------------------------------

def _fd_jacobian(theta, vmag, Y, h=1e-6):
    n = len(theta)
    J = np.zeros((2 * n, 2 * n))
    for col in range(2 * n):
        tp, vp = theta.copy(), vmag.copy()
        tm, vm = theta.copy(), vmag.copy()
        if col < n:
            tp[col] += h
            tm[col] -= h
        else:
            vp[col - n] += h
            vm[col - n] -= h
        J[:, col] = (acpf.injections(tp, vp, Y) - acpf.injections(tm, vm, Y)) / (2 * h)
    return J


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(5)
    case = random_test_case(rng, n=5)
    net = netmodel.build_admittance(case)
    model = net.flow_model()
    st = random_state(model, rng)
    J = acpf.jacobian(st.theta, st.vmag, net.Y).toarray()
    Jfd = _fd_jacobian(st.theta, st.vmag, net.Y)
    assert np.max(np.abs(J - Jfd)) / np.max(np.abs(Jfd)) < 1e-6


def test_jacobian_zero_admittance():
    J = acpf.jacobian(np.zeros(4), np.ones(4), sp.csr_matrix((4, 4), dtype=complex))
    assert J.nnz == 0 or np.max(np.abs(J.toarray())) == 0.0


def test_jacobian_sparsity_matches_adjacency(net57, pre57):
    J = acpf.jacobian(pre57.theta, pre57.vmag, net57.Y).toarray()
    n = net57.n
    adj = (np.abs(net57.Y.toarray()) > 0) | np.eye(n, dtype=bool)
    for (bi, bk) in [(0, 30), (5, 40), (20, 50)]:
        if not adj[bi, bk]:
            assert J[bi, bk] == 0 and J[bi, n + bk] == 0
            assert J[n + bi, bk] == 0 and J[n + bi, n + bk] == 0
    # every structural entry of the P-theta block lies inside the adjacency
    assert np.all((np.abs(J[:n, :n]) > 0) <= adj)


# ---------------------------------------------------------------------------
# newton solve
# ---------------------------------------------------------------------------

def test_newton_converges_case57(pre57, model57):
    assert np.max(np.abs(acpf.power_mismatch(pre57, model57))) < 1e-8


def test_newton_quadratic_tail(model57):
    st = acpf.newton_solve(model57)
    r = st.residuals
    # superlinear contraction over the last two steps
    assert r[-1] < r[-2] ** 1.5
    assert r[-2] < r[-3] ** 1.5


def test_newton_already_solved_is_instant(model57, pre57):
    st = acpf.newton_solve(model57, x0=pre57.copy())
    assert len(st.residuals) - 1 <= 1


def test_newton_islanding_fails(case57, net57):
    # branch 44 is 32-33, the only connection of bus 33
    br = case57.branches[44]
    assert (br.from_bus, br.to_bus) == (32, 33)
    assert not net57.is_connected_without(44)
    brs = list(case57.branches)
    brs[44] = Branch(32, 33, br.r, br.x, br.b_charge, br.tap, br.shift, 0)
    net2 = netmodel.build_admittance(RawCase(100.0, case57.buses,
                                             case57.generators, brs))
    with pytest.raises((acpf.ConvergenceFailure, acpf.SingularSystemError)):
        acpf.newton_solve(net2.flow_model())


# ---------------------------------------------------------------------------
# bordered solves
# ---------------------------------------------------------------------------

def test_bordered_zero_rhs(bordered57):
    assert np.all(bordered57.solve(np.zeros(bordered57.dim)) == 0.0)


def test_bordered_roundtrip(bordered57):
    rng = np.random.default_rng(7)
    rhs = rng.standard_normal(bordered57.dim)
    x = bordered57.solve(rhs)
    assert np.linalg.norm(bordered57.A @ x - rhs) < 1e-10 * np.linalg.norm(rhs)
    y = bordered57.solve_transpose(rhs)
    assert np.linalg.norm(bordered57.A.T @ y - rhs) < 1e-10 * np.linalg.norm(rhs)


def test_transpose_solve_extracts_inverse_rows():
    rng = np.random.default_rng(12)
    case = random_test_case(rng, n=5)
    net = netmodel.build_admittance(case)
    model = net.flow_model()
    st = acpf.newton_solve(model)
    bordered = acpf.BorderedSystem(model, st)
    Ainv = np.linalg.inv(bordered.A.toarray())
    for i in (0, 3, bordered.dim - 1):
        e = np.zeros(bordered.dim)
        e[i] = 1.0
        row = bordered.solve_transpose(e)
        assert np.max(np.abs(row - Ainv[i, :])) < 1e-10 * max(1, np.abs(Ainv[i]).max())


def test_bordered_agrees_with_dense_lu_small():
    rng = np.random.default_rng(21)
    case = random_test_case(rng, n=12)
    net = netmodel.build_admittance(case)
    model = net.flow_model()
    st = acpf.newton_solve(model)
    bordered = acpf.BorderedSystem(model, st)
    rhs = rng.standard_normal(bordered.dim)
    dense = np.linalg.solve(bordered.A.toarray(), rhs)
    assert np.linalg.norm(bordered.solve(rhs) - dense) < 1e-10 * np.linalg.norm(dense)


def test_singular_system_diagnostic():
    # two-bus island with no reference: bordered matrix is singular
    case = RawCase(100.0,
                   [Bus(1, "slack", 0, 0, 0, 0, 1.0, 0.0),
                    Bus(2, "pq", 0.1, 0.0, 0, 0, 1.0, 0.0),
                    Bus(3, "pq", 0.0, 0.0, 0, 0, 1.0, 0.0),
                    Bus(4, "pq", 0.0, 0.0, 0, 0, 1.0, 0.0)],
                   [Generator(1, 0, 0, 1.0)],
                   [Branch(1, 2, 0.01, 0.1, 0.0),
                    Branch(3, 4, 0.01, 0.1, 0.0)])
    net = netmodel.build_admittance(case)
    model = net.flow_model()
    with pytest.raises(acpf.SingularSystemError, match="singular"):
        acpf.BorderedSystem(model, acpf.initial_state(model))
