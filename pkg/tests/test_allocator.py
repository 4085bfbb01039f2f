import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modalloc import qp
from modalloc.allocator import (
    AllocatorConfig,
    AllocatorState,
    allocate,
    build_qp,
    derive_cost_terms,
    fixed_allocate,
)
from modalloc.errors import ConfigError, DimensionMismatch, RankDeficient


def random_cfg(seed, n=2, m=5, **kw):
    rng = np.random.default_rng(seed)
    params = dict(w_u=rng.uniform(0.5, 2.0, m), w_s=rng.uniform(0.0, 2.0, m),
                  w_v=rng.uniform(0.5, 4.0, n), lam=1.0, rho=10.0)
    params.update(kw)
    return AllocatorConfig(rng.normal(size=(n, m)), **params)


def test_paper_weights_cost_terms():
    cfg = AllocatorConfig(np.array([[1.0, 1.0, 1.0]]), w_u=1.0, w_s=2.0)
    p = np.array([0.1, -0.2, 0.3])
    u_d, w = derive_cost_terms(cfg, AllocatorState(p))
    assert u_d == pytest.approx(0.8 * p, abs=1e-15)
    assert w == pytest.approx(np.sqrt(5.0) * np.eye(3), abs=1e-15)


def test_degenerate_cost_terms():
    cfg = AllocatorConfig(np.array([[1.0, 1.0, 1.0]]), w_u=1.5, w_s=0.0)
    u_d, w = derive_cost_terms(cfg, AllocatorState([0.1, 0.2, 0.3]))
    assert np.all(u_d == 0.0)
    assert w == pytest.approx(1.5 * np.eye(3))
    cfg = AllocatorConfig(np.array([[1.0, 1.0, 1.0]]), w_u=[1.0, 2.0, 3.0], w_s=[3.0, 1.0, 0.5])
    u_d, _ = derive_cost_terms(cfg, AllocatorState(np.zeros(3)))
    assert np.all(u_d == 0.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), full=st.booleans())
def test_cost_simplification_exact(seed, full):
    rng = np.random.default_rng(seed)
    m = 4
    if full:
        wu = rng.normal(size=(m, m)) + 3 * np.eye(m)
        ws = rng.normal(size=(m, m))
    else:
        wu, ws = rng.uniform(0.2, 3.0, m), rng.uniform(0.0, 3.0, m)
    cfg = AllocatorConfig(rng.normal(size=(2, m)), w_u=wu, w_s=ws)
    p = rng.uniform(-0.4, 0.4, m)
    u_d, w = derive_cost_terms(cfg, AllocatorState(p))

    def original(u):
        return np.sum((cfg.w_u @ u) ** 2) + np.sum((cfg.w_s @ (u - p)) ** 2)

    def simplified(u):
        return np.sum((w @ (u - u_d)) ** 2)

    u1, u2 = rng.normal(size=m), rng.normal(size=m)
    d_orig = original(u1) - original(u2)
    d_simp = simplified(u1) - simplified(u2)
    assert abs(d_orig - d_simp) <= 1e-10 * max(1.0, abs(d_orig))


def test_scalar_qp_example():
    cfg = AllocatorConfig([[1.0]], w_u=1.0, w_s=0.0, w_v=1.0, lam=0.0, rho=1.0,
                          u_min=-10.0, u_max=10.0, require_redundancy=False)
    prob = build_qp(cfg, AllocatorState([0.0]), [1.0])
    assert prob.stacked_a == pytest.approx(np.array([[1.0], [1.0]]))
    assert prob.stacked_b == pytest.approx([1.0, 0.0])
    assert prob.hessian == pytest.approx(np.array([[2.0, -2.0], [-2.0, 2.0]]))
    for sol in (qp.solve(prob), qp.solve_exact_oracle(prob)):
        assert sol.point[0] - sol.point[1] == pytest.approx(0.5, abs=1e-12)
    assert allocate(cfg, AllocatorState([0.0]), [1.0]) == pytest.approx([0.5], abs=1e-12)


def test_lambda_adds_one_to_linear_term():
    cfg0 = random_cfg(1, lam=0.0)
    cfg1 = random_cfg(1, lam=1.0)
    state = AllocatorState(np.full(5, 0.1))
    v = np.array([0.2, -0.1])
    diff = build_qp(cfg1, state, v).linear - build_qp(cfg0, state, v).linear
    assert np.all(diff == 1.0)


def test_all_failed_pins_zero():
    cfg = random_cfg(2)
    state = AllocatorState(np.zeros(5), status=np.zeros(5, dtype=bool))
    prob = build_qp(cfg, state, [0.3, 0.3])
    assert np.all(prob.upper == 0.0) and np.all(prob.lower == 0.0)
    assert np.all(allocate(cfg, state, [0.3, 0.3]) == 0.0)


def test_failed_bounds_and_dimension_checks():
    cfg = random_cfg(3)
    status = np.array([True, False, True, True, False])
    prob = build_qp(cfg, AllocatorState(np.zeros(5), status), [0.1, 0.1])
    assert prob.upper[1] == prob.upper[6] == prob.upper[4] == prob.upper[9] == 0.0
    assert prob.upper[0] == pytest.approx(0.4) and prob.upper[5] == pytest.approx(0.4)
    with pytest.raises(DimensionMismatch):
        build_qp(cfg, AllocatorState(np.zeros(5)), [0.1])
    with pytest.raises(DimensionMismatch):
        build_qp(cfg, AllocatorState(np.zeros(4)), [0.1, 0.1])
    with pytest.raises(DimensionMismatch):
        build_qp(cfg, AllocatorState(np.zeros(5)), [np.nan, 0.1])


def test_zero_demand_zero_command():
    cfg = random_cfg(4)
    assert np.all(allocate(cfg, AllocatorState(np.zeros(5)), np.zeros(2)) == 0.0)


def three_actuator_cfg():
    return AllocatorConfig(np.array([[1.0, 1.0, 1.0]]), w_u=1.0, w_s=0.0, w_v=1.0,
                           lam=0.0, rho=1e6, u_min=-0.4, u_max=0.4)


def test_symmetric_split():
    # rho = 1e6 puts the Hessian near 1e12, so solver and oracle agree to ~1e-5
    cfg = three_actuator_cfg()
    u = allocate(cfg, AllocatorState(np.zeros(3)), [0.3])
    assert u == pytest.approx([0.1, 0.1, 0.1], abs=1e-4)
    oracle = qp.solve_exact_oracle(build_qp(cfg, AllocatorState(np.zeros(3)), [0.3]))
    assert oracle.point[:3] - oracle.point[3:] == pytest.approx([0.1, 0.1, 0.1], abs=1e-4)


def test_remaining_actuator_absorbs_demand():
    cfg = three_actuator_cfg()
    state = AllocatorState(np.zeros(3), status=[True, False, False])
    u = allocate(cfg, state, [0.3])
    assert u[0] == pytest.approx(0.3, abs=1e-4)
    assert u[1] == 0.0 and u[2] == 0.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.01, 5.0))
def test_bounds_and_pinning(seed, scale):
    rng = np.random.default_rng(seed)
    cfg = random_cfg(seed, u_min=-rng.uniform(0.0, 0.5, 5), u_max=rng.uniform(0.0, 0.5, 5))
    status = rng.uniform(size=5) > 0.3
    state = AllocatorState(np.zeros(5), status=status)
    for _ in range(3):
        u = allocate(cfg, state, scale * rng.normal(size=2))
        assert np.all(u >= cfg.u_min) and np.all(u <= cfg.u_max)
        assert np.all(u[~status] == 0.0)
        assert np.array_equal(state.u_prev, u)


def test_regularization_path():
    cfg_base = random_cfg(7)
    v = np.array([0.4, -0.3])
    prev = np.array([0.05, -0.1, 0.0, 0.2, 0.1])
    norms = []
    for lam in [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 100.0]:
        cfg = random_cfg(7, lam=lam)
        assert np.array_equal(cfg.effectiveness, cfg_base.effectiveness)
        norms.append(np.sum(np.abs(allocate(cfg, AllocatorState(prev), v))))
    assert all(b <= a + 1e-9 for a, b in zip(norms, norms[1:]))


def test_penalty_consistency_and_exact_limit():
    rng = np.random.default_rng(8)
    e = rng.normal(size=(2, 5))
    wu, ws = rng.uniform(0.5, 2.0, 5), rng.uniform(0.5, 2.0, 5)
    wv = rng.uniform(1.0, 3.0, 2)
    prev = rng.uniform(-0.05, 0.05, 5)
    v = np.array([0.05, -0.03])
    residuals = []
    for rho in [1.0, 10.0, 100.0, 1000.0]:
        cfg = AllocatorConfig(e, w_u=wu, w_s=ws, w_v=wv, lam=0.0, rho=rho, u_min=-10.0, u_max=10.0)
        u = allocate(cfg, AllocatorState(prev), v)
        residuals.append(np.linalg.norm(e @ u - v))
    assert all(b <= a + 1e-9 for a, b in zip(residuals, residuals[1:]))

    cfg = AllocatorConfig(e, w_u=wu, w_s=ws, w_v=wv, lam=0.0, rho=1e6, u_min=-10.0, u_max=10.0)
    u = allocate(cfg, AllocatorState(prev), v)
    # weighted least squares with the demand as a hard equality
    u_d, w = derive_cost_terms(cfg, AllocatorState(prev))
    m_inv = np.linalg.inv(w.T @ w)
    exact = u_d + m_inv @ e.T @ np.linalg.solve(e @ m_inv @ e.T, v - e @ u_d)
    assert np.max(np.abs(u - exact)) <= 1e-4


def test_null_space_leaves_penalty_unchanged():
    cfg = random_cfg(9)
    e = cfg.effectiveness
    _, _, vt = np.linalg.svd(e)
    null = vt[2:]
    u = allocate(cfg, AllocatorState(np.zeros(5)), [0.2, 0.1])
    v = np.array([0.2, 0.1])
    base = cfg.rho * np.linalg.norm(cfg.w_v @ (e @ u - v))
    for row in null:
        moved = cfg.rho * np.linalg.norm(cfg.w_v @ (e @ (u + 0.3 * row) - v))
        assert abs(moved - base) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_complementarity(seed):
    rng = np.random.default_rng(seed)
    cfg = random_cfg(seed, lam=rng.uniform(0.01, 3.0))
    state = AllocatorState(rng.uniform(-0.4, 0.4, 5))
    sol = qp.solve(build_qp(cfg, state, rng.normal(size=2)))
    assert np.all(sol.point[:5] * sol.point[5:] <= 1e-10)


def test_fixed_allocation():
    assert fixed_allocate([[1.0, 1.0]], [1.0]) == pytest.approx([0.5, 0.5])
    assert np.all(fixed_allocate([[1.0, 1.0]], [0.0]) == 0.0)
    rng = np.random.default_rng(10)
    e = rng.normal(size=(2, 5))
    v = rng.normal(size=2)
    u = fixed_allocate(e, v)
    assert np.max(np.abs(e @ u - v)) <= 1e-10
    _, _, vt = np.linalg.svd(e)
    assert np.max(np.abs(vt[2:] @ u)) <= 1e-10
    with pytest.raises(RankDeficient):
        fixed_allocate([[1.0, 1.0], [2.0, 2.0]], [1.0, 1.0])


@pytest.mark.parametrize("kwargs, needle", [
    (dict(u_min=0.1), "u_min <= 0"),
    (dict(u_max=-0.1), "u_min <= 0"),
    (dict(lam=-1.0), "lambda"),
    (dict(rho=0.0), "rho"),
    (dict(t_s=0.0), "ts"),
    (dict(w_u=0.0), "w_u"),
    (dict(w_v=[1.0, 0.0]), "w_v"),
    (dict(w_u=[1.0, 2.0]), "w_u"),
])
def test_config_validation(kwargs, needle):
    with pytest.raises(ConfigError, match=needle):
        AllocatorConfig(np.random.default_rng(0).normal(size=(2, 5)), **kwargs)


def test_redundancy_and_rank_required():
    with pytest.raises(ConfigError, match="redundancy"):
        AllocatorConfig(np.eye(2))
    with pytest.raises(ConfigError, match="rank"):
        AllocatorConfig(np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]))


def test_state_zeroes_failed_entries():
    state = AllocatorState([0.1, 0.2, 0.3], status=[True, False, True])
    assert list(state.u_prev) == [0.1, 0.0, 0.3]
    state.set_status([False, True, True])
    assert list(state.u_prev) == [0.0, 0.0, 0.3]
