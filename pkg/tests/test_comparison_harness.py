import numpy as np
import pytest

from fwlab import comparison_harness as ch
from fwlab import filtering_sim as fs
from fwlab import fourier_metric as fm
from fwlab._rng import substream

SUPPORT = np.array([[-1.0], [0.0], [1.0]])
LQ = fs.LQParams(sigma=1.0, sigma_tilde=0.5, horizon=1.0)
CFG = ch.DoublingConfig(horizon=1.0, m_box=1.5, n_starts=20, max_iters=100, seed=0)


def _pair(slack=0.25):
    u = ch.lq_discretized_candidate(SUPPORT, LQ, slack=slack, m_box=CFG.m_box, osc=0.25)
    v = ch.lq_discretized_candidate(SUPPORT, LQ, slack=0.0, m_box=CFG.m_box, osc=0.25)
    return u, v


def test_equal_candidates_diagonal_maximum():
    _, v = _pair()
    # diagonal optimality holds in the small-eps limit: the maximizer drifts
    # off-diagonal by O(eps), so the penalty shrinks linearly
    rep_big = ch.doubling_maximize(v, v, 0.05, 0.02, CFG)
    rep = ch.doubling_maximize(v, v, 0.002, 0.02, CFG)
    assert rep.penalty <= 5e-5
    assert rep.penalty <= 0.1 * rep_big.penalty
    assert rep.value == pytest.approx(-2 * 0.02 * 1.0, abs=1e-3)


def test_constant_difference_value():
    support = SUPPORT
    c = 1.7
    u = ch.DiscretizedFunction(support, lambda t, w, m: c, c)
    v = ch.DiscretizedFunction(support, lambda t, w, m: 0.0, 0.0)
    rep = ch.doubling_maximize(u, v, 0.1, 0.02, CFG)
    assert rep.value == pytest.approx(c - 2 * 0.02 * 1.0, abs=1e-6)
    assert rep.penalty <= 1e-8


def test_value_dominates_probes():
    u, v = _pair()
    rep = ch.doubling_maximize(u, v, 0.1, 0.02, CFG)
    metric = ch.FixedSupportMetric(SUPPORT, fm.default_config(1))
    rng = substream(4, 0)
    for _ in range(10_000):
        t1, t2 = rng.uniform(0, 1, 2)
        w1, w2 = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
        m1, m2 = rng.uniform(-CFG.m_box, CFG.m_box, (2, 1))
        h = (
            u(t1, w1, m1)
            - v(t2, w2, m2)
            - metric.d_F_sq(t1, w1, m1, t2, w2, m2) / 0.2
            - 0.02 * (2.0 + m1[0] ** 2 + m2[0] ** 2 + w1 @ (SUPPORT[:, 0] ** 2) + w2 @ (SUPPORT[:, 0] ** 2))
        )
        assert h <= rep.value + 1e-9


def test_value_monotone_in_delta():
    u, v = _pair()
    values = [
        ch.doubling_maximize(u, v, 0.1, delta, CFG).value
        for delta in (0.01, 0.05, 0.2)
    ]
    assert values[0] >= values[1] - 1e-6
    assert values[1] >= values[2] - 1e-6


def test_grid_oracle_cross_validation():
    # coarse exhaustive grid over both copies at n = 2 atoms
    support = np.array([[-0.8], [0.8]])
    u = ch.lq_discretized_candidate(support, LQ, slack=0.3, m_box=1.0, osc=0.25)
    v = ch.lq_discretized_candidate(support, LQ, slack=0.0, m_box=1.0, osc=0.25)
    cfg = ch.DoublingConfig(horizon=1.0, m_box=1.0, n_starts=20, max_iters=100, seed=1)
    eps, delta = 0.2, 0.02
    rep = ch.doubling_maximize(u, v, eps, delta, cfg)
    metric = ch.FixedSupportMetric(support, fm.default_config(1))
    x2 = support[:, 0] ** 2
    ts = np.linspace(0, 1, 7)
    ws = np.linspace(0, 1, 9)
    msh = np.linspace(-1.0, 1.0, 9)
    best = -np.inf
    for t1 in ts:
        for w1 in ws:
            for m1 in msh:
                wv1 = np.array([w1, 1 - w1])
                u_val = u(t1, wv1, np.array([m1]))
                vth1 = 1 + m1 * m1 + wv1 @ x2
                for t2 in ts:
                    for w2 in ws:
                        for m2 in msh:
                            wv2 = np.array([w2, 1 - w2])
                            h = (
                                u_val
                                - v(t2, wv2, np.array([m2]))
                                - metric.d_F_sq(t1, wv1, [m1], t2, wv2, [m2]) / (2 * eps)
                                - delta * (vth1 + 1 + m2 * m2 + wv2 @ x2)
                            )
                            best = max(best, h)
    assert rep.value >= best - 1e-9
    assert rep.value <= best + 0.05  # grid is coarse; the optimizer refines it


def test_penalty_decay_on_lq_pair():
    u, v = _pair()
    rep = ch.penalty_decay_check(u, v, 0.02, [0.5, 0.1, 0.02], CFG)
    assert rep.passed, rep.stats
    pens = rep.stats["penalties"]
    assert pens[-1] <= 0.1 * pens[0] + 1e-6


def test_penalty_decay_with_usc_jump():
    # upper semicontinuous time jump: decay still holds
    u = ch.lq_discretized_candidate(
        SUPPORT,
        LQ,
        slack=0.25,
        m_box=CFG.m_box,
        osc=0.25,
        shift_fn=lambda t, w, m: 0.05 if t <= 0.5 else 0.0,
    )
    v = ch.lq_discretized_candidate(SUPPORT, LQ, slack=0.0, m_box=CFG.m_box, osc=0.25)
    rep = ch.penalty_decay_check(u, v, 0.02, [0.5, 0.1, 0.02], CFG)
    assert rep.passed, rep.stats


def test_penalty_decay_requires_decreasing_eps():
    u, v = _pair()
    with pytest.raises(ValueError):
        ch.penalty_decay_check(u, v, 0.02, [0.1, 0.5], CFG)


def _probes(rng, n=50, m_box=1.5):
    out = []
    for _ in range(n):
        out.append(
            (
                float(rng.uniform(0, 1)),
                rng.dirichlet(np.ones(3)),
                rng.uniform(-m_box, m_box, 1),
            )
        )
    return out


def test_ordering_check_margin_pair(rng):
    base = ch.lq_discretized_candidate(SUPPORT, LQ, slack=0.0, m_box=1.5, osc=1.0)
    c = 0.3
    above = ch.lq_discretized_candidate(
        SUPPORT, LQ, slack=0.0, m_box=1.5, osc=1.0,
        shift_fn=lambda t, w, m: c * (1.0 - t),
    )
    rep = ch.ordering_check(base, above, _probes(rng), horizon=1.0)
    assert rep.passed
    assert rep.stats["min_margin"] >= -1e-12


def test_ordering_check_equality_and_h_shift(rng):
    base = ch.lq_discretized_candidate(SUPPORT, LQ, slack=0.0, m_box=1.5, osc=1.0)
    rep = ch.ordering_check(base, base, _probes(rng), horizon=1.0)
    assert rep.passed
    h = 0.12
    lowered = ch.lq_discretized_candidate(
        SUPPORT, LQ, slack=0.0, m_box=1.5, osc=1.0,
        shift_fn=lambda t, w, m: -h * (1.0 - t + 1.0),
    )
    rep = ch.ordering_check(lowered, base, _probes(rng), horizon=1.0)
    assert rep.passed
    assert rep.stats["min_margin"] >= h - 1e-12


def test_ordering_check_reports_witness(rng):
    base = ch.lq_discretized_candidate(SUPPORT, LQ, slack=0.0, m_box=1.5, osc=1.0)
    above = ch.lq_discretized_candidate(
        SUPPORT, LQ, slack=0.05, m_box=1.5, osc=1.0
    )
    rep = ch.ordering_check(above, base, _probes(rng), horizon=1.0)
    assert not rep.passed
    assert rep.failures


def test_ishii_matrix_examples():
    z = np.zeros((2, 2))
    assert ch.ishii_matrix_check(z, z, 0.5, 1.0)
    assert ch.ishii_matrix_check(z, z, 0.01, 100.0)
    bad = np.eye(2) / 0.5
    assert not ch.ishii_matrix_check(bad, bad, 0.5, 1.0)


def test_ishii_matrix_random_vs_eigen_oracle(rng):
    eps, alpha = 0.4, 0.7
    lo = 1.0 / alpha + 2.0 / eps
    hi = 1.0 / eps + 2.0 * alpha / eps**2
    coupling = np.block([[np.eye(2), -np.eye(2)], [-np.eye(2), np.eye(2)]])
    for _ in range(50):
        X = 0.05 * rng.standard_normal((2, 2))
        X = 0.5 * (X + X.T)
        Y = -X
        block = np.zeros((4, 4))
        block[:2, :2], block[2:, 2:] = X, Y
        expected = (
            np.linalg.eigvalsh(block + lo * np.eye(4))[0] >= -1e-10
            and np.linalg.eigvalsh(hi * coupling - block)[0] >= -1e-10
        )
        assert ch.ishii_matrix_check(X, Y, eps, alpha) == expected


def test_ishii_matrix_validation():
    with pytest.raises(ValueError):
        ch.ishii_matrix_check(np.zeros((2, 2)), np.zeros((3, 3)), 0.5, 1.0)
    with pytest.raises(ValueError):
        ch.ishii_matrix_check(np.zeros((2, 2)), np.zeros((2, 2)), -0.5, 1.0)


def test_discretized_function_bound_holds(rng):
    u, _ = _pair()
    for t, w, m in _probes(rng, 200):
        assert abs(u(t, w, m)) <= u.bound + 1e-12


def test_doubling_rejects_mismatched_support():
    u, _ = _pair()
    other = ch.lq_discretized_candidate(np.array([[-2.0], [2.0]]), LQ, osc=0.25)
    with pytest.raises(ValueError):
        ch.doubling_maximize(u, other, 0.1, 0.01, CFG)
    with pytest.raises(ValueError):
        ch.doubling_maximize(u, u, -0.1, 0.01, CFG)


def test_report_reproducible():
    u, v = _pair()
    a = ch.doubling_maximize(u, v, 0.1, 0.02, CFG)
    b = ch.doubling_maximize(u, v, 0.1, 0.02, CFG)
    assert a.value == b.value and a.penalty == b.penalty
    assert np.array_equal(a.theta_star[1], b.theta_star[1])
