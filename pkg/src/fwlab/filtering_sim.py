"""Common-noise particle simulation of the controlled conditional law.

Because the common-noise loading does not depend on the state and the
observation is the common path itself, the conditional law given that path is
exactly the mixture over initial condition and idiosyncratic noise: particles
driven by one shared W path and independent B paths represent it with no
reweighting.  Policies only ever see a summary of the empirical law, so
adaptedness to the common filtration is enforced structurally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._rng import substream
from .hamiltonians import FilteringCoeffs, G_filtering, JetArgs
from .measures import SignedAtomicMeasure

__all__ = [
    "LawSummary",
    "ControlPolicy",
    "SimConfig",
    "ParticleEnsemble",
    "simulate_conditional_law",
    "estimate_cost",
    "LQParams",
    "lqg_value_oracle",
    "lqg_feedback_policy",
    "SmoothCandidate",
    "viscosity_residual",
    "POLICY_REGISTRY",
]

_DIVERGENCE_GUARD = 1e6


@dataclass(frozen=True)
class LawSummary:
    """What a policy is allowed to see: moments of the empirical conditional law."""

    mean: np.ndarray
    cov: np.ndarray
    atoms: np.ndarray | None = None


@dataclass(frozen=True)
class ControlPolicy:
    """Measurable feedback on the empirical conditional law.

    ``rule(t, summary)`` must return a control inside the box [lo, hi]
    (clipped defensively on use).
    """

    rule: Callable
    lo: np.ndarray
    hi: np.ndarray

    def __call__(self, t: float, summary: LawSummary):
        a = np.clip(np.atleast_1d(np.asarray(self.rule(t, summary), dtype=float)), self.lo, self.hi)
        return a if a.size > 1 else float(a[0])


def constant_policy(value: float, lo: float = -4.0, hi: float = 4.0) -> ControlPolicy:
    return ControlPolicy(lambda t, s: value, np.atleast_1d(lo), np.atleast_1d(hi))


@dataclass(frozen=True)
class SimConfig:
    dt: float
    n_particles: int
    horizon: float
    runs: int = 1
    seed: int = 0
    record_atoms: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.dt > self.horizon + 1e-15:
            raise ValueError("need 0 < dt <= horizon")
        if self.runs < 1 or self.n_particles < 1:
            raise ValueError("runs and particle count must be >= 1")


@dataclass
class ParticleEnsemble:
    """State of one run: particle positions plus the noise bookkeeping.

    ``common_increments`` is the full pre-drawn shared-noise path of the run;
    ``idio_seed_key`` records the (seed, run, stream) tuple the per-particle
    increments derive from, so a run is reconstructible from the ensemble.
    """

    n_particles: int
    states: np.ndarray  # (N, d)
    common_increments: np.ndarray  # (steps, d2)
    idio_seed_key: tuple
    dt: float
    clock: float

    def __post_init__(self):
        if self.n_particles < 1 or self.states.shape[0] != self.n_particles:
            raise ValueError("particle count mismatch")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("particle states must be finite")

    def summary(self, with_atoms: bool = False) -> LawSummary:
        mean = self.states.mean(axis=0)
        centered = self.states - mean
        cov = centered.T @ centered / max(self.states.shape[0], 1)
        return LawSummary(mean, cov, self.states.copy() if with_atoms else None)

    def empirical_measure(self) -> SignedAtomicMeasure:
        w = np.full(self.n_particles, 1.0 / self.n_particles)
        return SignedAtomicMeasure(self.states.shape[1], self.states.copy(), w, True)


def _draw_initial(mu: SignedAtomicMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    idx = rng.choice(mu.n_atoms, size=n, p=mu.weights / mu.weights.sum())
    return mu.locations[idx].astype(float)


def _steps(t: float, cfg: SimConfig) -> int:
    n = int(round((cfg.horizon - t) / cfg.dt))
    return max(n, 0)


def _run_paths(
    t: float,
    mu: SignedAtomicMeasure,
    policy: ControlPolicy,
    coeffs: FilteringCoeffs,
    cfg: SimConfig,
    run: int,
    w_seed: int | None,
    init_seed: int | None,
    b_seed: int | None,
):
    """Generator of (time, ensemble, control) along one Euler path."""
    if not mu.probability:
        raise ValueError("initial condition must be a probability measure")
    n_steps = _steps(t, cfg)
    b_key = (cfg.seed if b_seed is None else b_seed, run, 2)
    rng_w = substream(cfg.seed if w_seed is None else w_seed, run, 0)
    rng_init = substream(cfg.seed if init_seed is None else init_seed, run, 1)
    rng_b = substream(*b_key)
    X = _draw_initial(mu, cfg.n_particles, rng_init)
    sqdt = math.sqrt(cfg.dt)
    dW = rng_w.standard_normal((n_steps, coeffs.d2)) * sqdt
    ens = ParticleEnsemble(cfg.n_particles, X, dW, b_key, cfg.dt, t)
    a = policy(ens.clock, ens.summary(cfg.record_atoms))
    yield ens.clock, ens, a
    for step in range(n_steps):
        dB = rng_b.standard_normal((cfg.n_particles, coeffs.d1)) * sqdt
        drift = np.asarray(coeffs.b(X, a), dtype=float)
        diff = np.asarray(coeffs.sigma(X, a), dtype=float)
        common = np.asarray(coeffs.sigma_tilde(a), dtype=float)
        X = X + drift * cfg.dt + np.einsum("nij,nj->ni", diff, dB) + common @ dW[step]
        if np.max(np.abs(X)) > _DIVERGENCE_GUARD:
            raise FloatingPointError(
                f"particle state exceeded {_DIVERGENCE_GUARD:g}; check coefficients"
            )
        ens = ParticleEnsemble(
            cfg.n_particles, X, dW, b_key, cfg.dt, t + (step + 1) * cfg.dt
        )
        a = policy(ens.clock, ens.summary(cfg.record_atoms))
        yield ens.clock, ens, a


def simulate_conditional_law(
    t: float,
    mu: SignedAtomicMeasure,
    policy: ControlPolicy,
    coeffs: FilteringCoeffs,
    cfg: SimConfig,
    run: int = 0,
    w_seed: int | None = None,
    init_seed: int | None = None,
    b_seed: int | None = None,
) -> list:
    """Empirical conditional-law path for one run, as (time, measure) pairs.

    One shared common-noise path per run, independent idiosyncratic paths per
    particle; reproducible from (seed, cfg); the optional seed overrides
    split the three noise sources for variance and determinism studies.
    """
    out = []
    for clock, ens, _ in _run_paths(t, mu, policy, coeffs, cfg, run, w_seed, init_seed, b_seed):
        out.append((clock, ens.empirical_measure()))
    return out


def estimate_cost(
    t: float,
    mu: SignedAtomicMeasure,
    policy: ControlPolicy,
    coeffs: FilteringCoeffs,
    cfg: SimConfig,
) -> tuple:
    """Monte Carlo cost (running + terminal) with its run-level standard error.

    Left-endpoint time quadrature for the running cost; the estimate is the
    mean over runs of per-run particle averages, aggregated with exact
    summation so the result does not depend on run ordering.
    """
    per_run = []
    for run in range(cfg.runs):
        running = np.zeros(cfg.n_particles)
        last_states = None
        prev = None
        for clock, ens, a in _run_paths(t, mu, policy, coeffs, cfg, run, None, None, None):
            if prev is not None:
                running += np.asarray(coeffs.r(prev[0], prev[1]), dtype=float) * cfg.dt
            prev = (ens.states, a)
            last_states = ens.states
        total = running + np.asarray(coeffs.l(last_states), dtype=float)
        per_run.append(float(total.mean()))
    est = math.fsum(per_run) / cfg.runs
    if cfg.runs > 1:
        var = math.fsum((v - est) ** 2 for v in per_run) / (cfg.runs - 1)
        stderr = math.sqrt(var / cfg.runs)
    else:
        stderr = 0.0
    return est, stderr


# ---------------------------------------------------------------------------
# scalar linear-quadratic reference solution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LQParams:
    """Scalar family: drift = control, constant noise loadings, quadratic costs.

    Running cost is control_weight * a^2, terminal cost x^2.  The control box
    [-control_bound, control_bound] must be wide enough that the unconstrained
    feedback stays interior for the states of interest.
    """

    sigma: float = 1.0
    sigma_tilde: float = 1.0
    horizon: float = 1.0
    control_weight: float = 1.0
    control_bound: float = 4.0

    def __post_init__(self):
        if self.control_weight <= 0 or self.horizon <= 0 or self.control_bound <= 0:
            raise ValueError("LQ parameters must be positive")
        if self.sigma < 0 or self.sigma_tilde < 0:
            raise ValueError("noise loadings must be nonnegative")


def _riccati_path(lq: LQParams, n_steps: int = 2048) -> tuple:
    """Backward RK4 for dP/dt = P^2/rho, dc/dt = -sigma_tilde^2 P, P(T) = 1, c(T) = 0."""
    rho = lq.control_weight
    ts = np.linspace(0.0, lq.horizon, n_steps + 1)
    P = np.empty(n_steps + 1)
    c = np.empty(n_steps + 1)
    P[-1], c[-1] = 1.0, 0.0
    h = lq.horizon / n_steps

    def rhs(p):
        return p * p / rho

    for k in range(n_steps, 0, -1):
        p = P[k]
        k1 = rhs(p)
        k2 = rhs(p - 0.5 * h * k1)
        k3 = rhs(p - 0.5 * h * k2)
        k4 = rhs(p - h * k3)
        P[k - 1] = p - (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        # c integrates sigma_tilde^2 * P backward; trapezoid on the fine grid
        c[k - 1] = c[k] + 0.5 * h * lq.sigma_tilde**2 * (P[k] + P[k - 1])
    return ts, P, c


def lqg_value_oracle(t: float, mu: SignedAtomicMeasure, lq: LQParams) -> float:
    """Reference optimal cost for the scalar LQ family.

    Backward integration of the Riccati/offset pair for the conditional-mean
    problem, plus the closed contribution of the conditional variance:
    P(t) mean^2 + c(t) + Var(mu) + sigma^2 (T - t).
    Validate against the control-grid dynamic program before relying on it.
    """
    if not isinstance(lq, LQParams):
        raise TypeError("lqg_value_oracle needs LQParams")
    if mu.dim != 1:
        raise ValueError("the LQ reference is scalar")
    if not mu.probability:
        raise ValueError("initial condition must be a probability measure")
    if t < 0 or t > lq.horizon + 1e-12:
        raise ValueError("time outside [0, horizon]")
    ts, P, c = _riccati_path(lq)
    Pt = float(np.interp(t, ts, P))
    ct = float(np.interp(t, ts, c))
    mean = float(mu.mean()[0])
    var = mu.second_moment() - mean * mean
    return Pt * mean * mean + ct + var + lq.sigma**2 * (lq.horizon - t)


def lqg_feedback_policy(lq: LQParams) -> ControlPolicy:
    """Optimal mean-feedback a = -P(t) mean / control_weight, clipped to the box."""
    ts, P, _ = _riccati_path(lq)

    def rule(t, summary: LawSummary):
        return -float(np.interp(t, ts, P)) * float(summary.mean[0]) / lq.control_weight

    return ControlPolicy(rule, np.atleast_1d(-lq.control_bound), np.atleast_1d(lq.control_bound))


POLICY_REGISTRY = {
    "zero": lambda lq=None: constant_policy(0.0),
    "lqg-feedback": lambda lq: lqg_feedback_policy(lq),
}


# ---------------------------------------------------------------------------
# smooth candidates and the equation residual
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothCandidate:
    """A candidate solution with analytic derivative closures.

    ``value(t, mu)`` and ``dt(t, mu)`` are scalars; ``p(t, mu)`` and
    ``q(t, mu)`` return batched fields (the measure-derivative gradient and
    Hessian); ``hess_m(t, mu)`` is the (d, d) second derivative along uniform
    translations of the measure.
    """

    value: Callable
    dt: Callable
    p: Callable
    q: Callable
    hess_m: Callable


def _consistency_check(phi: SmoothCandidate, t: float, mu: SignedAtomicMeasure, tol: float):
    h = 1e-4
    # time slot, probed just inside the domain so the stencil stays valid at t = 0
    t_probe = t + 2 * h
    fd_t = (phi.value(t_probe + h, mu) - phi.value(t_probe - h, mu)) / (2 * h)
    an_t = phi.dt(t_probe, mu)
    if abs(fd_t - an_t) > tol * (1.0 + abs(an_t)):
        raise ValueError(f"dt closure inconsistent: fd={fd_t}, closure={an_t}")
    d = mu.dim
    pfield = phi.p(t, mu)
    # first variation along single-atom moves
    j = 0
    for axis in range(d):
        locs_plus = mu.locations.copy()
        locs_minus = mu.locations.copy()
        locs_plus[j, axis] += h
        locs_minus[j, axis] -= h
        mp = SignedAtomicMeasure(d, locs_plus, mu.weights, True)
        mm = SignedAtomicMeasure(d, locs_minus, mu.weights, True)
        fd = (phi.value(t, mp) - phi.value(t, mm)) / (2 * h)
        an = mu.weights[j] * float(np.asarray(pfield(mu.locations))[j, axis])
        if abs(fd - an) > tol * (1.0 + abs(an)):
            raise ValueError(f"p closure inconsistent along atom 0 axis {axis}: fd={fd}, closure={an}")
    # spatial gradient of p against q
    qfield = phi.q(t, mu)
    x0 = mu.locations[:1]
    for axis in range(d):
        e = np.zeros(d)
        e[axis] = h
        fd = (np.asarray(pfield(x0 + e))[0] - np.asarray(pfield(x0 - e))[0]) / (2 * h)
        an = np.asarray(qfield(x0))[0][:, axis]
        if np.max(np.abs(fd - an)) > tol * (1.0 + np.max(np.abs(an))):
            raise ValueError(f"q closure inconsistent along axis {axis}")
    # translation Hessian
    for axis in range(d):
        e = np.zeros(d)
        e[axis] = h
        vp = phi.value(t, _translate(mu, e))
        vm = phi.value(t, _translate(mu, -e))
        v0 = phi.value(t, mu)
        fd = (vp - 2 * v0 + vm) / (h * h)
        an = float(np.asarray(phi.hess_m(t, mu))[axis, axis])
        if abs(fd - an) > 100 * tol * (1.0 + abs(an)):
            raise ValueError(f"translation Hessian inconsistent along axis {axis}: fd={fd}, closure={an}")


def _translate(mu: SignedAtomicMeasure, e: np.ndarray) -> SignedAtomicMeasure:
    return SignedAtomicMeasure(mu.dim, mu.locations + e, mu.weights, mu.probability)


def viscosity_residual(
    phi: SmoothCandidate,
    t: float,
    mu: SignedAtomicMeasure,
    coeffs: FilteringCoeffs,
    control_grid,
    consistency_tol: float = 1e-3,
) -> float:
    """Equation residual -dt(phi) - G(mu, derivatives of phi) at (t, mu).

    Derivative closures are spot-checked against finite differences of the
    value closure along measure perturbations (time probed at t + O(1e-4),
    so t should sit below the horizon by at least that much) before use; a
    classical solution drives the residual to zero as the control grid
    refines.
    """
    _consistency_check(phi, t, mu, consistency_tol)
    jet = JetArgs(phi.p(t, mu), phi.q(t, mu), np.atleast_2d(phi.hess_m(t, mu)))
    return -phi.dt(t, mu) - G_filtering(mu, jet, coeffs, control_grid)


def lq_candidate(lq: LQParams) -> SmoothCandidate:
    """The LQ reference value as a smooth candidate with analytic derivatives."""
    ts, P, c = _riccati_path(lq)
    rho = lq.control_weight

    def interp(t):
        return float(np.interp(t, ts, P)), float(np.interp(t, ts, c))

    def value(t, mu):
        Pt, ct = interp(t)
        mean = float(mu.mean()[0])
        var = mu.second_moment() - mean * mean
        return Pt * mean * mean + ct + var + lq.sigma**2 * (lq.horizon - t)

    def dt(t, mu):
        Pt, _ = interp(t)
        mean = float(mu.mean()[0])
        return (Pt * Pt / rho) * mean * mean - lq.sigma_tilde**2 * Pt - lq.sigma**2

    def p(t, mu):
        Pt, _ = interp(t)
        mean = float(mu.mean()[0])

        def field(X):
            X = np.atleast_2d(X)
            return 2.0 * Pt * mean + 2.0 * (X - mean)

        return field

    def q(t, mu):
        def field(X):
            X = np.atleast_2d(X)
            return np.full((X.shape[0], 1, 1), 2.0)

        return field

    def hess_m(t, mu):
        Pt, _ = interp(t)
        return np.array([[2.0 * Pt]])

    return SmoothCandidate(value, dt, p, q, hess_m)
