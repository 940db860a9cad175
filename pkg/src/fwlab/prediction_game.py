"""Discrete K-action prediction game under partial monitoring.

Per round the forecaster mixes over actions, the adversary mixes over winning
subsets; the forecaster observes the adversary's mixture and a signed success
signal, never the realized subset.  Shipped: the exact step dynamics, Monte
Carlo regret under strategy pairs, exact small-instance values by backward
induction over public histories with stage matrix games, and the arithmetic
rescaling to the long-horizon normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from ._rng import substream
from .hamiltonians import SimplexAction, hat_weights, subset_vectors, vertex_action
from .measures import SignedAtomicMeasure

__all__ = [
    "GameState",
    "ForecasterStrategy",
    "AdversaryStrategy",
    "step",
    "monte_carlo_regret",
    "exact_value_small",
    "rescaled_value",
    "scaled_initial_measure",
    "rescaled_time",
    "solve_matrix_game",
    "uniform_forecaster",
    "follow_the_leader_forecaster",
    "exp_weights_forecaster",
    "constant_adversary",
    "FORECASTER_REGISTRY",
    "ADVERSARY_REGISTRY",
]


@dataclass(frozen=True)
class GameState:
    """Gap vector (per-action total gain minus forecaster total gain) plus history."""

    n_actions: int
    gaps: np.ndarray
    t: int
    history: tuple  # ((SimplexAction, signed index), ...)

    def __post_init__(self):
        g = np.asarray(self.gaps, dtype=float).ravel()
        if g.size != self.n_actions:
            raise ValueError("gap vector length mismatch")
        if self.t != len(self.history):
            raise ValueError("round index must equal history length")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "gaps", g)


@dataclass(frozen=True)
class ForecasterStrategy:
    """history -> probability vector over the K actions."""

    rule: Callable
    name: str = "forecaster"


@dataclass(frozen=True)
class AdversaryStrategy:
    """history -> mixed subset action."""

    rule: Callable
    name: str = "adversary"


def step(
    state: GameState, b: np.ndarray, a: SimplexAction, rng: np.random.Generator
) -> tuple:
    """One round: sample the action and the subset, update gaps, emit the signal.

    Gap coordinate i moves by 1_{i in J} - 1_{I in J}; the signal is +I on
    success and -I on failure, so the realized action index is always
    recoverable from its magnitude.
    """
    K = state.n_actions
    b = np.asarray(b, dtype=float).ravel()
    if b.size != K or np.any(b < -1e-12) or abs(b.sum() - 1.0) > 1e-9:
        raise ValueError("forecaster mixture must be a probability vector over [K]")
    if a.n_actions != K:
        raise ValueError("adversary action has wrong number of base actions")
    i_real = int(rng.choice(K, p=b / b.sum())) + 1
    mask = int(rng.choice(2**K, p=a.weights / a.weights.sum()))
    in_j = np.array([(mask >> (j - 1)) & 1 for j in range(1, K + 1)], dtype=float)
    success = bool((mask >> (i_real - 1)) & 1)
    gaps = state.gaps + in_j - (1.0 if success else 0.0)
    y = i_real if success else -i_real
    new_state = GameState(K, gaps, state.t + 1, state.history + ((a, y),))
    return new_state, y


def monte_carlo_regret(
    T: int,
    m0: SignedAtomicMeasure,
    forecaster: ForecasterStrategy,
    adversary: AdversaryStrategy,
    runs: int,
    seed: int,
) -> tuple:
    """Average of max_i gaps_i at the horizon over independent runs.

    Runs derive independent substreams from (seed, run) so the estimate is
    reproducible and invariant to run ordering.
    """
    if T < 0 or runs < 1:
        raise ValueError("need T >= 0 and runs >= 1")
    K = m0.dim
    per_run = []
    for run in range(runs):
        rng = substream(seed, run)
        g0 = m0.locations[int(rng.choice(m0.n_atoms, p=m0.weights / m0.weights.sum()))]
        state = GameState(K, g0, 0, ())
        for _ in range(T):
            b = np.asarray(forecaster.rule(m0, state.history), dtype=float)
            a = adversary.rule(m0, state.history)
            state, _ = step(state, b, a, rng)
        per_run.append(float(np.max(state.gaps)))
    est = math.fsum(per_run) / runs
    if runs > 1:
        var = math.fsum((v - est) ** 2 for v in per_run) / (runs - 1)
        stderr = math.sqrt(var / runs)
    else:
        stderr = 0.0
    return est, stderr


# ---------------------------------------------------------------------------
# exact small instances
# ---------------------------------------------------------------------------


def solve_matrix_game(M: np.ndarray) -> tuple:
    """Value and optimal mixtures of min_rows max_cols b^T M c.

    Pure saddle points are returned exactly; everything else goes through the
    standard linear program.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n_rows, n_cols = M.shape
    row_worst = M.max(axis=1)
    col_best = M.min(axis=0)
    lo = float(col_best.max())  # maximin over pure columns
    hi = float(row_worst.min())  # minimax over pure rows
    if lo == hi:
        r = int(np.argmin(row_worst))
        c = int(np.argmax(col_best))
        b = np.zeros(n_rows)
        b[r] = 1.0
        col = np.zeros(n_cols)
        col[c] = 1.0
        return hi, b, col
    # variables (b_1..b_R, v): minimize v s.t. M^T b <= v, sum b = 1, b >= 0
    c_obj = np.zeros(n_rows + 1)
    c_obj[-1] = 1.0
    A_ub = np.hstack([M.T, -np.ones((n_cols, 1))])
    b_ub = np.zeros(n_cols)
    A_eq = np.zeros((1, n_rows + 1))
    A_eq[0, :n_rows] = 1.0
    bounds = [(0, None)] * n_rows + [(None, None)]
    res = linprog(c_obj, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"matrix game LP failed: {res.message}")
    value = float(res.x[-1])
    row_mix = np.maximum(res.x[:n_rows], 0.0)
    row_mix /= row_mix.sum()
    dual = res.ineqlin.marginals
    col_mix = np.maximum(-np.asarray(dual), 0.0)
    s = col_mix.sum()
    col_mix = col_mix / s if s > 0 else np.full(n_cols, 1.0 / n_cols)
    return value, row_mix, col_mix


@dataclass(frozen=True)
class ExactValueConfig:
    max_actions: int = 3
    max_horizon: int = 6
    max_tree_nodes: int = 2_000_000
    belief_round: int = 12
    dump_table: bool = False


def _posterior_update(belief: dict, a: SimplexAction, y: int, round_digits: int) -> dict:
    """Push a belief over gap vectors through one observed (mixture, signal) pair."""
    K = a.n_actions
    i = abs(y)
    success = y > 0
    E = subset_vectors(K)
    masks = np.arange(2**K)
    member = (masks >> (i - 1) & 1).astype(bool)
    sel = member if success else ~member
    wsel = a.weights[sel]
    total = wsel.sum()
    if total <= 0:
        raise ValueError("observed signal has zero probability under the mixture")
    incs = E[sel] - (1.0 if success else 0.0)
    out: dict = {}
    for gaps, p in belief.items():
        g = np.asarray(gaps)
        for w, inc in zip(wsel / total, incs):
            key = tuple(np.round(g + inc, round_digits))
            out[key] = out.get(key, 0.0) + p * w
    return out


def _belief_key(belief: dict, digits: int) -> tuple:
    return tuple(sorted((g, round(p, digits)) for g, p in belief.items()))


def exact_value_small(
    T: int,
    m0: SignedAtomicMeasure,
    adversary_grid: list,
    cfg: ExactValueConfig = ExactValueConfig(),
):
    """Exact inf-sup regret value against a finite adversary grid.

    Backward induction over public belief states: each stage is a finite
    zero-sum matrix game between the K pure forecaster actions and the grid
    actions, with chance resolving the signal.  The grid restricts the
    adversary, so the result lower-bounds the unrestricted value.  Point-mass
    initial distributions only.
    """
    if m0.n_atoms != 1:
        raise ValueError("exact values need a point-mass initial distribution")
    K = m0.dim
    if K > cfg.max_actions or T > cfg.max_horizon:
        raise ValueError(f"instance exceeds size limits K<={cfg.max_actions}, T<={cfg.max_horizon}")
    if not adversary_grid:
        raise ValueError("adversary grid must be nonempty")
    est_nodes = (2 * K * len(adversary_grid)) ** T
    if est_nodes > cfg.max_tree_nodes:
        raise ValueError(f"history tree too large ({est_nodes} nodes)")
    hats = [[hat_weights(a, i) for i in range(1, K + 1)] for a in adversary_grid]
    memo: dict = {}
    table: dict = {}

    def value(belief: dict, rounds_left: int, label: tuple) -> float:
        if rounds_left == 0:
            return math.fsum(p * max(g) for g, p in belief.items())
        key = (rounds_left, _belief_key(belief, cfg.belief_round))
        if key in memo:
            return memo[key]
        M = np.zeros((K, len(adversary_grid)))
        for ai, a in enumerate(adversary_grid):
            for i in range(1, K + 1):
                hat_i, hat_mi = hats[ai][i - 1]
                v_succ = v_fail = 0.0
                if hat_i > 0:
                    child = _posterior_update(belief, a, +i, cfg.belief_round)
                    v_succ = value(child, rounds_left - 1, label + ((ai, +i),))
                if hat_mi > 0:
                    child = _posterior_update(belief, a, -i, cfg.belief_round)
                    v_fail = value(child, rounds_left - 1, label + ((ai, -i),))
                M[i - 1, ai] = hat_i * v_succ + hat_mi * v_fail
        val, _, _ = solve_matrix_game(M)
        memo[key] = val
        if cfg.dump_table:
            table[label] = {"value": val, "matrix": M.tolist()}
        return val

    root_belief = {tuple(m0.locations[0]): 1.0}
    root = value(root_belief, T, ())
    if cfg.dump_table:
        return root, table
    return root


# ---------------------------------------------------------------------------
# rescaling
# ---------------------------------------------------------------------------


def scaled_initial_measure(mu: SignedAtomicMeasure, T: int) -> SignedAtomicMeasure:
    """Image of mu under multiplication by sqrt(T)."""
    return SignedAtomicMeasure(mu.dim, mu.locations * math.sqrt(T), mu.weights, mu.probability)


def rescaled_time(s: float, T: int) -> int:
    """Round index ceil(s T) for normalized time s in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("normalized time must lie in [0, 1]")
    return int(math.ceil(s * T))


def rescaled_value(values: dict) -> dict:
    """Divide horizon-indexed values by sqrt(T): {T: {s: v}} -> {s: {T: v/sqrt(T)}}.

    Pure arithmetic; the inputs must already be evaluated at round ceil(s T)
    from the sqrt(T)-scaled initial measure.
    """
    out: dict = {}
    for T, by_s in values.items():
        for s, v in by_s.items():
            out.setdefault(s, {})[T] = v / math.sqrt(T)
    return out


# ---------------------------------------------------------------------------
# baseline strategies (not optimality claims)
# ---------------------------------------------------------------------------


def uniform_forecaster(K: int) -> ForecasterStrategy:
    probs = np.full(K, 1.0 / K)
    return ForecasterStrategy(lambda m0, h: probs, name="uniform")


def follow_the_leader_forecaster(K: int) -> ForecasterStrategy:
    """Greedy on the exactly-known expected per-action gains sum_s hat a_s(i)."""

    def rule(m0, history):
        scores = np.zeros(K)
        for a, _y in history:
            scores += np.array([hat_weights(a, i)[0] for i in range(1, K + 1)])
        out = np.zeros(K)
        out[int(np.argmax(scores))] = 1.0
        return out

    return ForecasterStrategy(rule, name="follow-the-leader")


def exp_weights_forecaster(K: int, eta: float = 0.5) -> ForecasterStrategy:
    """Exponential weights on the observed-mixture gain estimates."""

    def rule(m0, history):
        scores = np.zeros(K)
        for a, y in history:
            est = np.array([hat_weights(a, i)[0] for i in range(1, K + 1)])
            est[abs(y) - 1] = 1.0 if y > 0 else 0.0
            scores += est
        w = np.exp(eta * (scores - scores.max()))
        return w / w.sum()

    return ForecasterStrategy(rule, name="exp-weights")


def constant_adversary(a: SimplexAction) -> AdversaryStrategy:
    return AdversaryStrategy(lambda m0, h: a, name="constant")


def full_set_adversary(K: int) -> AdversaryStrategy:
    return constant_adversary(vertex_action(K, 2**K - 1))


FORECASTER_REGISTRY = {
    "uniform": uniform_forecaster,
    "follow-the-leader": follow_the_leader_forecaster,
    "exp-weights": exp_weights_forecaster,
}

ADVERSARY_REGISTRY = {
    "full-set": full_set_adversary,
    "empty-set": lambda K: constant_adversary(vertex_action(K, 0)),
    "first-action": lambda K: constant_adversary(vertex_action(K, 1)),
    "uniform": lambda K: constant_adversary(
        SimplexAction(K, np.full(2**K, 1.0 / 2**K))
    ),
}
