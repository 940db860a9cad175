"""Projected-gradient multistart ascent over products of simple convex sets."""

from __future__ import annotations

import numpy as np


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of v onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = int(ind[cond][-1])
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _fd_gradient(objective, x, h):
    n = x.size
    grad = np.empty(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        grad[j] = (objective(x + e) - objective(x - e)) / (2.0 * h)
    return grad


def projected_gradient_ascent(
    objective,
    x0: np.ndarray,
    project,
    max_iters: int = 300,
    step0: float = 0.5,
    fd_step: float = 1e-5,
    grad_tol: float = 1e-8,
    shrink: float = 0.5,
    max_backtracks: int = 30,
):
    """Maximize ``objective`` with finite-difference gradients along projected arcs.

    The step grows on accepted trials and backtracks otherwise; convergence
    means the unit-step projected gradient mapping became smaller than
    ``grad_tol``.  Returns (x, value, converged).
    """
    x = project(np.asarray(x0, dtype=float))
    fx = objective(x)
    converged = False
    step = step0
    for _ in range(max_iters):
        grad = _fd_gradient(objective, x, fd_step)
        pg = project(x + grad) - x
        if float(np.linalg.norm(pg)) < grad_tol:
            converged = True
            break
        moved = False
        trial = step
        for _ in range(max_backtracks):
            cand = project(x + trial * grad)
            direction = float(grad @ (cand - x))
            fc = objective(cand)
            if direction > 0 and fc >= fx + 1e-4 * direction:
                x, fx = cand, fc
                step = trial * 2.0
                moved = True
                break
            trial *= shrink
        if not moved:
            # no ascent along the projected arc at any scale: stationary
            converged = True
            break
    return x, fx, converged


def multistart_ascent(objective, starts, project, **kwargs):
    """Run the ascent from each start; ties broken by lowest start index."""
    best = None
    for idx, x0 in enumerate(starts):
        x, fx, conv = projected_gradient_ascent(objective, x0, project, **kwargs)
        if best is None or fx > best[1]:
            best = (x, fx, conv, idx)
    return best
