"""Finitely supported signed measures on R^d.

Probability measures are the nonnegative unit-mass special case of the same
type; signed measures (differences of probability measures, in particular)
are first-class values because the spectral penalization machinery consumes
them directly.  All values are immutable after construction and every
operation is pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "SignedAtomicMeasure",
    "Theta",
    "char_fn",
    "char_fn_batch",
    "pushforward_shift",
    "vartheta",
    "dirac",
    "linear_combination",
    "measures_close",
    "measure_to_json",
    "measure_from_json",
]

_PROB_MASS_TOL = 1e-12


@dataclass(frozen=True)
class SignedAtomicMeasure:
    """A finite signed measure sum_i w_i * delta_{x_i} on R^d.

    Parameters
    ----------
    dim : int
        Ambient dimension d >= 1.
    locations : ndarray, shape (n, d)
        Atom locations; must be finite.
    weights : ndarray, shape (n,)
        Atom weights; arbitrary signs unless ``probability`` is set.
    probability : bool
        When True, all weights must be >= 0 and the total mass must equal 1
        within 1e-12.
    """

    dim: int
    locations: np.ndarray
    weights: np.ndarray
    probability: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        loc = np.atleast_2d(np.asarray(self.locations, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if loc.shape != (w.size, self.dim):
            raise ValueError(
                f"locations shape {loc.shape} inconsistent with "
                f"{w.size} weights in dimension {self.dim}"
            )
        if not np.all(np.isfinite(loc)):
            raise ValueError("atom locations must be finite")
        if not np.all(np.isfinite(w)):
            raise ValueError("atom weights must be finite")
        if self.probability:
            if np.any(w < 0):
                raise ValueError("probability measure has a negative weight")
            mass = float(np.sum(w))
            if abs(mass - 1.0) > _PROB_MASS_TOL:
                raise ValueError(f"probability measure has mass {mass!r} != 1")
        # second moment is finite for any finite atom list; assert anyway
        if not np.isfinite(float(np.sum(np.abs(w) * np.sum(loc * loc, axis=1)))):
            raise ValueError("second moment overflow")
        loc = loc.copy()
        w = w.copy()
        loc.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self) -> int:
        return self.weights.size

    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def total_variation(self) -> float:
        return float(np.sum(np.abs(self.weights)))

    def mean(self) -> np.ndarray:
        return self.weights @ self.locations

    def second_moment(self) -> float:
        """sum_i w_i |x_i|^2 (signed for signed measures)."""
        return float(self.weights @ np.sum(self.locations**2, axis=1))

    def abs_moment(self) -> float:
        """sum_i w_i |x_i| with Euclidean atom norms."""
        return float(self.weights @ np.linalg.norm(self.locations, axis=1))

    def integrate(self, f) -> float:
        """Integrate a batched scalar function f((n,d) -> (n,)) against the measure."""
        vals = np.asarray(f(self.locations), dtype=float).ravel()
        return float(self.weights @ vals)


def dirac(x, probability: bool = True) -> SignedAtomicMeasure:
    """Point mass at x (x may be a scalar for d=1)."""
    loc = np.atleast_1d(np.asarray(x, dtype=float))
    return SignedAtomicMeasure(loc.size, loc[None, :], np.array([1.0]), probability)


def linear_combination(
    coeffs: Sequence[float], measures: Sequence[SignedAtomicMeasure]
) -> SignedAtomicMeasure:
    """The signed measure sum_k c_k * mu_k (atoms concatenated, not merged)."""
    if not measures:
        raise ValueError("need at least one measure")
    dim = measures[0].dim
    if any(m.dim != dim for m in measures):
        raise ValueError("dimension mismatch in linear combination")
    locs = np.vstack([m.locations for m in measures])
    ws = np.concatenate([c * m.weights for c, m in zip(coeffs, measures)])
    return SignedAtomicMeasure(dim, locs, ws, probability=False)


@dataclass(frozen=True)
class Theta:
    """A point (t, mu, m) in [0,T] x P_2(R^d) x R^d."""

    t: float
    measure: SignedAtomicMeasure
    m: np.ndarray
    horizon: float | None = field(default=None, compare=False)

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        if m.size != self.measure.dim:
            raise ValueError("shift vector dimension mismatch")
        if not self.measure.probability:
            raise ValueError("Theta requires a probability measure")
        if not (self.t >= 0.0):
            raise ValueError(f"time {self.t} out of [0, T]")
        if self.horizon is not None and self.t > self.horizon + 1e-15:
            raise ValueError(f"time {self.t} exceeds horizon {self.horizon}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "m", m)


def char_fn(measure: SignedAtomicMeasure, k) -> complex:
    """Spectral coefficient (2*pi)^{-d/2} sum_i w_i exp(i k.x_i).

    The modulus is bounded by (2*pi)^{-d/2} times the total variation.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.size != measure.dim:
        raise ValueError(f"wave vector has dim {k.size}, measure has dim {measure.dim}")
    phases = np.exp(1j * (measure.locations @ k))
    return complex((2.0 * np.pi) ** (-measure.dim / 2.0) * (measure.weights @ phases))


def char_fn_batch(measure: SignedAtomicMeasure, nodes: np.ndarray) -> np.ndarray:
    """Vectorized ``char_fn`` over a (M, d) array of wave vectors."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != measure.dim:
        raise ValueError("nodes must have shape (M, d)")
    phases = np.exp(1j * (nodes @ measure.locations.T))
    return (2.0 * np.pi) ** (-measure.dim / 2.0) * (phases @ measure.weights)


def pushforward_shift(measure: SignedAtomicMeasure, m) -> SignedAtomicMeasure:
    """Image of the measure under x -> x + m; weights unchanged."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if m.size != measure.dim:
        raise ValueError("shift vector dimension mismatch")
    return SignedAtomicMeasure(
        measure.dim, measure.locations + m, measure.weights, measure.probability
    )


def vartheta(theta: Theta) -> float:
    """Moment penalty 1 + |m|^2 + int |x|^2 dmu; >= 1 for probability measures."""
    return 1.0 + float(theta.m @ theta.m) + theta.measure.second_moment()


def measures_close(
    a: SignedAtomicMeasure,
    b: SignedAtomicMeasure,
    weight_tol: float = 1e-12,
    location_tol: float = 1e-9,
) -> bool:
    """Equality up to atom permutation and merging (test assertions only)."""
    if a.dim != b.dim:
        return False
    diff = linear_combination([1.0, -1.0], [a, b])
    merged = _merge_atoms(diff, location_tol)
    return bool(np.all(np.abs(merged.weights) <= weight_tol)) if merged.n_atoms else True


def _merge_atoms(m: SignedAtomicMeasure, location_tol: float) -> SignedAtomicMeasure:
    order = np.lexsort(m.locations.T[::-1])
    locs = m.locations[order]
    ws = m.weights[order]
    out_loc, out_w = [], []
    for x, w in zip(locs, ws):
        if out_loc and np.linalg.norm(x - out_loc[-1]) <= location_tol * (
            1.0 + np.linalg.norm(x)
        ):
            out_w[-1] += w
        else:
            out_loc.append(x)
            out_w.append(w)
    return SignedAtomicMeasure(m.dim, np.array(out_loc), np.array(out_w))


def measure_to_json(m: SignedAtomicMeasure) -> str:
    atoms = [list(map(float, x)) + [float(w)] for x, w in zip(m.locations, m.weights)]
    return json.dumps({"dim": m.dim, "atoms": atoms, "probability": m.probability})


def measure_from_json(doc: str | dict) -> SignedAtomicMeasure:
    data = json.loads(doc) if isinstance(doc, str) else doc
    dim = int(data["dim"])
    atoms = data["atoms"]
    if atoms:
        arr = np.asarray(atoms, dtype=float)
        locs, ws = arr[:, :dim], arr[:, dim]
    else:
        locs, ws = np.zeros((0, dim)), np.zeros(0)
    return SignedAtomicMeasure(dim, locs, ws, bool(data.get("probability", False)))
