"""Closed forms for the innocent-node count and the equal-division optimum.

A least monitoring area of unit size holding ``mu`` nodes is cut into four
pieces of sizes ``a1..a4`` by two overlapping grids. With ``k`` adversaries
dropped uniformly, every node of a piece that received an adversary is
marked, so the expected number of marked nodes is
``mu * (1 - sum a_i (1 - a_i)^k)``. Minimising it means maximising the
sum, whose stationary point on the simplex is the equal split.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

SUM_TOL = 1e-12


@dataclass(frozen=True)
class Division:
    a: tuple[float, float, float, float]

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        if len(a) != 4:
            raise ValueError("a division has exactly four parts")
        if any(v < 0 for v in a):
            raise ValueError(f"division parts must be non-negative: {a}")
        if abs(sum(a) - 1.0) > SUM_TOL:
            raise ValueError(f"division parts must sum to 1, got {sum(a)!r}")
        object.__setattr__(self, "a", a)

    @classmethod
    def equal(cls) -> Division:
        return cls((0.25, 0.25, 0.25, 0.25))

    def __iter__(self):
        return iter(self.a)


def _as_division(div) -> Division:
    return div if isinstance(div, Division) else Division(tuple(div))


def objective_f(div, k: int) -> float:
    """sum_i a_i (1 - a_i)^k"""
    if k < 0:
        raise ValueError("k must be non-negative")
    return float(sum(a * (1 - a) ** k for a in _as_division(div)))


def expected_innocents(div, k: int, mu: float) -> float:
    if mu <= 0:
        raise ValueError("mu must be positive")
    div = _as_division(div)
    return float(sum((1 - (1 - a) ** k) * a * mu for a in div))


def lagrange_multiplier(k: int) -> float:
    """Multiplier of the sum constraint at the equal split: (k/4 - 3/4)(3/4)^(k-1)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return (k / 4 - 3 / 4) * 0.75 ** (k - 1)


def hessian_diag(k: int) -> float:
    """g(k) = (3/4)^(k-2) (k-7)/4, the diagonal Hessian entry at the equal split.

    The exact second derivative of a(1-a)^k at a=1/4 is ``k * g(k)``; the
    missing positive factor does not change the sign, which is all the
    second-order test needs.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    return 0.75 ** (k - 2) * (k - 7) / 4


def objective_gradient(x, k: int) -> np.ndarray:
    """d/dx_i of the objective: (1-x_i)^k - k x_i (1-x_i)^(k-1)."""
    x = np.asarray(x, dtype=float)
    return (1 - x) ** k - k * x * (1 - x) ** (k - 1)


def innocent_bound(mu: float, z0: int, n: int) -> float:
    """(mu - 1) z0 / n"""
    if n <= 0:
        raise ValueError("n must be positive")
    return (mu - 1) * z0 / n


def _simplex_grid(steps: int) -> np.ndarray:
    pts = [
        (i, j, l, steps - i - j - l)
        for i in range(steps + 1)
        for j in range(steps + 1 - i)
        for l in range(steps + 1 - i - j)
    ]
    return np.array(pts, dtype=float) / steps


def _f_vec(x: np.ndarray, k: int) -> np.ndarray:
    return (x * (1 - x) ** k).sum(axis=-1)


def optimal_division(k: int, resolution: float = 0.01, sweeps: int = 20) -> Division:
    """Maximise the objective over the simplex without any Lagrange machinery.

    Exhaustive grid at ``resolution``, then pairwise mass transfers between
    coordinates with the step halved after every sweep.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    steps = max(1, round(1 / resolution))
    grid = _simplex_grid(steps)
    x = grid[int(np.argmax(_f_vec(grid, k)))].copy()
    best = float(_f_vec(x, k))
    step = 1.0 / steps
    pairs = list(itertools.permutations(range(4), 2))
    for _ in range(sweeps):
        improved = True
        while improved:
            improved = False
            for i, j in pairs:
                delta = min(step, x[j])
                if delta <= 0:
                    continue
                trial = x.copy()
                trial[i] += delta
                trial[j] -= delta
                val = float(_f_vec(trial, k))
                if val > best:
                    x, best, improved = trial, val, True
        step /= 2
    x = np.clip(x, 0.0, None)
    x /= x.sum()
    return Division(tuple(x))


def monte_carlo_innocents(div, k: int, mu: float, trials: int, rng: np.random.Generator) -> tuple[float, float]:
    """Sample mean and standard error of the marked-node count.

    Each trial drops ``k`` adversaries into the four pieces with
    probabilities ``a_i``; every hit piece contributes its ``mu * a_i``
    nodes once.
    """
    a = np.asarray(tuple(_as_division(div)), dtype=float)
    cells = rng.choice(4, size=(trials, k), p=a) if k else np.zeros((trials, 0), dtype=int)
    hit = np.zeros((trials, 4), dtype=bool)
    if k:
        hit[np.repeat(np.arange(trials), k), cells.ravel()] = True
    counts = (hit * (mu * a)).sum(axis=1)
    return float(counts.mean()), float(counts.std(ddof=1) / np.sqrt(trials))
