from __future__ import annotations

from collections import OrderedDict
from typing import NamedTuple, Optional

import numpy as np

from src.utils.errors import UnconvergedError

# Floor for a non-positive second derivative along the pair direction.
TAU = 1e-12


def rbf_rows(rows: np.ndarray, basis: np.ndarray, gamma: float) -> np.ndarray:
    """
    exp(-gamma * ||r - b||^2) for every row r against every basis vector b.

    Distances are computed by explicit differences, one row at a time, so a
    row's values never depend on which other rows are in the batch.
    """
    out = np.empty((rows.shape[0], basis.shape[0]))
    for i, row in enumerate(rows):
        diff = basis - row
        out[i] = np.exp(-gamma * np.einsum("ij,ij->i", diff, diff))
    return out


class KernelRowCache:
    """
    LRU cache of RBF kernel rows over a fixed training matrix.

    `capacity` is a row count; 0 disables caching. Evicted rows are
    recomputed identically.
    """

    def __init__(self, x: np.ndarray, gamma: float, capacity: int = 256) -> None:
        self.x = x
        self.gamma = gamma
        self.capacity = capacity
        self.hits = 0
        self.misses = 0
        self._rows: "OrderedDict[int, np.ndarray]" = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        if self.capacity > 0:
            cached = self._rows.get(i)
            if cached is not None:
                self._rows.move_to_end(i)
                self.hits += 1
                return cached

        self.misses += 1
        computed = rbf_rows(self.x[i:i + 1], self.x, self.gamma)[0]
        if self.capacity > 0:
            self._rows[i] = computed
            if len(self._rows) > self.capacity:
                self._rows.popitem(last=False)
        return computed


class SmoSolution(NamedTuple):
    alpha: np.ndarray
    rho: float
    iterations: int
    gap: float


def solve(
    x: np.ndarray,
    y: np.ndarray,
    c: float,
    gamma: float,
    tolerance: float = 1e-3,
    max_iterations: int = 1_000_000,
    cache_rows: int = 256,
    cache: Optional[KernelRowCache] = None,
) -> SmoSolution:
    """
    C-SVC dual by SMO with maximal-violating-pair working set selection.

    min 1/2 a'Qa - e'a  s.t.  0 <= a <= C, y'a = 0,  Q_ij = y_i y_j K_ij.
    Decision function: f(x) = sum_i a_i y_i K(x_i, x) - rho.
    """
    n = y.size
    kernel = cache or KernelRowCache(x, gamma, cache_rows)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.ones(n)  # K(x, x) = 1 for the RBF kernel

    iterations = 0
    while True:
        minus_yg = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        if not up.any() or not low.any():
            gap = 0.0
            break

        masked_up = np.where(up, minus_yg, -np.inf)
        masked_low = np.where(low, minus_yg, np.inf)
        i = int(np.argmax(masked_up))
        j = int(np.argmin(masked_low))
        gap = float(masked_up[i] - masked_low[j])
        if gap < tolerance:
            break
        if iterations >= max_iterations:
            raise UnconvergedError(
                f"SMO did not reach KKT tolerance {tolerance} within {max_iterations} iterations (gap {gap:.3g})"
            )
        iterations += 1

        k_i = kernel.row(i)
        k_j = kernel.row(j)
        q_i = y[i] * y * k_i
        q_j = y[j] * y * k_j
        old_i, old_j = alpha[i], alpha[j]

        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * q_i[j], TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            a_i, a_j = old_i + delta, old_j + delta
            if diff > 0:
                if a_j < 0:
                    a_j, a_i = 0.0, diff
            elif a_i < 0:
                a_i, a_j = 0.0, -diff
            if diff > 0:
                if a_i > c:
                    a_i, a_j = c, c - diff
            elif a_j > c:
                a_j, a_i = c, c + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * q_i[j], TAU)
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            a_i, a_j = old_i - delta, old_j + delta
            if total > c:
                if a_i > c:
                    a_i, a_j = c, total - c
            elif a_j < 0:
                a_j, a_i = 0.0, total
            if total > c:
                if a_j > c:
                    a_j, a_i = c, total - c
            elif a_i < 0:
                a_i, a_j = 0.0, total

        alpha[i], alpha[j] = a_i, a_j
        grad += q_i * (a_i - old_i) + q_j * (a_j - old_j)

    return SmoSolution(alpha=alpha, rho=_rho(alpha, y, grad, c), iterations=iterations, gap=gap)


def _rho(alpha: np.ndarray, y: np.ndarray, grad: np.ndarray, c: float) -> float:
    yg = y * grad
    at_upper = alpha >= c
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(np.mean(yg[free]))

    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = float(yg[ub_mask].min()) if ub_mask.any() else np.inf
    lb = float(yg[lb_mask].max()) if lb_mask.any() else -np.inf
    if not np.isfinite(ub) or not np.isfinite(lb):
        return float(ub if np.isfinite(ub) else lb)
    return (ub + lb) / 2.0


def kkt_violation(alpha: np.ndarray, y: np.ndarray, decision: np.ndarray, c: float) -> float:
    """
    Largest KKT violation measured on y*f at the training points.
    """
    margin = y * decision
    bound = 1e-12 * max(1.0, c)
    zero = alpha <= bound
    upper = alpha >= c - bound
    free = ~(zero | upper)

    violation = 0.0
    if zero.any():
        violation = max(violation, float(np.max(np.maximum(0.0, 1.0 - margin[zero]))))
    if upper.any():
        violation = max(violation, float(np.max(np.maximum(0.0, margin[upper] - 1.0))))
    if free.any():
        violation = max(violation, float(np.max(np.abs(margin[free] - 1.0))))
    return violation
