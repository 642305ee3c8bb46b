"""Soft dynamic time warping: forward cost, exact gradient, hard-min limit.

The accumulated cost D is filled with the recursion

    D(0, 0) = C(0, 0)
    D(0, m) = sum_{k<=m} C(0, k)          (single path along the border)
    D(n, 0) = sum_{k<=n} C(k, 0)
    D(n, m) = C(n, m) + softmin_g(D(n-1, m-1), D(n-1, m), D(n, m-1))

where softmin_g(S) = -g * log(sum_s exp(-s / g)). The scalar alignment cost
is D(N-1, M-1); it equals -g * log(sum over all monotone warping paths of
exp(-path cost / g)), so its gradient with respect to C(n, m) is the
probability that a path drawn from the Gibbs distribution over warping
paths passes through (n, m). That gradient ("occupancy") is computed by a
backward pass over the same lattice in O(N*M).

Interior cells are processed one anti-diagonal at a time with strided slice
views, which keeps both passes vectorized; results are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import as_cost_matrix

PATH_ENUMERATION_LIMIT = 10**6


class TooManyPathsError(ValueError):
    """Raised when brute-force enumeration would visit more than 10^6 paths."""


@dataclass(frozen=True)
class SoftDtwResult:
    """Scalar soft alignment cost plus the full accumulated matrix."""

    cost: float
    accumulated: np.ndarray


def _check_gamma(gamma: float) -> float:
    g = float(gamma)
    if not math.isfinite(g) or g <= 0.0:
        raise ValueError(f"gamma must be a finite positive real, got {gamma!r}")
    return g


def soft_min(values, gamma: float) -> float:
    """Smooth lower bound of min(values): -gamma * log(sum(exp(-v / gamma))).

    Evaluated in shifted form (minimum subtracted before exponentiation) so
    it is overflow-safe down to very small gamma.
    """
    g = _check_gamma(gamma)
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("soft_min of an empty set is undefined")
    if not np.all(np.isfinite(arr)):
        raise ValueError("soft_min requires finite values")
    lo = arr.min()
    return float(lo - g * np.log(np.sum(np.exp((lo - arr) / g))))


def _forward_fill(c: np.ndarray, g: float) -> np.ndarray:
    n, m = c.shape
    d = np.empty_like(c)
    d[0, :] = np.cumsum(c[0, :])
    d[:, 0] = np.cumsum(c[:, 0])
    if n > 1 and m > 1:
        dflat = d.ravel()
        cflat = c.ravel()
        step = m - 1
        for k in range(2, n + m - 1):
            i0 = max(1, k - m + 1)
            i1 = min(n - 1, k - 1)
            cur = slice(k + i0 * step, k + i1 * step + 1, step)
            diag = dflat[k - 2 + (i0 - 1) * step : k - 2 + (i1 - 1) * step + 1 : step]
            up = dflat[k - 1 + (i0 - 1) * step : k - 1 + (i1 - 1) * step + 1 : step]
            left = dflat[k - 1 + i0 * step : k - 1 + i1 * step + 1 : step]
            lo = np.minimum(np.minimum(diag, up), left)
            s = np.exp((lo - diag) / g) + np.exp((lo - up) / g) + np.exp((lo - left) / g)
            dflat[cur] = cflat[cur] + lo - g * np.log(s)
    return d


def softdtw_forward(costs, gamma: float) -> SoftDtwResult:
    """Soft alignment cost of a finite (N, M) local-cost matrix."""
    c = as_cost_matrix(costs)
    g = _check_gamma(gamma)
    d = _forward_fill(c, g)
    d.setflags(write=False)
    return SoftDtwResult(cost=float(d[-1, -1]), accumulated=d)


def _backward_fill(c: np.ndarray, d: np.ndarray, g: float) -> np.ndarray:
    n, m = c.shape
    # Transition weights indexed by the successor cell, zero-padded one ring;
    # each weight is exp((D(succ) - C(succ) - D(pred)) / g), the softmin
    # weight of that predecessor. Clamped to [0, 1] to absorb float jitter
    # on the forced border chains at small gamma.
    wv = np.zeros((n + 1, m + 1))
    wh = np.zeros((n + 1, m + 1))
    wd = np.zeros((n + 1, m + 1))
    if n > 1:
        wv[1:n, :m] = np.clip(np.exp((d[1:, :] - c[1:, :] - d[:-1, :]) / g), 0.0, 1.0)
    if m > 1:
        wh[:n, 1:m] = np.clip(np.exp((d[:, 1:] - c[:, 1:] - d[:, :-1]) / g), 0.0, 1.0)
    if n > 1 and m > 1:
        wd[1:n, 1:m] = np.clip(np.exp((d[1:, 1:] - c[1:, 1:] - d[:-1, :-1]) / g), 0.0, 1.0)

    e = np.zeros((n + 1, m + 1))
    e[n - 1, m - 1] = 1.0
    ef, vf, hf, df = e.ravel(), wv.ravel(), wh.ravel(), wd.ravel()
    step = m  # anti-diagonal stride of the padded (n+1, m+1) layout
    for k in range(n + m - 3, -1, -1):
        i0 = max(0, k - m + 1)
        i1 = min(n - 1, k)
        cur = slice(k + i0 * step, k + i1 * step + 1, step)
        down = slice(k + m + 1 + i0 * step, k + m + 1 + i1 * step + 1, step)
        right = slice(k + 1 + i0 * step, k + 1 + i1 * step + 1, step)
        diag = slice(k + m + 2 + i0 * step, k + m + 2 + i1 * step + 1, step)
        ef[cur] = vf[down] * ef[down] + hf[right] * ef[right] + df[diag] * ef[diag]
    return np.clip(e[:n, :m], 0.0, 1.0)


def softdtw_gradient(costs, gamma: float) -> np.ndarray:
    """Gradient of the soft alignment cost with respect to each local cost.

    Returns the (N, M) occupancy matrix E with E(n, m) = d cost / d C(n, m),
    the Gibbs-expected fraction of warping paths through cell (n, m). All
    entries lie in [0, 1]; both corner entries equal 1 because every
    monotone path contains them.
    """
    c = as_cost_matrix(costs)
    g = _check_gamma(gamma)
    d = _forward_fill(c, g)
    return _backward_fill(c, d, g)


def classical_dtw(costs) -> tuple[float, list[tuple[int, int]]]:
    """Hard-minimum DTW cost and one optimal warping path.

    Uses the same border initialization as the soft recursion, so the soft
    cost converges to this value as gamma -> 0. Backtracking breaks ties by
    preferring the diagonal step, then the vertical one, then the
    horizontal one. Path indices are 0-based (n, m) pairs from (0, 0) to
    (N-1, M-1).
    """
    c = as_cost_matrix(costs)
    n, m = c.shape
    d = np.empty_like(c)
    d[0, :] = np.cumsum(c[0, :])
    d[:, 0] = np.cumsum(c[:, 0])
    for i in range(1, n):
        row = d[i]
        prev = d[i - 1]
        for j in range(1, m):
            row[j] = c[i, j] + min(prev[j - 1], prev[j], row[j - 1])
    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = min(d[i - 1, j - 1], d[i - 1, j], d[i, j - 1])
            if d[i - 1, j - 1] == best:
                i, j = i - 1, j - 1
            elif d[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return float(d[-1, -1]), path


def path_count(n: int, m: int) -> int:
    """Exact number of monotone warping paths from (0, 0) to (n-1, m-1)."""
    if n < 1 or m < 1:
        raise ValueError("path_count requires n, m >= 1")
    row = [1] * m
    for _ in range(1, n):
        new = [1] * m
        for j in range(1, m):
            new[j] = new[j - 1] + row[j] + row[j - 1]
        row = new
    return row[-1]


def _path_count_capped(n: int, m: int, cap: int) -> int:
    # Saturating variant: big matrices would otherwise build huge integers.
    row = [1] * m
    for _ in range(1, n):
        new = [1] * m
        for j in range(1, m):
            new[j] = min(cap, new[j - 1] + row[j] + row[j - 1])
        row = new
    return row[-1]


@lru_cache(maxsize=8)
def _path_cell_indices(n: int, m: int) -> np.ndarray:
    """All warping paths of an (n, m) lattice as padded flat-index rows.

    Each row lists the row-major cell indices of one path, padded with the
    out-of-range index n*m up to the maximum path length n+m-1.
    """
    pad = n * m
    paths: list[list[int]] = []
    stack = [(0, 0, [0])]
    while stack:
        i, j, cells = stack.pop()
        if i == n - 1 and j == m - 1:
            paths.append(cells)
            continue
        if i + 1 < n and j + 1 < m:
            stack.append((i + 1, j + 1, cells + [(i + 1) * m + j + 1]))
        if i + 1 < n:
            stack.append((i + 1, j, cells + [(i + 1) * m + j]))
        if j + 1 < m:
            stack.append((i, j + 1, cells + [i * m + j + 1]))
    width = n + m - 1
    out = np.full((len(paths), width), pad, dtype=np.int64)
    for r, cells in enumerate(paths):
        out[r, : len(cells)] = cells
    return out


def brute_force_softdtw(costs, gamma: float) -> tuple[float, np.ndarray]:
    """Soft alignment cost and gradient by explicit path enumeration.

    Test oracle: evaluates -gamma * log(sum over paths of exp(-cost/gamma))
    directly and accumulates the gradient as Gibbs occupancy expectations.
    Refuses lattices with more than 10^6 paths.
    """
    c = as_cost_matrix(costs)
    g = _check_gamma(gamma)
    n, m = c.shape
    if _path_count_capped(n, m, PATH_ENUMERATION_LIMIT + 1) > PATH_ENUMERATION_LIMIT:
        raise TooManyPathsError(f"more than {PATH_ENUMERATION_LIMIT} paths for shape {c.shape}")
    idx = _path_cell_indices(n, m)
    cext = np.append(c.ravel(), 0.0)
    path_costs = cext[idx].sum(axis=1)
    lo = path_costs.min()
    weights = np.exp((lo - path_costs) / g)
    total = weights.sum()
    cost = float(lo - g * np.log(total))
    occupancy = np.bincount(
        idx.ravel(), weights=np.repeat(weights / total, idx.shape[1]), minlength=n * m + 1
    )[: n * m]
    return cost, occupancy.reshape(n, m)
