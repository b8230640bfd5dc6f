"""Ground-truth oracles: Gauss-Seidel value iteration and Monte Carlo.

Grids are dense arrays indexed ``[x1, x2, m]`` for the triangle
``x1 + x2 <= n`` and ``[y1 - y2, y2, m]`` for the strip used for the limit
walk.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConvergenceError
from .model import ModelParams, require_valid

TOL = 1e-12
MAX_ITER = 100_000


@dataclass
class ProbabilityGrid:
    """Oracle values with convergence diagnostics.

    ``domain`` is ``"triangle"`` (values[x1, x2, m], size = n) or
    ``"strip"`` (values[y1 - y2, y2, m], size = truncation width N).
    """

    domain: str
    size: int
    values: np.ndarray
    iterations: int
    final_change: float
    converged: bool
    criterion: str = "relative"
    certificate: dict = field(default_factory=dict)

    def at(self, a: int, b: int, m: int) -> float:
        if self.domain == "strip":
            return float(self.values[a - b, b, m])
        return float(self.values[a, b, m])

    def cells(self):
        """Iterate (i, j, m, value) over the domain in row-major order."""
        n = self.size
        M = self.values.shape[2]
        for i in range(n + 1):
            top = n - i if self.domain == "triangle" else n
            for j in range(top + 1):
                for m in range(M):
                    yield i, j, m, float(self.values[i, j, m])


@numba.njit(cache=True)
def _sweep_triangle(v, n, P, lam, mu1, mu2, relative):
    M = P.shape[0]
    change = 0.0
    for s in range(n - 1, 0, -1):
        for x1 in range(s, -1, -1):
            x2 = s - x1
            for m in range(M):
                acc = 0.0
                selfp = 0.0
                for k in range(M):
                    if k != m:
                        acc += P[m, k] * v[x1, x2, k]
                pm = P[m, m]
                acc += pm * lam[m] * v[x1 + 1, x2, m]
                if x1 > 0:
                    acc += pm * mu1[m] * v[x1 - 1, x2 + 1, m]
                else:
                    selfp += pm * mu1[m]
                if x2 > 0:
                    acc += pm * mu2[m] * v[x1, x2 - 1, m]
                else:
                    selfp += pm * mu2[m]
                new = acc / (1.0 - selfp)
                d = abs(new - v[x1, x2, m])
                if relative and new > 0.0:
                    d /= new
                if d > change:
                    change = d
                v[x1, x2, m] = new
    return change


@numba.njit(cache=True)
def _sweep_strip(v, N, P, lam, mu1, mu2, relative):
    # v[u, y2, m] with u = y1 - y2; u = 0 is the target, u = N and y2 = N absorb at 0
    M = P.shape[0]
    change = 0.0
    for u in range(1, N):
        for y2 in range(N - 1, -1, -1):
            for m in range(M):
                acc = 0.0
                selfp = 0.0
                for k in range(M):
                    if k != m:
                        acc += P[m, k] * v[u, y2, k]
                pm = P[m, m]
                acc += pm * lam[m] * v[u - 1, y2, m]
                acc += pm * mu1[m] * v[u, y2 + 1, m]
                if y2 > 0:
                    acc += pm * mu2[m] * v[u + 1, y2 - 1, m]
                else:
                    selfp += pm * mu2[m]
                new = acc / (1.0 - selfp)
                d = abs(new - v[u, y2, m])
                if relative and new > 0.0:
                    d /= new
                if d > change:
                    change = d
                v[u, y2, m] = new
    return change


def _arrays(params: ModelParams):
    return (np.ascontiguousarray(params.P), np.ascontiguousarray(params.lam),
            np.ascontiguousarray(params.mu1), np.ascontiguousarray(params.mu2))


def _iterate(sweep, v, size, params, tol, max_iter, relative):
    P, lam, mu1, mu2 = _arrays(params)
    change = np.inf
    for it in range(1, max_iter + 1):
        change = sweep(v, size, P, lam, mu1, mu2, relative)
        if change < tol:
            return it, change, True
    return max_iter, change, False


def solve_pn(params: ModelParams, n: int, tol: float = TOL, max_iter: int = MAX_ITER,
             criterion: str = "relative") -> ProbabilityGrid:
    """``P_(x,m)(tau_n < tau_0)`` on the triangle ``x1 + x2 <= n``.

    In-place sweeps run from the exit line inward.  Iteration stops when the
    largest per-cell change, relative to the new value when ``criterion`` is
    ``"relative"``, falls below ``tol``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if criterion not in ("relative", "absolute"):
        raise ValueError("criterion must be 'relative' or 'absolute'")
    require_valid(params, stable=False)
    v = np.zeros((n + 1, n + 1, params.num_regimes))
    for x1 in range(n + 1):
        v[x1, n - x1, :] = 1.0
    it, change, ok = _iterate(_sweep_triangle, v, n, params, tol, max_iter, criterion == "relative")
    grid = ProbabilityGrid("triangle", n, v, it, float(change), ok, criterion)
    if not ok:
        raise ConvergenceError(f"no convergence after {it} sweeps (last change {change:.3g})", grid)
    return grid


def solve_tau_inf(params: ModelParams, N: int, tol: float = TOL, max_iter: int = MAX_ITER,
                  criterion: str = "relative", upper_bound=None) -> ProbabilityGrid:
    """``P_(y,m)(tau < inf)`` for the limit walk on a truncated strip.

    Cells with ``y1 = y2`` hold 1; the faces ``y1 - y2 = N`` and ``y2 = N``
    absorb with value 0, so the result underestimates.  When ``upper_bound``
    (a function of (y1, y2)) is given, its maximum on each face is stored in
    ``certificate``; the truncation error at any cell is at most the larger
    of the two.
    """
    if N < 4:
        raise ValueError("truncation width must be at least 4")
    require_valid(params)
    v = np.zeros((N + 1, N + 1, params.num_regimes))
    v[0, :, :] = 1.0
    it, change, ok = _iterate(_sweep_strip, v, N, params, tol, max_iter, criterion == "relative")
    grid = ProbabilityGrid("strip", N, v, it, float(change), ok, criterion)
    if upper_bound is not None:
        k = np.arange(N + 1)
        far = np.real(upper_bound(N + k, k))       # face y1 - y2 = N
        top = np.real(upper_bound(N + k, np.full(N + 1, N)))  # face y2 = N
        grid.certificate = {"face_gap_max": float(far.max()), "face_top_max": float(top.max())}
    if not ok:
        raise ConvergenceError(f"no convergence after {it} sweeps (last change {change:.3g})", grid)
    return grid


# Monte Carlo --------------------------------------------------------------

@dataclass
class MonteCarloEstimate:
    estimate: float
    stderr: float
    reps: int
    hits: int
    excluded: int
    seed: int


def _outcome_table(params: ModelParams) -> np.ndarray:
    """Cumulative probabilities per regime over outcomes.

    Outcomes 0..M-1 are regime switches (the diagonal slot unused), then
    lam, mu1, mu2 jumps without a switch.
    """
    M = params.num_regimes
    probs = np.zeros((M, M + 3))
    probs[:, :M] = params.P - np.diag(params.stay)
    probs[:, M] = params.stay * params.lam
    probs[:, M + 1] = params.stay * params.mu1
    probs[:, M + 2] = params.stay * params.mu2
    return np.cumsum(probs, axis=1)


def _simulate_chunk(rng, table, n, x, m, reps, step_cap):
    M = table.shape[0]
    x1 = np.full(reps, x[0], dtype=np.int64)
    x2 = np.full(reps, x[1], dtype=np.int64)
    reg = np.full(reps, m, dtype=np.int64)
    hit = np.zeros(reps, dtype=bool)
    done = (x1 + x2 >= n) | ((x1 == 0) & (x2 == 0))
    hit[done] = x1[done] + x2[done] >= n
    active = np.flatnonzero(~done)
    steps = 0
    while active.size and steps < step_cap:
        steps += 1
        u = rng.random(active.size)
        out = (u[:, None] >= table[reg[active]]).sum(axis=1)
        out = np.minimum(out, M + 2)
        a1, a2 = x1[active], x2[active]
        switch = out < M
        reg[active[switch]] = out[switch]
        up = out == M
        across = (out == M + 1) & (a1 > 0)
        down = (out == M + 2) & (a2 > 0)
        a1 = a1 + up - across
        a2 = a2 + across - down
        x1[active], x2[active] = a1, a2
        won = a1 + a2 >= n
        lost = (a1 == 0) & (a2 == 0)
        hit[active[won]] = True
        active = active[~(won | lost)]
    return int(hit.sum()), int(active.size)


def simulate_pn(params: ModelParams, n: int, start, m: int, reps: int, seed: int = 0,
                step_cap: int = 1_000_000, chunk: int = 1 << 18) -> MonteCarloEstimate:
    """Monte Carlo frequency of ``tau_n < tau_0`` from ``(start, m)``.

    Paths still running after ``step_cap`` steps are excluded from the
    estimate and reported with a warning.  Chunks use independent Philox
    streams spawned from ``seed``.
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    require_valid(params, stable=False)
    table = _outcome_table(params)
    sizes = [chunk] * (reps // chunk) + ([reps % chunk] if reps % chunk else [])
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    hits = excluded = 0
    for size, ss in zip(sizes, children):
        rng = np.random.Generator(np.random.Philox(ss))
        h, e = _simulate_chunk(rng, table, n, tuple(start), m, size, step_cap)
        hits += h
        excluded += e
    if excluded:
        warnings.warn(f"{excluded} paths hit the step cap and were excluded", RuntimeWarning, stacklevel=2)
    used = reps - excluded
    est = hits / used if used else float("nan")
    se = float(np.sqrt(est * (1 - est) / used)) if used else float("nan")
    return MonteCarloEstimate(est, se, used, hits, excluded, seed)


# comparison ---------------------------------------------------------------

@dataclass
class Comparison:
    n: int
    approx: np.ndarray      # [x1, x2, m], nan outside the triangle
    exact: np.ndarray
    abs_error: np.ndarray
    log_rel_error: np.ndarray  # nan where undefined (exact value 0 or 1)
    layer_mask: np.ndarray     # near-origin layer with margin
    alt_mask: np.ndarray       # alternative reading of the excluded region
    summary: dict


def excluded_regions(rho1: float, rho2: float, n: int, margin: float = 0.05):
    """Masks over ``[x1, x2]`` for the region where the approximation may fail.

    ``layer``: x1 <= margin n and x2 <= (1 - log rho1 / log rho2 + margin) n.
    ``alt``: scaled points with 1 - x2/n < log rho2 / log rho1, near x1 = 0.
    """
    x1, x2 = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    inside = x1 + x2 <= n
    cut = 1 - np.log(rho1) / np.log(rho2)
    layer = inside & (x1 <= margin * n) & (x2 <= (cut + margin) * n)
    alt_cut = np.log(rho2) / np.log(rho1)
    alt = inside & (x1 <= margin * n) & (1 - x2 / n < alt_cut)
    return layer, alt, float(cut), float(alt_cut)


def compare_grids(params: ModelParams, catalog, h, n: int, exact: ProbabilityGrid | None = None,
                  tol: float = TOL, layer_margin: float = 0.05) -> Comparison:
    """Approximation ``h(n - x1, x2, m)`` against the exact ``p_n(x, m)``.

    ``h`` is any callable of (y1, y2) returning values per regime.  The log
    relative error is left undefined on the exit line and at the origin,
    where the exact value is 1 or 0.
    """
    if exact is None:
        exact = solve_pn(params, n, tol)
    M = params.num_regimes
    x1, x2 = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    inside = x1 + x2 <= n
    ex = np.where(inside[..., None], exact.values, np.nan)
    ap = np.real(np.asarray(h(n - x1, x2)))
    ap = np.where(inside[..., None], ap, np.nan)
    absolute = np.abs(ap - ex)
    defined = inside[..., None] & (ex > 0) & (ex < 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lre = np.abs(np.log(ap) - np.log(ex)) / np.abs(np.log(ex))
    lre = np.where(defined, lre, np.nan)
    lre = np.where(defined & ~(ap > 0), np.inf, lre)
    r1, r2 = float(np.real(catalog.rho1.beta)), float(np.real(catalog.rho2.beta))
    layer, alt, cut, alt_cut = excluded_regions(r1, r2, n, layer_margin)
    outside = np.where(layer[..., None], np.nan, lre)
    per_m = [{
        "m": m,
        "max_log_rel_error": float(np.nanmax(lre[..., m])),
        "max_log_rel_error_outside_layer": float(np.nanmax(outside[..., m])),
        "max_abs_error": float(np.nanmax(absolute[..., m])),
    } for m in range(M)]
    summary = {
        "n": n,
        "iterations": exact.iterations,
        "final_change": exact.final_change,
        "layer_margin": layer_margin,
        "layer_x2_fraction": cut,
        "alt_region_fraction": alt_cut,
        "layer_cells": int(layer.sum()),
        "alt_cells": int(alt.sum()),
        "per_regime": per_m,
    }
    return Comparison(n, ap, ex, absolute, lre, layer, alt, summary)
