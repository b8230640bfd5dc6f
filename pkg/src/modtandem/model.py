"""Model input, validation, stationary analysis and stability checking.

A model is a modulating transition matrix ``P`` together with per-regime
jump probabilities ``lam``, ``mu1`` and ``mu2``.  At every step the regime
moves first; if it stays put the walk jumps by (1,0), (-1,1) or (0,-1) with
probabilities ``lam``, ``mu1``, ``mu2`` of the current regime.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np

from .errors import ModelError, ParseError, StabilityError

ROW_SUM_TOL = 1e-10
RATE_SUM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Modulating matrix and per-regime rates.

    Only shapes are checked on construction; probabilistic requirements
    are reported by :func:`check_stability` and enforced by
    :func:`require_valid`.
    """

    P: np.ndarray
    lam: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise ModelError(f"P must be a non-empty square matrix, got shape {P.shape}")
        size = P.shape[0]
        object.__setattr__(self, "P", P)
        for name in ("lam", "mu1", "mu2"):
            vec = np.atleast_1d(np.array(getattr(self, name), dtype=float))
            if vec.shape != (size,):
                raise ModelError(f"{name} must have {size} entries, got {vec.size}")
            object.__setattr__(self, name, vec)
        for arr in (self.P, self.lam, self.mu1, self.mu2):
            if not np.all(np.isfinite(arr)):
                raise ModelError("model entries must be finite")
            arr.setflags(write=False)

    @property
    def num_regimes(self) -> int:
        return self.P.shape[0]

    @property
    def stay(self) -> np.ndarray:
        """Diagonal of P, the probability of no regime switch."""
        return np.diag(self.P).copy()

    def to_dict(self) -> dict:
        return {
            "num_regimes": self.num_regimes,
            "P": self.P.tolist(),
            "lam": self.lam.tolist(),
            "mu1": self.mu1.tolist(),
            "mu2": self.mu2.tolist(),
        }


@dataclass
class ValidationReport:
    stochastic_ok: bool
    irreducible_ok: bool
    aperiodic_ok: bool
    rates_normalized_ok: bool
    stability_margins: tuple[float, float]
    tridiagonal_strict: bool
    messages: list[str] = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return bool(all(s < 0 for s in self.stability_margins))

    @property
    def structurally_valid(self) -> bool:
        return self.stochastic_ok and self.irreducible_ok and self.aperiodic_ok and self.rates_normalized_ok

    @property
    def ok(self) -> bool:
        return self.structurally_valid and self.stable

    def to_dict(self) -> dict:
        return {
            "stochastic_ok": self.stochastic_ok,
            "irreducible_ok": self.irreducible_ok,
            "aperiodic_ok": self.aperiodic_ok,
            "rates_normalized_ok": self.rates_normalized_ok,
            "stability_margins": [float(s) for s in self.stability_margins],
            "stable": self.stable,
            "tridiagonal_strict": self.tridiagonal_strict,
            "messages": list(self.messages),
        }


def reference_model() -> ModelParams:
    """Three-regime instance used throughout the tests and README."""
    return ModelParams(
        P=[[0.6, 0.4, 0.0], [0.1, 0.4, 0.5], [0.0, 0.2, 0.8]],
        lam=[0.1, 0.12, 0.09],
        mu1=[0.4, 0.41, 0.39],
        mu2=[0.5, 0.47, 0.52],
    )


def is_stochastic(P, tol: float = ROW_SUM_TOL) -> bool:
    P = np.asarray(P, dtype=float)
    return bool(np.all(P >= 0) and np.all(np.abs(P.sum(axis=1) - 1.0) <= tol))


def _bfs_levels(adj: np.ndarray, start: int = 0) -> np.ndarray:
    levels = np.full(adj.shape[0], -1)
    levels[start] = 0
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if levels[v] < 0:
                    levels[v] = levels[u] + 1
                    nxt.append(v)
        frontier = nxt
    return levels


def is_irreducible(P) -> bool:
    adj = np.asarray(P) > 0
    return bool(np.all(_bfs_levels(adj) >= 0) and np.all(_bfs_levels(adj.T) >= 0))


def period(P) -> int:
    """Period of an irreducible chain: gcd of level[u] + 1 - level[v] over edges."""
    adj = np.asarray(P) > 0
    levels = _bfs_levels(adj)
    diffs = [int(levels[u] + 1 - levels[v]) for u, v in zip(*np.nonzero(adj))]
    return reduce(math.gcd, diffs, 0)


def is_strictly_tridiagonal(P) -> bool:
    """True when P is tridiagonal with strictly positive tridiagonal band."""
    P = np.asarray(P)
    size = P.shape[0]
    i, j = np.indices(P.shape)
    band = np.abs(i - j) <= 1
    if size == 1:
        return bool(P[0, 0] > 0)
    return bool(np.all(P[band] > 0) and np.all(P[~band] == 0))


def stationary_distribution(P) -> np.ndarray:
    """Stationary probability vector of an irreducible stochastic matrix.

    Solves ``(P^T - I) pi = 0`` with a normalisation row appended.
    """
    P = np.asarray(P, dtype=float)
    if not is_stochastic(P):
        raise ModelError("P is not stochastic: negative entry or row sum differs from 1")
    if not is_irreducible(P):
        raise ModelError("P is not irreducible")
    size = P.shape[0]
    system = np.vstack([P.T - np.eye(size), np.ones(size)])
    rhs = np.zeros(size + 1)
    rhs[-1] = 1.0
    pi, _, rank, _ = np.linalg.lstsq(system, rhs, rcond=None)
    if rank < size or not np.all(pi > 0):
        raise ModelError("stationary system is singular or has a non-positive solution")
    return pi / pi.sum()


def stability_margins(params: ModelParams, pi=None) -> tuple[float, float]:
    """The two drift sums; the model is stable when both are negative."""
    if pi is None:
        pi = stationary_distribution(params.P)
    weight = pi * params.stay
    return (
        float(np.sum((params.lam - params.mu1) * weight)),
        float(np.sum((params.lam - params.mu2) * weight)),
    )


def check_stability(params: ModelParams) -> ValidationReport:
    P = params.P
    msgs = []
    stochastic = is_stochastic(P)
    if not stochastic:
        msgs.append("P has a negative entry or a row sum differing from 1 by more than 1e-10")
    if np.any(np.diag(P) <= 0):
        stochastic = False
        msgs.append("every diagonal entry P(m,m) must be positive")
    irreducible = is_irreducible(P)
    if not irreducible:
        msgs.append("P is not irreducible")
    aperiodic = irreducible and period(P) == 1
    if irreducible and not aperiodic:
        msgs.append(f"P has period {period(P)}")
    rates = np.vstack([params.lam, params.mu1, params.mu2])
    rates_ok = bool(np.all(rates > 0) and np.all(rates < 1)
                    and np.all(np.abs(rates.sum(axis=0) - 1.0) <= RATE_SUM_TOL))
    if not rates_ok:
        msgs.append("rates must lie in (0,1) and lam + mu1 + mu2 must equal 1 in every regime")
    margins = (math.nan, math.nan)
    if stochastic and irreducible:
        margins = stability_margins(params)
        for i, s in enumerate(margins, start=1):
            if not s < 0:
                msgs.append(f"unstable: drift sum for queue {i} is {s:.6g} (must be < 0)")
    return ValidationReport(
        stochastic_ok=stochastic,
        irreducible_ok=irreducible,
        aperiodic_ok=aperiodic,
        rates_normalized_ok=rates_ok,
        stability_margins=margins,
        tridiagonal_strict=is_strictly_tridiagonal(P),
        messages=msgs,
    )


def require_valid(params: ModelParams, stable: bool = True) -> ValidationReport:
    """Raise unless the model is structurally valid (and stable if asked)."""
    rep = check_stability(params)
    if not rep.structurally_valid or (stable and not rep.stable):
        cls = StabilityError if rep.structurally_valid else ModelError
        raise cls("; ".join(rep.messages) or "invalid model")
    return rep


# model file ---------------------------------------------------------------

_KEYS = ("num_regimes", "P", "lam", "mu1", "mu2")
_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*[=:]\s*(.*?)\s*$")


def _numbers(text: str, lineno: int, key: str) -> list[float]:
    out = []
    for tok in text.replace(",", " ").split():
        try:
            out.append(float(tok))
        except ValueError:
            raise ParseError(f"{key}: cannot read {tok!r} as a number", lineno) from None
    return out


def parse_model(text: str) -> ModelParams:
    """Parse the key-value model format.

    One ``key = values`` entry per line; ``#`` starts a comment.  ``P`` is
    given as ``num_regimes`` consecutive lines ``P = row``, in row order.
    Values are separated by whitespace or commas.
    """
    size = None
    P_rows = []
    vectors = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        match = _LINE.match(line)
        if match is None:
            raise ParseError("expected 'key = values'", lineno)
        key, value = match.groups()
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key == "num_regimes":
            if size is not None:
                raise ParseError("num_regimes given twice", lineno)
            try:
                size = int(value)
            except ValueError:
                raise ParseError(f"num_regimes must be an integer, got {value!r}", lineno) from None
            if size < 1:
                raise ParseError("num_regimes must be positive", lineno)
            continue
        if size is None:
            raise ParseError("num_regimes must come before other keys", lineno)
        nums = _numbers(value, lineno, key)
        if len(nums) != size:
            what = f"P row {len(P_rows) + 1}" if key == "P" else key
            raise ParseError(f"{what} has {len(nums)} entries, expected {size}", lineno)
        if key == "P":
            if len(P_rows) == size:
                raise ParseError(f"P has more than {size} rows", lineno)
            P_rows.append(nums)
        else:
            if key in vectors:
                raise ParseError(f"{key} given twice", lineno)
            vectors[key] = nums
    end = len(text.splitlines()) + 1
    if size is None:
        raise ParseError("missing key 'num_regimes'", end)
    if len(P_rows) != size:
        raise ParseError(f"P has {len(P_rows)} rows, expected {size}", end)
    for key in ("lam", "mu1", "mu2"):
        if key not in vectors:
            raise ParseError(f"missing key {key!r}", end)
    return ModelParams(P=P_rows, **vectors)


def load_model(path) -> ModelParams:
    return parse_model(Path(path).read_text())


def format_model(params: ModelParams) -> str:
    def row(v):
        return " ".join(repr(float(x)) for x in v)

    lines = [f"num_regimes = {params.num_regimes}"]
    lines += [f"P = {row(r)}" for r in params.P]
    lines += [f"{k} = {row(getattr(params, k))}" for k in ("lam", "mu1", "mu2")]
    return "\n".join(lines) + "\n"
