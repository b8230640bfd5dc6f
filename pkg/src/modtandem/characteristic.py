"""Characteristic matrices, their spectra and the determinant polynomial.

For a point (beta, alpha) the characteristic matrix keeps the off-diagonal
entries of P and puts ``P(m,m) * p(beta, alpha, m)`` on the diagonal, where
``p`` is the one-step generating function of the jump law.  Points with a
unit eigenvalue give exponential harmonic functions of the limit walk.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NumericError, UnsupportedRegimeError
from .model import ModelParams, is_strictly_tridiagonal

GAP_TOL = 1e-8
COND_LIMIT = 1e10


class BoundaryKind(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY1 = "boundary1"
    BOUNDARY2 = "boundary2"


def local_poly(params: ModelParams, beta, alpha, kind=BoundaryKind.INTERIOR):
    """Per-regime jump generating function for the given boundary kind."""
    if beta == 0:
        raise ValueError("beta must be nonzero")
    lam, mu1, mu2 = params.lam, params.mu1, params.mu2
    if kind is BoundaryKind.BOUNDARY2 or (kind is BoundaryKind.INTERIOR and alpha == beta):
        # on the diagonal beta/alpha is exactly 1; skip the rounding of (mu2*beta)/alpha
        return lam / beta + mu1 * alpha + mu2
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    if kind is BoundaryKind.BOUNDARY1:
        return lam / beta + mu1 + mu2 * beta / alpha
    return lam / beta + mu1 * alpha + mu2 * beta / alpha


def boundary_defect(params: ModelParams, beta, alpha, d) -> np.ndarray:
    """Per-regime defect ``P(m,m) mu2(m) d(m) (1 - beta/alpha)``.

    A single exponential term fails harmonicity on the lower boundary by
    ``beta**y1`` times this vector.
    """
    return params.stay * params.mu2 * np.asarray(d) * (1 - beta / alpha)


@dataclass(frozen=True)
class CharMatrix:
    kind: BoundaryKind
    beta: complex
    alpha: complex
    entries: np.ndarray


@dataclass
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray  # columns
    sorted_real: bool

    @property
    def perron(self):
        return self.values[0], self.vectors[:, 0]


def char_entries(params: ModelParams, beta, alpha, kind=BoundaryKind.INTERIOR) -> np.ndarray:
    p = local_poly(params, beta, alpha, kind)
    dtype = complex if np.iscomplexobj(p) else float
    A = params.P.astype(dtype)
    A[np.diag_indices_from(A)] = params.stay * p
    return A


def build_char_matrix(params: ModelParams, beta, alpha, kind=BoundaryKind.INTERIOR) -> CharMatrix:
    return CharMatrix(kind, beta, alpha, char_entries(params, beta, alpha, kind))


def normalize_vector(v: np.ndarray) -> np.ndarray:
    """Scale so the largest-magnitude entry equals 1; real input stays real."""
    v = np.asarray(v)
    k = int(np.argmax(np.abs(v)))
    out = v / v[k]
    if np.iscomplexobj(out) and np.all(np.abs(out.imag) <= 1e-13 * np.abs(out).max()):
        out = out.real.copy()
    return out


def eigen_sorted(mat) -> EigenSystem:
    """Eigenpairs in descending order of real part.

    Real spectra are returned as real arrays with each eigenvector scaled so
    its largest-magnitude component is +1; the Perron vector of a positive
    matrix is then strictly positive.
    """
    A = mat.entries if isinstance(mat, CharMatrix) else np.asarray(mat)
    if not np.all(np.isfinite(A)):
        raise NumericError("characteristic matrix has non-finite entries")
    try:
        w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    scale = max(1.0, float(np.abs(w).max()))
    is_real = not np.iscomplexobj(A) or np.all(np.abs(A.imag) == 0)
    real_spec = bool(np.all(np.abs(np.imag(w)) <= 1e-12 * scale))
    if is_real and real_spec:
        w = np.real(w)
        V = np.real(V)
    order = np.lexsort((-np.imag(w), -np.real(w)))
    w, V = w[order], V[:, order]
    V = np.column_stack([normalize_vector(V[:, i]) for i in range(V.shape[1])])
    return EigenSystem(w, V, bool(is_real and real_spec))


def branch_values(params: ModelParams, beta, alpha, kind=BoundaryKind.INTERIOR, strict=False) -> np.ndarray:
    """Sorted real eigenvalues at a real point; the branch functions Lambda_j."""
    w = np.linalg.eigvals(char_entries(params, beta, alpha, kind))
    if strict:
        if np.any(np.abs(w.imag) > 1e-12 * max(1.0, np.abs(w).max())):
            raise UnsupportedRegimeError(f"complex eigenvalues at real point ({beta}, {alpha})")
    w = np.sort(w.real)[::-1]
    if strict and w.size > 1 and np.min(-np.diff(w)) < GAP_TOL:
        raise NumericError(f"eigenvalue branches touch at ({beta}, {alpha}): gap {np.min(-np.diff(w)):.3g}")
    return w


def perron_root(params: ModelParams, beta, alpha, kind=BoundaryKind.INTERIOR) -> float:
    return float(branch_values(params, beta, alpha, kind)[0])


def det_i_minus_a(params: ModelParams, beta, alpha, kind=BoundaryKind.INTERIOR):
    A = char_entries(params, beta, alpha, kind)
    return np.linalg.det(np.eye(A.shape[0]) - A)


def char_poly_in(params: ModelParams, *, beta=None, alpha=None, kind=BoundaryKind.INTERIOR) -> np.ndarray:
    """Coefficients, ascending, of the determinant polynomial in the free variable.

    Exactly one of ``beta`` and ``alpha`` is fixed.  The free variable z
    enters ``det(I - A)`` through ``z`` and ``1/z`` on the diagonal only, so
    ``z**|M| det(I - A)`` is a polynomial of degree ``2|M|``.  It is
    recovered from ``2|M| + 1`` samples on the unit circle.
    """
    if (beta is None) == (alpha is None):
        raise ValueError("fix exactly one of beta, alpha")
    fixed = beta if beta is not None else alpha
    if fixed == 0:
        raise ValueError("fixed variable must be nonzero")
    size = params.num_regimes
    deg = 2 * size
    z = np.exp(2j * np.pi * np.arange(deg + 1) / (deg + 1))
    if beta is not None:
        vals = [det_i_minus_a(params, beta, zz, kind) * zz**size for zz in z]
    else:
        vals = [det_i_minus_a(params, zz, alpha, kind) * zz**size for zz in z]
    V = np.vander(z, deg + 1, increasing=True)
    cond = np.linalg.cond(V)
    if cond > COND_LIMIT:
        raise NumericError(f"interpolation system ill-conditioned (cond {cond:.3g})")
    coef = np.linalg.solve(V, np.asarray(vals))
    if np.isrealobj(fixed) or np.imag(fixed) == 0:
        coef = coef.real
    return coef


def poly_roots(coef: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Roots via the companion matrix, trimming vanishing leading terms."""
    coef = np.asarray(coef)
    scale = np.abs(coef).max()
    top = len(coef) - 1
    while top > 0 and abs(coef[top]) <= rtol * scale:
        top -= 1
    return np.roots(coef[: top + 1][::-1])


def hamiltonian(params: ModelParams, q) -> float:
    """Minus the log Perron root at ``(exp(q1), exp(q2))``.

    The Perron root of a matrix with log-convex entries is log-convex, so
    this function is concave in q.
    """
    q = np.asarray(q, dtype=float)
    return -float(np.log(perron_root(params, np.exp(q[0]), np.exp(q[1]))))


@dataclass
class SimplicityReport:
    min_gap: float
    complex_points: list
    tridiagonal_strict: bool
    points_checked: int

    @property
    def simple(self) -> bool:
        return not self.complex_points and self.min_gap >= GAP_TOL


def check_simple_real_eigenvalues(params: ModelParams, grid) -> SimplicityReport:
    """Scan positive points for complex or nearly repeated eigenvalues."""
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    if np.any(grid <= 0):
        raise ValueError("grid points must be strictly positive")
    min_gap = np.inf
    bad = []
    for beta, alpha in grid:
        w = np.linalg.eigvals(char_entries(params, beta, alpha))
        if np.any(np.abs(w.imag) > 1e-12 * max(1.0, np.abs(w).max())):
            bad.append((float(beta), float(alpha)))
            continue
        if w.size > 1:
            min_gap = min(min_gap, float(np.min(-np.diff(np.sort(w.real)[::-1]))))
    return SimplicityReport(float(min_gap), bad, is_strictly_tridiagonal(params.P), len(grid))


def default_grid(size: int = 25) -> np.ndarray:
    g = np.geomspace(0.02, 2.0, size)
    return np.array([(b, a) for b in g for a in g])


def trace_level_curves(params: ModelParams, branch: int = 1, resolution: int = 200,
                       alpha_range=(1e-3, 4.0), beta_range=(1e-4, 1e2), beta_samples=400):
    """Samples of the curve ``Lambda_branch(beta, alpha) = 1``.

    For each alpha on a geometric sweep the beta solutions are bracketed on a
    geometric grid and refined with Brent's method.  Returns records
    ``(branch, alpha, beta)`` ordered by alpha then beta; alphas without a
    bracket contribute nothing.
    """
    size = params.num_regimes
    if not 1 <= branch <= size:
        raise ValueError(f"branch must be in 1..{size}")
    j = branch - 1
    betas = np.geomspace(*beta_range, beta_samples)
    out = []
    for alpha in np.geomspace(*alpha_range, resolution):
        stack = np.stack([char_entries(params, b, alpha) for b in betas])
        vals = np.sort(np.linalg.eigvals(stack).real, axis=1)[:, ::-1][:, j] - 1.0
        for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
            root = brentq(lambda b: branch_values(params, b, alpha)[j] - 1.0,
                          betas[i], betas[i + 1], xtol=1e-14)
            out.append((branch, float(alpha), float(root)))
    return out
