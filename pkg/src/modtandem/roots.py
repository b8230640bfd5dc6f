"""Distinguished points of the characteristic surface and the root catalog.

Real roots on the lines ``alpha = 1`` and ``alpha = beta`` are found by
bracketing the sorted eigenvalue branches and refining with Brent's method.
Complex roots come from companion-matrix roots of the interpolated
determinant polynomial.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .characteristic import (
    GAP_TOL,
    boundary_defect,
    branch_values,
    char_entries,
    char_poly_in,
    eigen_sorted,
    normalize_vector,
    poly_roots,
)
from .errors import (
    InsufficientRootsError,
    NumericError,
    UnsupportedRegimeError,
)
from .model import ModelParams, require_valid

MERGE_TOL = 1e-8
EXCLUDE_TOL = 1e-8
DISK_MARGIN = 1e-9
XTOL = 1e-15

LINE_BOUNDARY = "alpha=1"
LINE_DIAGONAL = "diagonal"


@dataclass
class SurfacePoint:
    beta: complex
    alpha: complex
    d: np.ndarray
    branch: int | None = None

    def residual(self, params: ModelParams) -> float:
        A = char_entries(params, self.beta, self.alpha)
        return float(np.abs(A @ self.d - self.d).max() / np.abs(self.d).max())

    def to_dict(self, params: ModelParams | None = None) -> dict:
        out = {
            "beta": _cplx(self.beta),
            "alpha": _cplx(self.alpha),
            "d": [_cplx(v) for v in np.atleast_1d(self.d)],
            "branch": self.branch,
        }
        if params is not None:
            out["residual"] = self.residual(params)
        return out


def _cplx(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


@dataclass
class ConjugateFamily:
    """A base point and the conjugates sharing its beta.

    ``candidates`` counts the in-disk conjugates available before the
    ``|M|`` retained ones were selected.
    """

    label: str
    base: SurfacePoint
    conjugates: list[SurfacePoint]
    candidates: int

    def defect_matrix(self, params: ModelParams) -> np.ndarray:
        return np.column_stack([boundary_defect(params, p.beta, p.alpha, p.d) for p in self.conjugates])

    def to_dict(self, params: ModelParams | None = None) -> dict:
        return {
            "label": self.label,
            "base": self.base.to_dict(params),
            "conjugates": [p.to_dict(params) for p in self.conjugates],
            "candidates": self.candidates,
        }


@dataclass
class RootCatalog:
    rho1: SurfacePoint
    rho2: SurfacePoint
    alpha_star: list[SurfacePoint]
    rho2_branches: list[SurfacePoint]
    rho1_branches: list[SurfacePoint]
    rho2_family: ConjugateFamily | None
    rho2_branch_families: list[ConjugateFamily]
    circle_families: list[ConjugateFamily]
    K: int
    R: float
    flags: dict = field(default_factory=dict)

    @property
    def num_regimes(self) -> int:
        return len(self.rho1.d)

    def num_harmonic_functions(self) -> int:
        """Boundary-determined harmonic functions the catalog supports."""
        total = 1 + 1 + len(self.rho1_branches) + len(self.circle_families)
        return total

    def all_points(self) -> list[SurfacePoint]:
        pts = [self.rho1, self.rho2, *self.alpha_star, *self.rho2_branches, *self.rho1_branches]
        for fam in self.families():
            pts += [fam.base, *fam.conjugates]
        return pts

    def families(self) -> list[ConjugateFamily]:
        head = [self.rho2_family] if self.rho2_family is not None else []
        return head + self.rho2_branch_families + self.circle_families

    def to_dict(self, params: ModelParams | None = None) -> dict:
        return {
            "K": self.K,
            "R": self.R,
            "rho1": self.rho1.to_dict(params),
            "rho2": self.rho2.to_dict(params),
            "alpha_star": [p.to_dict(params) for p in self.alpha_star],
            "rho2_branches": [p.to_dict(params) for p in self.rho2_branches],
            "rho1_branches": [p.to_dict(params) for p in self.rho1_branches],
            "families": [f.to_dict(params) for f in self.families()],
            "harmonic_functions": self.num_harmonic_functions(),
            "flags": self.flags,
        }


# real roots ---------------------------------------------------------------

def _scan_grid(hi: float) -> np.ndarray:
    g = np.concatenate([
        np.geomspace(1e-10, 1e-2, 200),
        np.linspace(1e-2, 1 - 1e-3, 1000),
        1 - np.geomspace(1e-3, 1e-10, 60),
    ])
    return g[g < hi]


def _branch_on_line(params, xs, line, j, fixed_beta=None):
    if fixed_beta is not None:
        mats = np.stack([char_entries(params, fixed_beta, x) for x in xs])
    elif line == LINE_BOUNDARY:
        mats = np.stack([char_entries(params, x, 1.0) for x in xs])
    else:
        mats = np.stack([char_entries(params, x, x) for x in xs])
    return np.sort(np.linalg.eigvals(mats).real, axis=1)[:, ::-1][:, j]


def _last_downcrossing(f_vec, f_scalar, hi: float) -> float:
    """Largest root below ``hi`` where the function passes from + to -."""
    xs = _scan_grid(hi)
    vals = f_vec(xs)
    idx = np.flatnonzero((vals[:-1] > 0) & (vals[1:] < 0))
    if idx.size == 0:
        raise NumericError(f"no sign change bracketed below {hi}")
    i = idx[-1]
    return brentq(f_scalar, xs[i], xs[i + 1], xtol=XTOL, rtol=4 * np.finfo(float).eps)


def _line_point(params, line, j, hi) -> SurfacePoint:
    def f_scalar(x):
        a = 1.0 if line == LINE_BOUNDARY else x
        return branch_values(params, x, a)[j] - 1.0

    root = _last_downcrossing(lambda xs: _branch_on_line(params, xs, line, j) - 1.0, f_scalar, hi)
    alpha = 1.0 if line == LINE_BOUNDARY else root
    if j > 0:
        branch_values(params, root, alpha, strict=True)
    eig = eigen_sorted(char_entries(params, root, alpha))
    if j == 0 and eig.values.size > 1 and not np.real(eig.values[0]) - np.real(eig.values[1]) >= GAP_TOL:
        raise NumericError(f"Perron root not simple at ({root}, {alpha})")
    return SurfacePoint(root, alpha, eig.vectors[:, j], branch=j + 1)


def find_rho1(params: ModelParams) -> SurfacePoint:
    """Diagonal point where the Perron root equals 1, inside (0,1)."""
    require_valid(params)
    return _line_point(params, LINE_DIAGONAL, 0, 1.0)


def find_rho2(params: ModelParams) -> SurfacePoint:
    """Point on ``alpha = 1`` where the Perron root equals 1, inside (0,1)."""
    require_valid(params)
    return _line_point(params, LINE_BOUNDARY, 0, 1.0)


def _beta(x) -> float:
    return float(np.real(x.beta if isinstance(x, SurfacePoint) else x))


def minor_determinant_vector(G) -> np.ndarray:
    """``v(i) = det((I - G) with row and column i removed)``."""
    G = np.asarray(G)
    B = np.eye(G.shape[0]) - G
    size = G.shape[0]
    if size == 1:
        return np.ones(1)
    keep = [np.delete(np.arange(size), i) for i in range(size)]
    return np.array([np.linalg.det(B[np.ix_(k, k)]) for k in keep])


def check_conj_assumption(params: ModelParams, rho2) -> tuple[float, bool]:
    """Signed sum deciding whether the conjugate of (rho2, 1) lies below 1."""
    r2 = _beta(rho2)
    minors = minor_determinant_vector(char_entries(params, r2, 1.0))
    total = float(np.sum((r2 * params.mu2 - params.mu1) * params.stay * minors))
    return total, total < 0


def find_alpha_star1(params: ModelParams, rho2, rho1=None) -> SurfacePoint:
    r2 = _beta(rho2)
    value, ok = check_conj_assumption(params, r2)
    if not ok:
        raise UnsupportedRegimeError(
            f"conjugate of (rho2, 1) is not below 1 (signed sum {value:.6g} >= 0)")

    def f_vec(xs):
        return _branch_on_line(params, xs, None, 0, fixed_beta=r2) - 1.0

    root = _last_downcrossing(f_vec, lambda a: branch_values(params, r2, a)[0] - 1.0, 1.0 - 1e-9)
    eig = eigen_sorted(char_entries(params, r2, root))
    point = SurfacePoint(r2, root, eig.vectors[:, 0], branch=1)
    if rho1 is not None:
        r1 = _beta(rho1)
        if np.sign(r1 - r2) != np.sign(root - r2):
            raise NumericError("order relation between rho1, rho2 and alpha*_1 violated")
    return point


def find_branch_roots(params: ModelParams, line: str, top=None) -> list[SurfacePoint]:
    """Roots of ``Lambda_j = 1`` for j >= 2 on the given line, decreasing."""
    if line not in (LINE_BOUNDARY, LINE_DIAGONAL):
        raise ValueError(f"line must be {LINE_BOUNDARY!r} or {LINE_DIAGONAL!r}")
    if top is None:
        top = find_rho2(params) if line == LINE_BOUNDARY else find_rho1(params)
    out = []
    hi = _beta(top)
    for j in range(1, params.num_regimes):
        pt = _line_point(params, line, j, hi)
        if not pt.beta < hi:
            raise NumericError(f"branch {j + 1} root not below branch {j} root")
        out.append(pt)
        hi = pt.beta
    return out


# complex roots ------------------------------------------------------------

def _unit_eig_step(params, beta, alpha, wrt):
    """Newton step driving the eigenvalue nearest 1 to exactly 1."""
    A = char_entries(params, beta, alpha).astype(complex)
    w, V = np.linalg.eig(A)
    k = int(np.argmin(np.abs(w - 1)))
    wl, U = np.linalg.eig(A.conj().T)
    u = U[:, int(np.argmin(np.abs(wl.conj() - w[k])))]
    v = V[:, k]
    if wrt == "alpha":
        dA = params.stay * (params.mu1 - params.mu2 * beta / alpha**2)
    else:
        dA = params.stay * (-params.lam / beta**2 + params.mu2 / alpha)
    slope = (u.conj() * dA * v).sum() / (u.conj() @ v)
    return (w[k] - 1) / slope


def refine_root(params: ModelParams, beta, alpha, wrt: str = "alpha", iters: int = 8):
    """Polish a polynomial root so that A(beta, alpha) has eigenvalue 1."""
    z = complex(alpha if wrt == "alpha" else beta)
    for _ in range(iters):
        step = (_unit_eig_step(params, beta, z, wrt) if wrt == "alpha"
                else _unit_eig_step(params, z, alpha, wrt))
        z -= step
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(z)):
            break
    return z


def null_vector(params: ModelParams, beta, alpha) -> np.ndarray:
    A = char_entries(params, beta, alpha)
    _, _, vh = np.linalg.svd(np.eye(A.shape[0]) - A)
    return normalize_vector(vh[-1].conj())


def _merge(roots: np.ndarray, tol: float = MERGE_TOL) -> list:
    out = []
    for r in roots:
        if any(abs(r - s) <= tol for s in out):
            warnings.warn(f"repeated root near {r:.6g} merged", RuntimeWarning, stacklevel=3)
            continue
        out.append(r)
    return out


def _order(z):
    return (abs(z), np.imag(z))


def _clean(z):
    z = complex(z)
    return z.real if z.imag == 0 else z


def conjugate_alphas(params: ModelParams, beta) -> list[tuple[complex, np.ndarray]]:
    """All alpha with ``det(I - A(beta, alpha)) = 0``, with null vectors."""
    if beta == 0:
        raise ValueError("beta must be nonzero")
    coef = char_poly_in(params, beta=beta)
    roots = poly_roots(coef)
    if roots.size < 2 * params.num_regimes:
        warnings.warn(f"degree drop: {roots.size} alpha roots at beta={beta}", RuntimeWarning, stacklevel=2)
    real_beta = np.isrealobj(beta) or np.imag(beta) == 0
    roots = [refine_root(params, beta, r, "alpha") for r in roots]
    roots = [r.real if real_beta and abs(r.imag) <= 1e-12 * max(1, abs(r)) else r for r in roots]
    roots = sorted(_merge(roots), key=_order)
    return [(_clean(a), null_vector(params, beta, a)) for a in roots]


def betas_for_alpha(params: ModelParams, alpha0) -> list:
    """beta roots of the determinant polynomial inside the open unit disk."""
    roots = poly_roots(char_poly_in(params, alpha=alpha0))
    roots = [refine_root(params, r, alpha0, "beta") for r in roots]
    real_alpha = np.isrealobj(alpha0) or np.imag(alpha0) == 0
    roots = [r.real if real_alpha and abs(r.imag) <= 1e-12 else r for r in roots]
    inside = sorted((_clean(b) for b in _merge(roots) if abs(b) < 1 - DISK_MARGIN), key=_order)
    if len(inside) < params.num_regimes:
        raise InsufficientRootsError(
            f"only {len(inside)} beta roots inside the unit disk at alpha={alpha0}, "
            f"need {params.num_regimes}")
    return inside


def select_conjugates(params: ModelParams, beta, exclude, label: str) -> tuple[list[SurfacePoint], int]:
    """The |M| in-disk conjugates of (beta, exclude) with smallest modulus.

    Ties are broken by ascending imaginary part.  Raises if fewer than |M|
    are available.
    """
    size = params.num_regimes
    pool = [(a, d) for a, d in conjugate_alphas(params, beta)
            if abs(a) < 1 - DISK_MARGIN and abs(a - exclude) > EXCLUDE_TOL]
    if len(pool) < size:
        raise InsufficientRootsError(
            f"{label}: {len(pool)} in-disk conjugates at beta={beta}, need {size}")
    return [SurfacePoint(beta, a, d) for a, d in pool[:size]], len(pool)


def _family(params, beta, alpha0, label) -> ConjugateFamily:
    A = char_entries(params, beta, alpha0)
    sv = np.linalg.svd(np.eye(params.num_regimes) - A, compute_uv=False)
    if sv[-1] > 1e-8 * max(1.0, np.abs(A).max()):
        raise NumericError(f"{label}: base point is not on the surface")
    conj, count = select_conjugates(params, beta, alpha0, label)
    base = SurfacePoint(_clean(beta), _clean(alpha0), null_vector(params, beta, alpha0))
    return ConjugateFamily(label, base, conj, count)


def circle_nodes(K: int, R: float) -> np.ndarray:
    k = np.arange(1, K + 1)
    return R * np.exp(1j * k * 2 * np.pi / (K + 1))


def _span_rank(mat: np.ndarray) -> int:
    return int(np.linalg.matrix_rank(mat, tol=1e-10 * max(1.0, np.abs(mat).max())))


def build_root_catalog(params: ModelParams, K: int = 5, R: float = 0.7) -> RootCatalog:
    if K < 0:
        raise ValueError("K must be nonnegative")
    if not 0 < R < 1:
        raise ValueError("R must lie in (0,1)")
    require_valid(params)
    size = params.num_regimes
    rho1 = find_rho1(params)
    rho2 = find_rho2(params)
    conj_value, conj_ok = check_conj_assumption(params, rho2)
    flags = {
        "conj": {"value": conj_value, "ok": conj_ok},
        "rho1_ne_rho2": bool(abs(rho1.beta - rho2.beta) > 1e-9),
    }

    alpha_star = []
    rho2_family = None
    if conj_ok:
        a1 = find_alpha_star1(params, rho2, rho1)
        rho2_family = _family(params, rho2.beta, 1.0, "rho2")
        # replace the polynomial root nearest alpha*_1 by the bisection value
        k = int(np.argmin([abs(p.alpha - a1.alpha) for p in rho2_family.conjugates]))
        if abs(rho2_family.conjugates[k].alpha - a1.alpha) > 1e-6:
            raise NumericError("alpha*_1 missing from the conjugates of (rho2, 1)")
        rho2_family.conjugates[k] = a1
        rho2_family.conjugates.sort(key=lambda p: -np.real(p.alpha))
        alpha_star = list(rho2_family.conjugates)
        flags["rho2_span"] = _span_rank(rho2_family.defect_matrix(params)) == size

    rho2_branches = find_branch_roots(params, LINE_BOUNDARY, rho2)
    rho1_branches = find_branch_roots(params, LINE_DIAGONAL, rho1)
    branch_fams = [_family(params, p.beta, 1.0, f"rho2_branch_{p.branch}") for p in rho2_branches]
    flags["branch_spans"] = [_span_rank(f.defect_matrix(params)) == size for f in branch_fams]
    E = np.column_stack([rho2.d] + [p.d for p in rho2_branches])
    flags["ones_in_span"] = _span_rank(E) == size

    circle = []
    for k, a0 in enumerate(circle_nodes(K, R), start=1):
        betas = betas_for_alpha(params, a0)
        if len(betas) != size:
            raise NumericError(f"circle node {k}: {len(betas)} in-disk beta roots, need exactly {size}")
        for j, b in enumerate(betas, start=1):
            circle.append(_family(params, b, a0, f"circle_{k}_{j}"))
    flags["circle_spans"] = [_span_rank(f.defect_matrix(params)) == size for f in circle]
    flags["extra_conjugates"] = [f.label for f in [*branch_fams, *circle] if f.candidates > size]

    return RootCatalog(rho1, rho2, alpha_star, rho2_branches, rho1_branches,
                       rho2_family, branch_fams, circle, K, float(R), flags)
