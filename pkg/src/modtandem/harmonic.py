"""Harmonic functions of the limit walk built from surface points.

The limit walk Y lives on Z x Z+ and is constrained only on the lower
boundary y2 = 0.  A basis term ``beta**(y1-y2) * alpha**y2 * d(m)`` with
``A(beta, alpha) d = d`` is harmonic off that boundary; on it the defect is
``beta**y1`` times :func:`c_vector`.  Combining conjugate terms that share
``beta`` cancels the defect.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .characteristic import COND_LIMIT, boundary_defect
from .errors import NumericError, RankError, UnsupportedRegimeError
from .model import ModelParams
from .roots import ConjugateFamily, RootCatalog, SurfacePoint

TAIL_RTOL = 1e-9
UNIT_TOL = 1e-12
C_GRID_BASE = 1e-3
C_MARGIN = 1.1


@dataclass
class BasisTerm:
    point: SurfacePoint
    weight: complex = 1.0


@dataclass
class HarmonicFn:
    """Weighted sum of basis terms.

    ``kind`` is one of ``harmonic``, ``superharmonic``, ``subharmonic``.
    With ``real=True`` evaluation returns the real part.
    """

    terms: list[BasisTerm]
    kind: str = "harmonic"
    boundary_determined: bool = False
    label: str = ""
    real: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.boundary_determined:
            for t in self.terms:
                if abs(t.point.beta) >= 1 or abs(t.point.alpha) > 1 + UNIT_TOL:
                    raise ValueError(
                        f"{self.label or 'function'}: term with |beta|={abs(t.point.beta):.6g}, "
                        f"|alpha|={abs(t.point.alpha):.6g} cannot be boundary determined")
        self._pack()

    def _pack(self):
        self._beta = np.array([complex(t.point.beta) for t in self.terms])
        self._alpha = np.array([complex(t.point.alpha) for t in self.terms])
        self._w = np.array([complex(t.weight) for t in self.terms])
        self._d = np.array([np.asarray(t.point.d, dtype=complex) for t in self.terms])
        self._is_real = bool(np.all(self._beta.imag == 0) and np.all(self._alpha.imag == 0)
                             and np.all(self._w.imag == 0) and np.all(self._d.imag == 0))

    @property
    def num_regimes(self) -> int:
        return self._d.shape[1]

    def evaluate(self, y1, y2) -> np.ndarray:
        """Values at lattice points; result shape ``broadcast(y1, y2) + (|M|,)``."""
        y1, y2 = np.broadcast_arrays(np.asarray(y1), np.asarray(y2))
        shape = y1.shape
        e1 = (y1 - y2).ravel().astype(float)
        e2 = y2.ravel().astype(float)
        if self._w.size == 0:
            out = np.zeros((e1.size, self._d.shape[1] if self._d.ndim == 2 else 0))
            return out.reshape(shape + out.shape[1:])
        scal = self._w[:, None] * self._beta[:, None] ** e1[None, :] * self._alpha[:, None] ** e2[None, :]
        out = scal.T @ self._d
        if self.real or self._is_real:
            out = out.real
        return out.reshape(shape + (self._d.shape[1],))

    def __call__(self, y1, y2):
        return self.evaluate(y1, y2)

    def real_view(self) -> HarmonicFn:
        return replace(self, real=True, label=f"Re({self.label})", meta=dict(self.meta))

    def scaled(self, factor, label=None) -> HarmonicFn:
        terms = [BasisTerm(t.point, t.weight * factor) for t in self.terms]
        return replace(self, terms=terms, label=label or self.label, meta=dict(self.meta))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "kind": self.kind,
            "boundary_determined": self.boundary_determined,
            "real_part": self.real,
            "terms": [
                {**t.point.to_dict(), "weight": {"re": complex(t.weight).real, "im": complex(t.weight).imag}}
                for t in self.terms
            ],
        }


def combine(parts, label="", kind="harmonic", boundary_determined=True) -> HarmonicFn:
    """Linear combination of ``(coefficient, HarmonicFn)`` pairs."""
    terms = [BasisTerm(t.point, t.weight * c) for c, fn in parts for t in fn.terms]
    return HarmonicFn(terms, kind=kind, boundary_determined=boundary_determined, label=label)


def eval_basis(point: SurfacePoint, y, m: int) -> complex:
    y1, y2 = y
    if y2 < 0:
        raise ValueError("y2 must be nonnegative")
    if point.beta == 0 and y1 - y2 < 0:
        raise ValueError("beta = 0 with a negative exponent")
    return complex(point.beta) ** (y1 - y2) * complex(point.alpha) ** y2 * point.d[m]


def c_vector(params: ModelParams, point: SurfacePoint) -> np.ndarray:
    if point.alpha == 0:
        raise ValueError("alpha must be nonzero")
    return boundary_defect(params, point.beta, point.alpha, point.d)


# one-step residuals -------------------------------------------------------

def residual_grid(params: ModelParams, h, y1, y2) -> np.ndarray:
    """``E[h(Y_1, M_1)] - h(y, m)`` for the limit walk, shape ``(..., |M|)``."""
    y1, y2 = np.broadcast_arrays(np.asarray(y1), np.asarray(y2))
    here = h(y1, y2)
    left = h(y1 - 1, y2)
    diag = h(y1 + 1, y2 + 1)
    down = np.where((y2 > 0)[..., None], h(y1, np.maximum(y2 - 1, 0)), here)
    off = params.P - np.diag(params.stay)
    stay = params.stay
    expect = here @ off.T + stay * (params.lam * left + params.mu1 * diag + params.mu2 * down)
    return expect - here


def one_step_residual(params: ModelParams, h, y, m: int):
    return residual_grid(params, h, np.array(y[0]), np.array(y[1]))[m]


def x_residual_grid(params: ModelParams, f, x1, x2) -> np.ndarray:
    """One-step residual for the constrained walk X on the quadrant."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1), np.asarray(x2))
    here = f(x1, x2)
    up = f(x1 + 1, x2)
    across = np.where((x1 > 0)[..., None], f(np.maximum(x1 - 1, 0), x2 + 1), here)
    down = np.where((x2 > 0)[..., None], f(x1, np.maximum(x2 - 1, 0)), here)
    off = params.P - np.diag(params.stay)
    expect = here @ off.T + params.stay * (params.lam * up + params.mu1 * across + params.mu2 * down)
    return expect - here


# boundary scans -----------------------------------------------------------

@dataclass
class BoundaryScan:
    values: np.ndarray  # (k_end, |M|) values on the diagonal y = (k, k)
    limit: np.ndarray   # value as k -> infinity
    tail: float         # bound on |h(k,k,m) - limit(m)| for k >= k_end
    k_end: int


def _split_terms(h: HarmonicFn):
    const = np.abs(h._alpha - 1) <= UNIT_TOL
    if np.any(np.abs(h._alpha[~const]) >= 1):
        raise NumericError("boundary bound unavailable: non-constant term with |alpha| >= 1")
    limit = (h._w[const, None] * h._d[const]).sum(axis=0) if np.any(const) else np.zeros(h._d.shape[1], complex)
    amp = np.abs(h._w[~const]) * np.abs(h._d[~const]).max(axis=1) if np.any(~const) else np.zeros(0)
    return limit, np.abs(h._alpha[~const]), amp


def scan_boundary(h: HarmonicFn, tail_rtol: float = TAIL_RTOL, k_min: int = 0,
                  k_cap: int = 200_000, reference: float | None = None) -> BoundaryScan:
    """Evaluate h on the diagonal until the geometric tail is negligible.

    The scan stops at the first ``k_end >= k_min`` where the tail bound
    ``sum |w| |alpha|**k max|d|`` drops below ``tail_rtol`` times
    ``reference`` (default: the largest deviation from the limit seen).
    """
    limit, mods, amp = _split_terms(h)
    if h.real:
        limit = limit.real
    chunk = 64
    vals = []
    k = 0
    while True:
        ks = np.arange(k, k + chunk)
        vals.append(h(ks, ks))
        k += chunk
        tail = float(np.sum(amp * mods**k)) if amp.size else 0.0
        seen = np.concatenate(vals)
        ref = reference if reference is not None else float(np.abs(seen - limit).max())
        if k >= k_min and (tail == 0.0 or tail < tail_rtol * ref):
            break
        if k >= k_cap:
            raise NumericError(f"boundary tail did not decay below tolerance by k={k_cap}")
    return BoundaryScan(np.concatenate(vals), limit, tail, k)


def c_star(h: HarmonicFn, tail_rtol: float = TAIL_RTOL) -> float:
    """``max |h(k,k,m) - 1|`` over the diagonal boundary and all regimes."""
    scan = scan_boundary(h, tail_rtol, reference=None)
    dev = np.abs(scan.values - 1.0).max()
    dev = max(dev, float(np.abs(scan.limit - 1.0).max()))
    return float(dev)


def c_star_details(h: HarmonicFn, tail_rtol: float = TAIL_RTOL) -> dict:
    scan = scan_boundary(h, tail_rtol)
    dev = np.abs(scan.values - 1.0)
    k, m = np.unravel_index(int(np.argmax(dev)), dev.shape)
    return {"c_star": c_star(h, tail_rtol), "argmax_k": int(k), "argmax_m": int(m),
            "k_end": scan.k_end, "tail_bound": scan.tail}


def boundary_min(h: HarmonicFn, tail_rtol: float = TAIL_RTOL) -> tuple[float, int]:
    """Certified lower bound of h on the diagonal, and the scan length."""
    h = h if h.real or h._is_real else h.real_view()
    scan = scan_boundary(h, tail_rtol, reference=float(np.abs(h(0, 0)).max()) or 1.0)
    return float(min(scan.values.min(), np.min(np.real(scan.limit)) - scan.tail)), scan.k_end


def boundary_max(h: HarmonicFn, tail_rtol: float = TAIL_RTOL) -> tuple[float, int]:
    """Certified upper bound of h on the diagonal, and the scan length."""
    h = h if h.real or h._is_real else h.real_view()
    scan = scan_boundary(h, tail_rtol, reference=float(np.abs(h(0, 0)).max()) or 1.0)
    return float(max(scan.values.max(), np.max(np.real(scan.limit)) + scan.tail)), scan.k_end


# constructions ------------------------------------------------------------

def single_term(point: SurfacePoint, label: str, kind="harmonic", boundary_determined=True) -> HarmonicFn:
    return HarmonicFn([BasisTerm(point, 1.0)], kind=kind, boundary_determined=boundary_determined, label=label)


def h_rho1(catalog: RootCatalog) -> HarmonicFn:
    """Diagonal term; harmonic on all of Z x Z+ since its defect vanishes."""
    return single_term(catalog.rho1, "h_rho1")


def h_rho1_branches(catalog: RootCatalog) -> list[HarmonicFn]:
    return [single_term(p, f"h_rho1_{p.branch}") for p in catalog.rho1_branches]


def family_function(params: ModelParams, family: ConjugateFamily, label: str | None = None) -> HarmonicFn:
    """Base term with weight 1 plus conjugates weighted to cancel the defect."""
    C = family.defect_matrix(params)
    size = C.shape[0]
    rank = int(np.linalg.matrix_rank(C, tol=1e-10 * max(1.0, np.abs(C).max())))
    if rank < size:
        raise RankError(f"{family.label}: defect vectors span rank {rank} < {size}", rank, size)
    cond = np.linalg.cond(C)
    if cond > COND_LIMIT:
        warnings.warn(f"{family.label}: defect system condition number {cond:.3g}", RuntimeWarning, stacklevel=2)
    rhs = -boundary_defect(params, family.base.beta, family.base.alpha, family.base.d)
    weights = np.linalg.solve(C, rhs)
    terms = [BasisTerm(family.base, 1.0)] + [BasisTerm(p, w) for p, w in zip(family.conjugates, weights)]
    return HarmonicFn(terms, kind="harmonic", boundary_determined=True, label=label or family.label,
                      meta={"condition": float(cond)})


def _require_rho2_family(catalog: RootCatalog) -> ConjugateFamily:
    if catalog.rho2_family is None:
        raise UnsupportedRegimeError("conjugate of (rho2, 1) lies outside the unit interval; "
                                     "bounded boundary constructions are unavailable")
    return catalog.rho2_family


def build_h_rho2_super(params: ModelParams, catalog: RootCatalog) -> tuple[HarmonicFn, float]:
    """Superharmonic ``[(rho2,1,d2)] + c0 [(rho2,alpha*_1,d21)]``."""
    _require_rho2_family(catalog)
    if not catalog.flags.get("rho1_ne_rho2", False):
        raise UnsupportedRegimeError("rho1 equals rho2; superharmonic construction unavailable")
    base, star = catalog.rho2, catalog.alpha_star[0]
    c_base = np.real(boundary_defect(params, base.beta, base.alpha, base.d))
    c_star_vec = np.real(boundary_defect(params, star.beta, star.alpha, star.d))
    d_max = float(c_base.max())
    if star.alpha < base.beta:
        c0 = -C_MARGIN * d_max / float(c_star_vec.max())
    else:
        c0 = -C_MARGIN * d_max / float(c_star_vec.min())
    if not np.all(c_base + c0 * c_star_vec <= 0):
        raise NumericError("superharmonic weight failed to make the boundary defect nonpositive")
    fn = HarmonicFn([BasisTerm(base, 1.0), BasisTerm(star, c0)], kind="superharmonic",
                    boundary_determined=True, label="h_rho2", meta={"c0": c0})
    return fn, c0


@dataclass
class BoundCertificate:
    c0: float = math.nan
    c1: float = math.nan
    c2: float = math.nan
    c9: float = math.nan
    c10: float = math.nan
    c11: float = math.nan
    c_star: float = math.nan
    tail_cutoff: int = 0

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in self.__dict__.items()}


def _lift(base_vals: np.ndarray, lift_vals: np.ndarray, floor: float) -> float:
    """Smallest c on the grid {0, base * 2**i} with base + c * lift > floor."""
    for c in [0.0] + [C_GRID_BASE * 2.0**i for i in range(200)]:
        if np.all(base_vals + c * lift_vals > floor):
            return c
    raise NumericError("no lifting constant found on the search grid")


def _tail_start(amp: np.ndarray, mods: np.ndarray, bound: float) -> int:
    """First k0 with ``sum amp * mods**k <= bound`` for all k >= k0."""
    k = 0
    while np.sum(amp * mods**k) > bound:
        k += 1
        if k > 1_000_000:
            raise NumericError("tail cutoff search did not terminate")
    return k


def build_bound_certificate(params: ModelParams, catalog: RootCatalog, tail_rtol: float = TAIL_RTOL):
    """Constants c0, c1, c2 and the upper bound for ``P(tau < inf)``.

    Returns ``(certificate, (h_rho2 + c1 h_rho1) / c2)``.
    """
    sup, c0 = build_h_rho2_super(params, catalog)
    rho1_fn = h_rho1(catalog)
    d2 = np.real(catalog.rho2.d)
    floor = d2.min() / 2
    star = catalog.alpha_star[0]
    if star.alpha < catalog.rho2.beta:
        c1, k0 = 0.0, 0
    else:
        k0 = _tail_start(np.array([abs(c0) * np.abs(star.d).max()]), np.array([abs(star.alpha)]), floor)
        ks = np.arange(k0 + 1)
        c1 = _lift(np.real(sup(ks, ks)), np.real(rho1_fn(ks, ks)), floor)
    lifted = combine([(1.0, sup), (c1, rho1_fn)], label="h_rho2 + c1 h_rho1", kind="superharmonic")
    c2, k_end = boundary_min(lifted, tail_rtol)
    if not c2 > 0:
        raise NumericError(f"boundary minimum c2 = {c2:.6g} is not positive")
    upper = lifted.scaled(1.0 / c2, label="tau upper bound")
    cert = BoundCertificate(c0=c0, c1=c1, c2=c2, tail_cutoff=max(k0, k_end))
    return cert, upper


def build_frak_h_rho2(params: ModelParams, catalog: RootCatalog) -> HarmonicFn:
    return family_function(params, _require_rho2_family(catalog), "frak_h_rho2")


def build_h_a0(params: ModelParams, catalog: RootCatalog, tail_rtol: float = TAIL_RTOL):
    """``c11 (frak_h_rho2 + c10 h_rho1)``: at least 1 on the diagonal boundary."""
    frak = build_frak_h_rho2(params, catalog)
    rho1_fn = h_rho1(catalog)
    d2 = np.real(catalog.rho2.d)
    floor = d2.min() / 2
    _, mods, amp = _split_terms(frak)
    k0 = _tail_start(amp, mods, floor)
    ks = np.arange(k0 + 1)
    c10 = _lift(np.real(frak(ks, ks)), np.real(rho1_fn(ks, ks)), floor)
    c11 = 1.0 / floor
    fn = combine([(c11, frak), (c11 * c10, rho1_fn)], label="h_a0")
    fn = fn.real_view() if not fn._is_real else fn
    c9, k_end = boundary_max(fn, tail_rtol)
    cert = BoundCertificate(c9=c9, c10=c10, c11=c11, c_star=c_star(fn, tail_rtol), tail_cutoff=max(k0, k_end))
    fn.meta.update(cert.to_dict())
    return fn, cert


def build_frak_h(params: ModelParams, catalog: RootCatalog) -> HarmonicFn:
    """Combination of the alpha = 1 families tending to 1 along the diagonal."""
    fns = [build_frak_h_rho2(params, catalog)]
    fns += [family_function(params, fam, f"frak_h_rho2_{p.branch}")
            for fam, p in zip(catalog.rho2_branch_families, catalog.rho2_branches)]
    E = np.column_stack([catalog.rho2.d] + [p.d for p in catalog.rho2_branches])
    size = E.shape[0]
    rank = int(np.linalg.matrix_rank(E))
    if rank < size:
        raise RankError(f"all-ones vector outside the span of the alpha = 1 eigenvectors (rank {rank})", rank, size)
    b = np.linalg.solve(E, np.ones(size))
    out = combine(list(zip(b, fns)), label="frak_h")
    out.meta["branch_weights"] = [float(np.real(x)) for x in b]
    return out


def fit_basis(catalog: RootCatalog, params: ModelParams) -> list[HarmonicFn]:
    """The (K+1)|M| functions whose weights are fitted on the diagonal."""
    fns = [h_rho1(catalog), *h_rho1_branches(catalog)]
    fns += [family_function(params, fam) for fam in catalog.circle_families]
    return fns


def assemble_haK(params: ModelParams, catalog: RootCatalog, frak: HarmonicFn | None = None):
    """Fit ``frak_h + sum phi_i f_i`` to 1 at ``y = (k, k)``, k = 0..K.

    Returns ``(complex function, real-part view)``.  Fit diagnostics are in
    ``meta`` of both.
    """
    if frak is None:
        frak = build_frak_h(params, catalog)
    basis = fit_basis(catalog, params)
    size = params.num_regimes
    nodes = np.arange(catalog.K + 1)
    rows = (catalog.K + 1) * size
    if len(basis) != rows:
        raise NumericError(f"boundary system is {rows} x {len(basis)}, not square")
    A = np.column_stack([fn(nodes, nodes).reshape(-1) for fn in basis])
    rhs = 1.0 - frak(nodes, nodes).reshape(-1)
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > 1e14:
        raise NumericError(f"boundary system singular (condition {cond:.3g})")
    if cond > COND_LIMIT:
        warnings.warn(f"boundary system condition number {cond:.3g}", RuntimeWarning, stacklevel=2)
    phi = np.linalg.solve(A.astype(complex), rhs.astype(complex))
    h = combine([(1.0, frak)] + list(zip(phi, basis)), label="h_aK_complex")
    fit_res = float(np.abs(h(nodes, nodes) - 1.0).max())
    h.meta.update({"K": catalog.K, "R": catalog.R, "condition": cond, "system_size": rows,
                   "coefficients": [[float(np.real(c)), float(np.imag(c))] for c in phi],
                   "labels": [fn.label for fn in basis], "fit_residual": fit_res})
    real = h.real_view()
    real.label = "h_aK"
    return h, real


# lower bound --------------------------------------------------------------

def lower_bound_max_function(catalog: RootCatalog, n: int):
    """``rho2**(n-x1-x2) d2(m)  max  rho1**(n-x1) d1(m)`` on the quadrant."""
    r1, r2 = float(np.real(catalog.rho1.beta)), float(np.real(catalog.rho2.beta))
    d1, d2 = np.real(catalog.rho1.d), np.real(catalog.rho2.d)

    def g(x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        a = r2 ** (n - x1 - x2)[..., None] * d2
        b = r1 ** (n - x1)[..., None] * d1
        return np.maximum(a, b)

    return g


def eval_lower_bound_pn(params: ModelParams, catalog: RootCatalog, n: int, x, m: int) -> float:
    """Explicit lower bound on ``P_(x,m)(tau_n < tau_0)`` from the max function."""
    x1, x2 = x
    if x1 < 0 or x2 < 0 or x1 + x2 > n:
        raise ValueError("x must lie in the triangle x1 + x2 <= n")
    r1, r2 = float(np.real(catalog.rho1.beta)), float(np.real(catalog.rho2.beta))
    d1, d2 = np.real(catalog.rho1.d), np.real(catalog.rho2.d)
    g = lower_bound_max_function(catalog, n)
    top = float(np.max(np.maximum(d1, d2)))
    origin = max(r2**n * d2.max(), r1**n * d1.max())
    return float((g(x1, x2)[m] - origin) / top)
