"""Special functions and Mellin-Barnes contour quadrature.

Everything here works in the ``x**(-s)`` Mellin-Barnes convention::

    G^{m,n}_{p,q}[x | a; b] = 1/(2 pi i) * int  prod_{j<=m} Gamma(b_j + s) prod_{j<=n} Gamma(1 - a_j - s)
                                           / (prod_{j>m} Gamma(1 - b_j - s) prod_{j>n} Gamma(a_j + s)) x**(-s) ds

A vertical line ``Re(s) = c`` is used whenever one separates the two pole
families. Otherwise the line integral is corrected by the residues of the
poles that sit on the wrong side of it.

Gamma products are always accumulated as sums of complex log-gammas and
exponentiated once per quadrature node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

__all__ = [
    "SpecfunError",
    "PoleError",
    "ContourError",
    "ConvergenceError",
    "GammaTermList",
    "ContourSpec",
    "BivariateFoxHSpec",
    "MellinResult",
    "ln_gamma",
    "bessel_k",
    "bessel_i0",
    "erf",
    "separate_poles",
    "meijer_g",
    "meijer_g_kernel",
    "mellin_barnes_1d",
    "strip_shift",
    "mellin_barnes_2d",
    "plan_contour_2d",
    "fox_h_bivariate",
]


class SpecfunError(ArithmeticError):
    pass


class PoleError(SpecfunError):
    """Argument sits on a pole of the gamma function."""


class ContourError(SpecfunError):
    """No admissible integration line could be planned."""


class ConvergenceError(SpecfunError):
    """Quadrature error estimate stayed above tolerance at maximum refinement."""


# ---------------------------------------------------------------------------
# scalar special functions


def ln_gamma(z):
    """Principal branch of log Gamma(z) for real or complex ``z`` (scalar or array)."""
    z = np.asarray(z)
    zr = np.real(z)
    bad = (np.imag(z) == 0) & (zr <= 0) & (zr == np.round(zr))
    if np.any(bad):
        raise PoleError(f"Gamma has a pole at {z[bad].ravel()[0]!r}")
    out = special.loggamma(z.astype(complex))
    return out[()] if out.ndim == 0 else out


def bessel_k(nu, x):
    """Modified Bessel function of the second kind, K_nu(x), x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("bessel_k needs x > 0")
    out = special.kv(nu, x)
    return out[()] if np.ndim(out) == 0 else out


def bessel_i0(x):
    out = special.i0(np.asarray(x, dtype=float))
    return out[()] if np.ndim(out) == 0 else out


def erf(x):
    out = special.erf(np.asarray(x, dtype=float))
    return out[()] if np.ndim(out) == 0 else out


def separate_poles(values: Sequence[float], tol: float = 1e-9, eps: float = 1e-6):
    """Nudge parameters whose pairwise differences are (nearly) integers.

    Returns the adjusted tuple and a list of ``(index, old, new)`` records.
    Later entries are the ones moved, so the first occurrence keeps its value.
    """
    vals = [float(v) for v in values]
    moved = []
    for j in range(1, len(vals)):
        for _ in range(8):
            clash = any(
                abs((vals[j] - vals[i]) - round(vals[j] - vals[i])) < tol for i in range(j)
            )
            if not clash:
                break
            old = vals[j]
            vals[j] = old + eps
            moved.append((j, old, vals[j]))
    return tuple(vals), moved


# ---------------------------------------------------------------------------
# kernel descriptions


def _canon(terms) -> tuple:
    out = []
    for term in terms:
        term = tuple(float(v) for v in term)
        if len(term) not in (2, 3):
            raise ValueError(f"gamma term must be (offset, scale[, scale_t]), got {term}")
        out.append(term)
    return tuple(sorted(out))


@dataclass(frozen=True)
class GammaTermList:
    """Product of gamma functions ``Gamma(offset + scale*s [+ scale_t*t])``.

    ``numerator`` and ``denominator`` hold ``(offset, scale)`` pairs for a
    single contour variable, or ``(offset, scale_s, scale_t)`` triples for
    terms that couple both variables. Repeated entries stand for powers.
    Entries are stored sorted, so two lists that differ only by ordering
    compare equal.
    """

    numerator: tuple = ()
    denominator: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "numerator", _canon(self.numerator))
        object.__setattr__(self, "denominator", _canon(self.denominator))

    def __add__(self, other: "GammaTermList") -> "GammaTermList":
        return GammaTermList(self.numerator + other.numerator, self.denominator + other.denominator)

    def _args(self, terms, s, t):
        for term in terms:
            if len(term) == 2:
                yield term[0] + term[1] * s
            else:
                yield term[0] + term[1] * s + term[2] * t

    def log_value(self, s, t=0.0):
        """Complex log of the product, evaluated elementwise."""
        s = np.asarray(s, dtype=complex)
        t = np.asarray(t, dtype=complex)
        acc = np.zeros(np.broadcast(s, t).shape, dtype=complex)
        # collapse repeated terms into one loggamma call times multiplicity
        for terms, sign in ((self.numerator, 1.0), (self.denominator, -1.0)):
            counts: dict = {}
            for term in terms:
                counts[term] = counts.get(term, 0) + 1
            for term, mult in counts.items():
                (arg,) = self._args([term], s, t)
                acc = acc + sign * mult * special.loggamma(arg)
        return acc

    def constraints(self):
        """Linear forms ``(offset, scale_s, scale_t)`` that must stay positive on the contour."""
        out = []
        for term in self.numerator:
            if len(term) == 2:
                out.append((term[0], term[1], 0.0))
            else:
                out.append(term)
        return out

    def to_dict(self) -> dict:
        return {"numerator": [list(t) for t in self.numerator],
                "denominator": [list(t) for t in self.denominator]}

    @classmethod
    def from_dict(cls, data: dict) -> "GammaTermList":
        return cls(tuple(map(tuple, data.get("numerator", ()))),
                   tuple(map(tuple, data.get("denominator", ()))))


def _only_t(terms: GammaTermList) -> GammaTermList:
    """Re-express (offset, scale) pairs as coefficients on the second variable."""
    return GammaTermList(
        tuple((o, 0.0, c) for o, c in terms.numerator),
        tuple((o, 0.0, c) for o, c in terms.denominator),
    )


@dataclass(frozen=True)
class ContourSpec:
    """Vertical line ``Re(s) = shift`` truncated to ``|Im(s)| <= half_extent``.

    ``nodes`` counts quadrature nodes on the half line ``0 <= Im(s) <= T``
    (or the full line for the second variable of a double integral).
    """

    shift: float
    half_extent: float
    nodes: int
    rule: str = "gauss-legendre"

    def __post_init__(self):
        if self.nodes < 2 or not self.half_extent > 0:
            raise ValueError("ContourSpec needs nodes >= 2 and half_extent > 0")


@dataclass(frozen=True)
class BivariateFoxHSpec:
    """Kernel of a double Mellin-Barnes integral.

    The integrand is::

        joint(s, t) * x_terms(s) * y_terms(t) * sum_k w_k x_series_k(s) * arg_x**(-s) * arg_y**(-t)

    ``x_series`` is an optional weighted family of extra s-factors (used for
    the truncated GML series); when empty the series factor is 1.
    """

    joint_terms: GammaTermList
    x_terms: GammaTermList
    y_terms: GammaTermList
    arg_x: float
    arg_y: float
    x_series: tuple = ()

    def __post_init__(self):
        if not (self.arg_x > 0 and self.arg_y > 0):
            raise ValueError("bivariate Fox-H arguments must be positive")

    def constraints(self):
        cons = list(self.joint_terms.constraints())
        cons += self.x_terms.constraints()
        cons += _only_t(self.y_terms).constraints()
        for _, terms in self.x_series:
            cons += terms.constraints()
        return cons

    def log_s(self, s):
        val = self.x_terms.log_value(s) - s * math.log(self.arg_x)
        if self.x_series:
            acc = np.zeros(np.shape(s), dtype=complex)
            for weight, terms in self.x_series:
                acc = acc + weight * np.exp(terms.log_value(s))
            val = val + np.log(acc)
        return val

    def log_t(self, t):
        return self.y_terms.log_value(t) - t * math.log(self.arg_y)

    def log_joint(self, s, t):
        return self.joint_terms.log_value(s, t)

    def log_kernel(self, s, t):
        return self.log_s(s) + self.log_t(t) + self.log_joint(s, t)


@dataclass(frozen=True)
class MellinResult:
    value: float
    error: float
    contours: tuple
    perturbations: tuple = ()

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------
# quadrature helpers

_GL_ORDER = 10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
_TAIL = 1e-16
_MAX_EXTENT = 2000.0
_MAX_PANELS = 1 << 14


def _panels(lo: float, hi: float, n_panels: int):
    edges = np.linspace(lo, hi, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


def _extent(logmag: Callable[[np.ndarray], np.ndarray], peak: float, start: float = 8.0,
            symmetric: bool = False) -> float:
    """Grow T until the envelope of ``exp(logmag)`` beyond T is below 1e-16 of the peak."""
    cut = peak + math.log(_TAIL)
    T = start
    while T < _MAX_EXTENT:
        probe = np.linspace(T, 2.0 * T, 9)
        if symmetric:
            probe = np.concatenate([probe, -probe])
        if np.all(logmag(probe) < cut):
            return T
        T *= 1.5
    raise ConvergenceError(f"integrand does not decay along the contour (|Im| up to {_MAX_EXTENT})")


def mellin_barnes_1d(log_phi: Callable[[np.ndarray], np.ndarray], shift: float, x,
                     tol: float = 1e-10, max_panels: int = _MAX_PANELS):
    """``1/(2 pi i) int_{c-i inf}^{c+i inf} phi(s) x**(-s) ds`` on a straight line.

    ``log_phi`` must be conjugate-symmetric (real parameters), so only the
    upper half line is integrated. ``x`` may be an array; one contour serves
    every entry. Returns ``(values, error_estimates, ContourSpec)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lx = np.log(x)
    lx_span = (float(lx.min()), float(lx.max()))

    def logmag(y):
        s = shift + 1j * np.asarray(y)
        v = np.real(log_phi(s))
        return np.maximum(v - shift * lx_span[0], v - shift * lx_span[1])

    peak = float(np.max(logmag(np.linspace(0.0, 4.0, 41))))
    T = _extent(logmag, peak)

    # panel width shrinks with the oscillation rate of x**(-iy)
    freq = max(abs(lx_span[0]), abs(lx_span[1]), 1.0)
    n_panels = max(4, int(math.ceil(T * freq / 6.0)))
    prev = None
    while True:
        y, w = _panels(0.0, T, n_panels)
        s = shift + 1j * y
        lphi = log_phi(s)
        expo = lphi[:, None] - s[:, None] * lx[None, :]
        vals = np.real(np.exp(expo).T @ w) / math.pi
        scale = np.abs(np.exp(expo)).T @ w / math.pi
        if prev is not None:
            err = np.abs(vals - prev)
            if np.all(err <= np.maximum(tol * np.abs(vals), 1e-15 * scale)):
                return vals, err, ContourSpec(shift, T, y.size)
        if 2 * n_panels > max_panels:
            if prev is None:
                err = np.full_like(vals, np.inf)
            raise ConvergenceError(
                f"1-D contour quadrature did not converge (max error {np.max(err):.3g})")
        prev = vals
        n_panels *= 2


def strip_shift(log_phi: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                lx: float = 0.0, margin: float = 0.05) -> float:
    """Line position inside the pole-free strip ``lo < c < hi``.

    Picks the minimiser of ``Re log phi(c) - c*lx`` on the real axis, which
    is where the vertical profile of the integrand is flattest.
    """
    if not hi > lo:
        raise ContourError(f"empty strip ({lo}, {hi})")
    if not np.isfinite(lo):
        lo = hi - 30.0
    if not np.isfinite(hi):
        hi = lo + 30.0
    pad = min(margin * (hi - lo), 0.25)

    def f(c):
        return float(np.real(log_phi(np.array([c + 0j])))[0] - c * lx)

    res = optimize.minimize_scalar(f, bounds=(lo + pad, hi - pad), method="bounded",
                                   options={"xatol": 1e-6})
    return float(res.x)


# ---------------------------------------------------------------------------
# Meijer-G


def meijer_g_kernel(m: int, n: int, a: Sequence[float], b: Sequence[float]) -> GammaTermList:
    """Gamma terms of the G^{m,n}_{p,q} integrand in the x**(-s) convention."""
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    num = [(bj, 1.0) for bj in b[:m]] + [(1.0 - aj, -1.0) for aj in a[:n]]
    den = [(1.0 - bj, -1.0) for bj in b[m:]] + [(aj, 1.0) for aj in a[n:]]
    return GammaTermList(tuple(num), tuple(den))


def _plan_shift_1d(terms: GammaTermList, lx_mid: float, margin: float = 0.05):
    """Choose the line position and list the poles that end up on the wrong side.

    Left poles come from numerator terms with positive scale, right poles
    from those with negative scale. Among all candidate gaps the one with
    the fewest misplaced poles wins; inside it the shift minimises the
    integrand on the real axis.
    """
    left, right = [], []  # (pole position, term index, k)
    horizon = 60
    for idx, (off, sc) in enumerate(terms.numerator):
        if sc == 0:
            continue
        for k in range(horizon):
            pos = (-k - off) / sc
            (left if sc > 0 else right).append((pos, idx, k))
    lpos = np.array([p for p, _, _ in left]) if left else np.array([-np.inf])
    rpos = np.array([p for p, _, _ in right]) if right else np.array([np.inf])
    if left and right:
        gap = np.min(np.abs(lpos[:, None] - rpos[None, :]))
        if gap < 1e-9:
            raise ContourError("a left and a right pole coincide; the kernel is degenerate")
    rightmost_left = lpos.max()
    leftmost_right = rpos.min()

    def phi_real(c):
        return float(np.real(terms.log_value(np.array([c + 0j])))[0] - c * lx_mid)

    if rightmost_left < leftmost_right:
        lo, hi = rightmost_left, leftmost_right
        wrong = []
    else:
        # interleaved families: scan gaps between consecutive distinct poles
        allpos = np.unique(np.round(np.concatenate([lpos, rpos]), 12))
        allpos = allpos[np.isfinite(allpos)]
        lo_lim = min(rpos.min(), lpos.max()) - 1.0
        hi_lim = max(lpos.max(), rpos.min()) + 1.0
        cand = allpos[(allpos >= lo_lim) & (allpos <= hi_lim)]
        best = None
        edges = np.concatenate([[lo_lim - 1.0], cand, [hi_lim + 1.0]])
        for e0, e1 in zip(edges[:-1], edges[1:]):
            if e1 - e0 < 1e-7:
                continue
            c = 0.5 * (e0 + e1)
            nwrong = int(np.sum(lpos > c) + np.sum(rpos < c))
            key = (nwrong, -(e1 - e0))
            if best is None or key < best[0]:
                best = (key, e0, e1)
        _, lo, hi = best
        c = 0.5 * (lo + hi)
        wrong = [(p, i, k, "L") for p, i, k in left if p > c] + \
                [(p, i, k, "R") for p, i, k in right if p < c]
    width = hi - lo
    if not np.isfinite(width):
        # open interval: bracket a finite search window
        if not np.isfinite(lo):
            lo = hi - 30.0
        if not np.isfinite(hi):
            hi = lo + 30.0
        width = hi - lo
    pad = min(margin * width, 0.25) if np.isfinite(width) else 0.25
    a_, b_ = lo + pad, hi - pad
    if not b_ > a_:
        raise ContourError("pole gap too narrow to place an integration line")
    res = optimize.minimize_scalar(phi_real, bounds=(a_, b_), method="bounded",
                                   options={"xatol": 1e-6})
    return float(res.x), wrong


def _residue_sum(terms: GammaTermList, wrong, x):
    """Residue corrections for poles on the wrong side of the line."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    total = np.zeros(x.shape, dtype=complex)
    num = list(terms.numerator)
    for pos, idx, k, side in wrong:
        others = GammaTermList(tuple(num[:idx] + num[idx + 1:]), terms.denominator)
        off, sc = num[idx]
        # residue of Gamma(off + sc*s) at s = pos is (-1)^k / (k! * sc)
        lres = others.log_value(np.array([pos + 0j]))[0]
        lres += -math.lgamma(k + 1) - math.log(abs(sc))
        sign = (-1) ** k * (1 if sc > 0 else -1)
        contrib = sign * np.exp(lres - pos * np.log(x))
        # left-family pole right of the line: +Res; right-family pole left of it: -Res
        total += contrib if side == "L" else -contrib
    return np.real(total)


def _wrong_side_collides(terms: GammaTermList, wrong) -> bool:
    """True when a pole needing a residue correction is not simple."""
    num = list(terms.numerator)
    for pos, idx, _, _ in wrong:
        for j, (off, sc) in enumerate(num):
            if j == idx or sc == 0:
                continue
            arg = off + sc * pos
            if arg < 0.5 and abs(arg - round(arg)) < 1e-9:
                return True
    return False


def meijer_g(m: int, n: int, p: int, q: int, a: Sequence[float], b: Sequence[float], x,
             tol: float = 1e-10, return_error: bool = False):
    """Meijer G^{m,n}_{p,q}[x | a; b] by contour quadrature.

    ``x`` may be scalar or array (all entries share one contour). With
    ``return_error=True`` a :class:`MellinResult` is returned instead.
    """
    a = list(a)
    b = list(b)
    if len(a) != p or len(b) != q or not (0 <= m <= q and 0 <= n <= p):
        raise ValueError("inconsistent Meijer-G orders and parameter counts")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(xs > 0)):
        raise ValueError("meijer_g needs x > 0")
    scalar = np.ndim(x) == 0

    lxs = np.log(xs)
    if xs.size > 1 and np.ptp(lxs) > 4.0:
        # one shared line loses relative accuracy across many decades
        parts = [meijer_g(m, n, p, q, a, b, float(v), tol=tol, return_error=True) for v in xs]
        vals = np.array([r.value for r in parts])
        if return_error:
            return MellinResult(vals, np.array([r.error for r in parts]),
                                tuple(c for r in parts for c in r.contours),
                                tuple(e for r in parts for e in r.perturbations))
        return vals

    terms = meijer_g_kernel(m, n, a, b)
    lmid = float(np.median(lxs))
    shift, wrong = _plan_shift_1d(terms, lmid)
    perturb = ()
    if wrong and _wrong_side_collides(terms, wrong):
        # residues assume simple poles; separate coincident ones first
        bb, mv_b = separate_poles(b[:m])
        aa, mv_a = separate_poles([1.0 - v for v in a[:n]])
        if mv_b or mv_a:
            b = list(bb) + b[m:]
            a = [1.0 - v for v in aa] + a[n:]
            terms = meijer_g_kernel(m, n, a, b)
            shift, wrong = _plan_shift_1d(terms, lmid)
            perturb = tuple(("b", *r) for r in mv_b) + tuple(("1-a", *r) for r in mv_a)
    vals, err, contour = mellin_barnes_1d(terms.log_value, shift, xs, tol=tol)
    if wrong:
        vals = vals + _residue_sum(terms, wrong, xs)
    if return_error:
        v = float(vals[0]) if scalar else vals
        e = float(err[0]) if scalar else err
        return MellinResult(v, e, (contour,), perturb)
    return float(vals[0]) if scalar else vals


# ---------------------------------------------------------------------------
# bivariate


def plan_contour_2d(spec: BivariateFoxHSpec, constraints=None, margin: float = 0.02):
    """Pick ``(c_s, c_t)`` inside the admissible polytope.

    ``constraints`` is a list of ``(offset, a_s, a_t)`` forms required to be
    positive; by default they come from the numerator gamma terms. The point
    minimises the real-axis integrand (a saddle of the vertical profile),
    which keeps cancellation along the lines small.
    """
    cons = np.array(spec.constraints() if constraints is None else constraints, dtype=float)

    def slack(c):
        return cons[:, 0] + cons[:, 1] * c[0] + cons[:, 2] * c[1]

    # feasibility: maximise the smallest normalised slack (Chebyshev centre)
    norms = np.hypot(cons[:, 1], cons[:, 2])
    norms[norms == 0] = 1.0
    lp = optimize.linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=np.column_stack([-cons[:, 1] / norms, -cons[:, 2] / norms, np.ones(len(cons))]),
        b_ub=cons[:, 0] / norms,
        bounds=[(-200, 200), (-200, 200), (None, 5.0)],
        method="highs",
    )
    if not lp.success or lp.x[2] <= 1e-6:
        raise ContourError("no straight contours separate the pole families of this kernel")
    start = lp.x[:2]
    radius = lp.x[2]
    floor = max(min(margin, 0.5 * radius), min(0.15, 0.5 * radius))

    def objective(c):
        sl = slack(c) / norms
        if np.any(sl <= floor):
            return 1e300
        return float(np.real(spec.log_kernel(np.array([c[0] + 0j]), np.array([c[1] + 0j]))[0]))

    res = optimize.minimize(objective, start, method="Nelder-Mead",
                            options={"xatol": 1e-5, "fatol": 1e-9, "maxiter": 2000,
                                     "initial_simplex": [start, start + [0.5 * radius, 0],
                                                         start + [0, 0.5 * radius]]})
    c = res.x if res.fun < objective(start) else start
    return float(c[0]), float(c[1])


def mellin_barnes_2d(spec: BivariateFoxHSpec, shift_s: float, shift_t: float,
                     tol: float = 1e-10, max_panels: int = 4096, arg_x=None) -> MellinResult:
    """``1/(2 pi i)^2`` times the double line integral of the kernel at fixed shifts.

    ``arg_x`` optionally replaces ``spec.arg_x`` by an array of arguments that
    share the same pair of lines; the value and error are then arrays.
    """
    cs, ct = shift_s, shift_t
    xs = None if arg_x is None else np.atleast_1d(np.asarray(arg_x, dtype=float))
    lx_all = np.log(xs) if xs is not None else np.array([math.log(spec.arg_x)])
    lx0 = math.log(spec.arg_x)

    def lk(ys, yt):
        # envelope over every requested argument
        ss = cs + 1j * np.asarray(ys)
        base = spec.log_kernel(ss, ct + 1j * np.asarray(yt)) + ss * lx0
        return base - cs * (lx_all.max() if cs < 0 else lx_all.min())

    peak = float(np.max(np.real(lk(*np.meshgrid(np.linspace(0, 3, 13), np.linspace(-3, 3, 25))))))
    cut = peak + math.log(_TAIL)

    Ts, Tt = 8.0, 8.0
    for _ in range(40):
        edge_s = np.linspace(0.0, Ts, 41)
        edge_t = np.linspace(-Tt, Tt, 81)
        far_s = np.concatenate([np.linspace(Ts, 2 * Ts, 9)])
        far_t = np.concatenate([np.linspace(Tt, 2 * Tt, 9), -np.linspace(Tt, 2 * Tt, 9)])
        bad_s = np.max(np.real(lk(*np.meshgrid(far_s, np.linspace(-2 * Tt, 2 * Tt, 81))))) >= cut
        bad_t = np.max(np.real(lk(*np.meshgrid(np.linspace(0, 2 * Ts, 41), far_t)))) >= cut
        if not (bad_s or bad_t):
            break
        if bad_s:
            Ts *= 1.4
        if bad_t:
            Tt *= 1.4
        if max(Ts, Tt) > _MAX_EXTENT:
            raise ConvergenceError("double Mellin-Barnes integrand does not decay")
    else:
        raise ConvergenceError("could not bound the double Mellin-Barnes integrand")
    del edge_s, edge_t

    ns = max(4, int(math.ceil(Ts * max(float(np.max(np.abs(lx_all))), 1.0) / 8.0)))
    nt = max(8, int(math.ceil(2 * Tt * max(abs(math.log(spec.arg_y)), 1.0) / 8.0)))

    def evaluate(ns, nt):
        ys, ws = _panels(0.0, Ts, ns)
        yt, wt = _panels(-Tt, Tt, nt)
        s = cs + 1j * ys
        t = ct + 1j * yt
        # x-independent part: the t integral at every s node
        ls = spec.log_s(s) + s * lx0
        lt = spec.log_t(t)
        inner_log = spec.log_joint(s[:, None], t[None, :]) + lt[None, :]
        shift = np.max(np.real(inner_log), axis=1)
        terms = np.exp(inner_log - shift[:, None])
        inner = terms @ wt
        inner_abs = np.abs(terms) @ wt
        expo = ls[None, :] + shift[None, :] - lx_all[:, None] * s[None, :]
        val = np.real(np.exp(expo) @ (ws * inner)) / (2 * math.pi ** 2)
        scale = (np.abs(np.exp(expo)) @ (ws * inner_abs)) / (2 * math.pi ** 2)
        return val, scale, (ContourSpec(cs, Ts, ys.size), ContourSpec(ct, Tt, yt.size))

    def done(val, prev, scale):
        return np.all(np.abs(val - prev) <= np.maximum(tol * np.abs(val), 1e-15 * scale))

    # refine the t rule on the coarse s rule first, then the s rule
    prev, _, _ = evaluate(ns, nt)
    err_t = None
    while err_t is None:
        if 2 * nt > max_panels:
            raise ConvergenceError("double contour quadrature did not converge in t")
        nt *= 2
        val, scale, _ = evaluate(ns, nt)
        if done(val, prev, scale):
            err_t = np.abs(val - prev)
        prev = val
    while True:
        if 2 * ns > max_panels:
            raise ConvergenceError(
                f"double contour quadrature did not converge in s (|dv|={np.max(np.abs(val - prev)):.3g})")
        ns *= 2
        val, scale, contours = evaluate(ns, nt)
        if done(val, prev, scale):
            err = np.abs(val - prev) + err_t
            if xs is None:
                return MellinResult(float(val[0]), float(err[0]), contours)
            return MellinResult(val, err, contours)
        prev = val


def fox_h_bivariate(spec: BivariateFoxHSpec, tol: float = 1e-10, constraints=None,
                    arg_x=None) -> MellinResult:
    """Bivariate Fox-H function: plan separating lines, then integrate.

    ``constraints`` overrides the default strip (numerator arguments with
    positive real part), which is how shifted-contour variants are requested.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    cs, ct = plan_contour_2d(spec, constraints)
    return mellin_barnes_2d(spec, cs, ct, tol=tol, arg_x=arg_x)
