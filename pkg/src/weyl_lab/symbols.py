"""Elliptic symbols on the circle and finite-order non-degeneracy of their argument.

A symbol is p(x, xi) = a(x) xi^m with a complex trigonometric-polynomial
leading coefficient a (plus optional lower-order coefficients that do not
enter p).  Everything downstream hinges on the angular behaviour of
F(x) = arg p(x, omega) along the two ray directions omega = +-1: the volume
formulas integrate over level regions of F, and the counting theory requires
that on each level set {F = theta0} some derivative F^(k), k <= N0, stays
away from zero.  This module validates the model invariants, evaluates F and
its jets exactly (through the series logarithm of a), locates level sets by
bracketed bisection plus tangential-touch detection, and turns the jet data
into a three-valued verdict: holds, fails, or inconclusive when a value falls
inside the numerical grey zone around the zero threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidModelError, NumericalError
from .trig import TrigPoly, wrap_0_2pi, wrap_pm_pi

# Relative floor below which min |a| counts as an ellipticity violation.
ELLIPTICITY_REL_FLOOR = 1e-10
# Smallest admissible angular gap in the closure of arg p (range-gap surrogate
# for "p does not cover the whole plane").
RANGE_GAP_FLOOR = 1e-3
# Relative jet threshold separating "zero" from "nonzero" derivative values,
# with a factor-10 grey band on each side.
JET_REL_THRESHOLD = 1e-8
JET_GREY_BAND = 10.0
# Level-set root refinement.
ROOT_GRID_SIZE = 4096
ROOT_REFINE_TOL = 1e-12
TOUCH_ACCEPT_TOL = 1e-9
TOUCH_GREY_TOL = 1e-5


@dataclass(frozen=True)
class SymbolModel:
    """Operator model sum_{k<=m} a_k(x) D^k with elliptic top coefficient.

    ``top_coeff`` is the order-m coefficient a = a_m defining the symbol
    p(x, xi) = a(x) xi^m; ``lower_coeffs`` maps orders k < m to their
    coefficients (they enter discretization, not the symbol).  ``grid_size``
    fixes the evaluation grid used by all numerical checks on this model.
    """

    order_m: int
    top_coeff: TrigPoly
    lower_coeffs: dict[int, TrigPoly] = field(default_factory=dict)
    dim_n: int = 1
    grid_size: int = ROOT_GRID_SIZE

    def __post_init__(self):
        if self.dim_n != 1:
            raise ConfigError(f"only circle models (n = 1) are supported, got n = {self.dim_n}")
        if self.order_m < 1:
            raise ConfigError(f"operator order must be >= 1, got {self.order_m}")
        if any(k >= self.order_m or k < 0 for k in self.lower_coeffs):
            raise ConfigError("lower-order coefficients must have orders in [0, m)")

    @classmethod
    def from_json(cls, obj: dict) -> "SymbolModel":
        """Build from ``{"m": ..., "n": 1, "coeffs": [{"alpha": k, "cos": ...}, ...]}``."""
        if not isinstance(obj, dict):
            raise ConfigError("symbol description must be a JSON object")
        try:
            m = int(obj["m"])
            n = int(obj.get("n", 1))
            coeffs = obj["coeffs"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"symbol description missing or malformed field: {exc}") from exc
        top = None
        lower: dict[int, TrigPoly] = {}
        for entry in coeffs:
            alpha = int(entry.get("alpha", -1))
            poly = TrigPoly.from_json(entry)
            if alpha == m:
                if top is not None:
                    top = top + poly
                else:
                    top = poly
            elif 0 <= alpha < m:
                lower[alpha] = lower[alpha] + poly if alpha in lower else poly
            else:
                raise ConfigError(f"coefficient order alpha = {alpha} outside [0, m = {m}]")
        if top is None:
            raise ConfigError("no top-order coefficient (alpha = m) present")
        model = cls(order_m=m, top_coeff=top, lower_coeffs=lower, dim_n=n)
        model.validate()
        return model

    def to_json(self) -> dict:
        coeffs = [dict(alpha=self.order_m, **self.top_coeff.to_json())]
        for k in sorted(self.lower_coeffs):
            coeffs.append(dict(alpha=k, **self.lower_coeffs[k].to_json()))
        return {"m": self.order_m, "n": self.dim_n, "coeffs": coeffs}

    @property
    def bandwidth(self) -> int:
        """Largest trigonometric degree over all coefficients."""
        d = self.top_coeff.degree
        for poly in self.lower_coeffs.values():
            d = max(d, poly.degree)
        return d

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * np.pi, self.grid_size, endpoint=False)

    def validate(self) -> None:
        """Check ellipticity, evenness of the order, and the angular range gap.

        Raises InvalidModelError on violation.  Evenness of m is equivalent to
        the symmetry p(x, -xi) = p(x, xi); the range gap certifies that arg p
        misses an open angular sector, so sectors of the plane exist that the
        symbol range does not meet.
        """
        a = self.top_coeff(self.grid())
        amax = float(np.max(np.abs(a)))
        amin = float(np.min(np.abs(a)))
        if amax == 0.0 or amin <= ELLIPTICITY_REL_FLOOR * max(1.0, amax):
            raise InvalidModelError(
                f"ellipticity fails: min |a| = {amin:.3e} on the grid (max {amax:.3e})"
            )
        if self.order_m % 2 != 0:
            raise InvalidModelError(
                f"order m = {self.order_m} is odd, so p(x, -xi) != p(x, xi)"
            )
        gap = self.range_gap()
        if gap <= RANGE_GAP_FLOOR:
            raise InvalidModelError(
                f"argument range of the symbol leaves no angular gap (gap = {gap:.3e})"
            )

    def range_gap(self) -> float:
        """Largest angular gap missed by arg p, in radians (0 if covered)."""
        F, winding = self._arg_branch()
        if winding != 0:
            return 0.0
        width = float(np.max(F) - np.min(F))
        return max(0.0, 2.0 * np.pi - width)

    def _arg_branch(self) -> tuple[np.ndarray, int]:
        """Continuous branch of arg a on the grid and its winding number."""
        a = self.top_coeff(self.grid())
        if np.min(np.abs(a)) <= ELLIPTICITY_REL_FLOOR * max(1.0, float(np.max(np.abs(a)))):
            raise InvalidModelError("branch lift failed: |a| dips to the ellipticity floor")
        F = np.unwrap(np.angle(a))
        # net increment over one full period, in units of 2*pi
        inc = float(wrap_pm_pi(np.angle(a[0]) - F[-1])) + F[-1] - F[0]
        winding = int(round(inc / (2.0 * np.pi)))
        return F, winding


def eval_symbol(model: SymbolModel, x, xi):
    """p(x, xi) = a(x) xi^m, broadcasting over array arguments."""
    a = model.top_coeff(x)
    return a * np.power(np.asarray(xi, dtype=complex), model.order_m)


def arg_function(model: SymbolModel, x, omega: int = 1):
    """arg p(x, omega) reduced to [0, 2*pi).

    omega is the ray direction (+1 or -1); for the even orders enforced by
    ``validate`` the two directions agree.
    """
    val = eval_symbol(model, x, float(omega))
    return wrap_0_2pi(np.angle(val))


def arg_branch_on_grid(model: SymbolModel, omega: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(grid, F) with F a continuous branch of arg p(., omega) along the grid."""
    xs = model.grid()
    a = eval_symbol(model, xs, float(omega))
    return xs, np.unwrap(np.angle(a))


def arg_jets(model: SymbolModel, x, order: int) -> np.ndarray:
    """Derivatives F^(k)(x), k = 1..order, of F = arg p via the series logarithm.

    With c_i = a^(i)(x)/i! the Taylor coefficients of a, the log-series
    recurrence l_k = (c_k - (1/k) sum_{j=1}^{k-1} (k-j) c_j l_{k-j}) / c_0
    gives F^(k) = k! Im l_k without any branch choice.  Vectorized over x;
    returns shape (order,) + shape(x).
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xv = np.atleast_1d(x)
    a = model.top_coeff
    c = []
    poly = a
    for i in range(order + 1):
        c.append(np.asarray(poly(xv), dtype=complex) / math.factorial(i))
        poly = poly.derivative()
    c0 = c[0]
    if np.any(np.abs(c0) == 0.0):
        raise InvalidModelError("argument jets undefined where a vanishes")
    l = [np.zeros_like(c0)]
    for k in range(1, order + 1):
        acc = c[k].copy()
        for j in range(1, k):
            acc -= (k - j) / k * c[j] * l[k - j]
        l.append(acc / c0)
    jets = np.stack([math.factorial(k) * np.imag(l[k]) for k in range(1, order + 1)])
    return jets[:, 0] if scalar else jets


def _bisect_level(model: SymbolModel, target: float, lo: float, hi: float) -> float:
    """Bisection for F(x) = target on a bracket where the wrapped difference changes sign."""
    def f(x):
        return wrap_pm_pi(float(np.angle(eval_symbol(model, x, 1.0))) - target)

    flo, fhi = f(lo), f(hi)
    # the wrap rounds sub-ulp differences to exactly zero at a root endpoint
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo < 0) == (fhi < 0):
        return lo if abs(flo) <= abs(fhi) else hi
    for _ in range(80):
        if hi - lo < ROOT_REFINE_TOL:
            break
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0) == (fmid < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _deriv_sign_roots(model: SymbolModel) -> np.ndarray:
    """Local extrema of F: refined roots of F' = Im(a'/a) located by sign change."""
    from scipy.optimize import brentq

    xs = model.grid()
    h = xs[1] - xs[0]
    fp = arg_jets(model, xs, 1)[0]
    roots = []
    n = xs.size
    for i in range(n):
        j = (i + 1) % n
        a, b = fp[i], fp[j]
        if a == 0.0:
            roots.append(xs[i])
        elif (a < 0) != (b < 0):
            lo, hi = xs[i], xs[i] + h

            def g(x):
                return float(arg_jets(model, np.atleast_1d(x), 1)[0, 0])

            roots.append(brentq(g, lo, hi, xtol=ROOT_REFINE_TOL))
    return np.asarray(roots, dtype=float)


@dataclass
class ArgLevelSet:
    """Level set {x : F(x) = theta0 mod 2*pi} with jets at each point."""

    theta0: float
    points: np.ndarray
    jets: np.ndarray  # shape (len(points), order)
    covers_circle: bool = False
    unresolved_points: np.ndarray = field(default_factory=lambda: np.empty(0))


def level_crossings(model: SymbolModel, theta0: float, jet_order: int = 0) -> ArgLevelSet:
    """All points of {arg p = theta0} on [0, 2*pi), transversal and tangential.

    Transversal crossings come from sign changes of the lifted branch against
    every reachable 2*pi translate of theta0, refined by bisection to
    ROOT_REFINE_TOL.  Tangential touches come from local extrema of F (roots
    of F'): an extremum whose level differs from theta0 by at most
    TOUCH_ACCEPT_TOL (times the angular scale) is a root; differences inside
    the (TOUCH_ACCEPT_TOL, TOUCH_GREY_TOL) band are recorded as unresolved.
    """
    xs, F = arg_branch_on_grid(model)
    n = xs.size
    h = xs[1] - xs[0]
    fmin, fmax = float(np.min(F)), float(np.max(F))
    scale = max(1.0, fmax - fmin)

    if fmax - fmin <= TOUCH_ACCEPT_TOL * scale:
        # constant argument: the level set is everything or nothing
        if abs(wrap_pm_pi(F[0] - theta0)) <= math.sqrt(TOUCH_ACCEPT_TOL):
            return ArgLevelSet(theta0, np.empty(0), np.empty((0, max(jet_order, 1))),
                               covers_circle=True)
        return ArgLevelSet(theta0, np.empty(0), np.empty((0, max(jet_order, 1))))

    roots: list[float] = []
    unresolved: list[float] = []

    l_lo = math.floor((fmin - theta0) / (2.0 * np.pi)) - 1
    l_hi = math.ceil((fmax - theta0) / (2.0 * np.pi)) + 1
    targets = [theta0 + 2.0 * np.pi * l for l in range(l_lo, l_hi + 1)]
    targets = [t for t in targets if fmin - 1e-3 <= t <= fmax + 1e-3]

    # extend across the wrap point so the last grid interval is bracketed too
    F_ext = np.append(F, F[-1] + float(wrap_pm_pi(F[0] - F[-1])))

    for target in targets:
        d = F_ext - target
        for i in range(n):
            if d[i] == 0.0:
                roots.append(float(xs[i]))
            elif (d[i] < 0) != (d[i + 1] < 0):
                roots.append(_bisect_level(model, target, float(xs[i]), float(xs[i]) + h))

    for x_ext in _deriv_sign_roots(model):
        level = float(arg_function(model, x_ext))
        diff = abs(wrap_pm_pi(level - theta0))
        if diff <= TOUCH_ACCEPT_TOL * scale:
            roots.append(float(wrap_0_2pi(x_ext)))
        elif diff <= TOUCH_GREY_TOL * scale:
            unresolved.append(float(wrap_0_2pi(x_ext)))

    pts = np.asarray(sorted(wrap_0_2pi(np.asarray(roots))), dtype=float)
    if pts.size:
        # merge duplicates (bisection and touch detection can find the same point)
        keep = [0]
        for i in range(1, pts.size):
            if pts[i] - pts[keep[-1]] > 1e-8:
                keep.append(i)
        if len(keep) > 1 and (2.0 * np.pi - pts[keep[-1]]) + pts[keep[0]] <= 1e-8:
            keep.pop()
        pts = pts[keep]

    order = max(jet_order, 1)
    jets = arg_jets(model, pts, order).T if pts.size else np.empty((0, order))
    return ArgLevelSet(theta0, pts, jets, unresolved_points=np.asarray(unresolved))


@dataclass
class NondegeneracyResult:
    """Three-valued verdict for the finite-order condition on a level set."""

    verdict: str  # 'holds' | 'fails' | 'inconclusive'
    theta0: float
    n0: int
    level_set: ArgLevelSet
    jet_scales: np.ndarray
    threshold_rel: float = JET_REL_THRESHOLD
    failing_points: np.ndarray = field(default_factory=lambda: np.empty(0))
    grey_points: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def holds(self) -> bool | None:
        if self.verdict == "holds":
            return True
        if self.verdict == "fails":
            return False
        return None

    def to_report(self) -> dict:
        return {
            "verdict": self.verdict,
            "theta0": float(self.theta0),
            "n0": int(self.n0),
            "points": [float(p) for p in self.level_set.points],
            "jets": [[float(v) for v in row] for row in self.level_set.jets],
            "jet_scales": [float(s) for s in self.jet_scales],
            "threshold_rel": float(self.threshold_rel),
            "covers_circle": bool(self.level_set.covers_circle),
            "failing_points": [float(p) for p in self.failing_points],
            "grey_points": [float(p) for p in self.grey_points],
            "unresolved_points": [float(p) for p in self.level_set.unresolved_points],
        }


def check_nondegeneracy(model: SymbolModel, theta0: float, n0: int) -> NondegeneracyResult:
    """Decide whether every point of {arg p = theta0} has a nonzero jet of order <= n0.

    A derivative value counts as clearly nonzero when it exceeds
    JET_GREY_BAND * threshold_k and clearly zero below threshold_k /
    JET_GREY_BAND, where threshold_k = JET_REL_THRESHOLD * max_x |F^(k)|.
    Points whose every order is clearly zero fail; points with no clear
    nonzero order but at least one grey value are inconclusive, as are
    unresolved tangential root candidates.  A definite failure anywhere
    dominates the verdict.
    """
    if n0 < 1:
        raise ConfigError(f"derivative budget n0 must be >= 1, got {n0}")
    ls = level_crossings(model, theta0, jet_order=n0)
    xs = model.grid()
    all_jets = arg_jets(model, xs, n0)
    scales = np.max(np.abs(all_jets), axis=1)

    if ls.covers_circle:
        return NondegeneracyResult("fails", theta0, n0, ls, scales,
                                   failing_points=np.array([np.nan]))

    thresholds = JET_REL_THRESHOLD * np.maximum(scales, 0.0)
    failing, grey = [], []
    for i, x in enumerate(ls.points):
        vals = np.abs(ls.jets[i, :n0])
        clear_nonzero = False
        all_clear_zero = True
        for k in range(n0):
            thr = thresholds[k]
            if thr == 0.0:
                # derivative order identically zero on the whole circle
                continue
            if vals[k] >= JET_GREY_BAND * thr:
                clear_nonzero = True
                all_clear_zero = False
            elif vals[k] > thr / JET_GREY_BAND:
                all_clear_zero = False
        if clear_nonzero:
            continue
        if all_clear_zero:
            failing.append(x)
        else:
            grey.append(x)

    if failing:
        verdict = "fails"
    elif grey or ls.unresolved_points.size:
        verdict = "inconclusive"
    else:
        verdict = "holds"
    return NondegeneracyResult(verdict, theta0, n0, ls, scales,
                               failing_points=np.asarray(failing),
                               grey_points=np.asarray(grey))
