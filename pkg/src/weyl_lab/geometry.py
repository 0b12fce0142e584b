"""Phase-space volumes of symbol preimages, by exact radial reduction.

For p(x, xi) = a(x) xi^m on the circle the preimage of a plane region under p
decomposes along ray directions omega = +-1: at fixed x the symbol sweeps the
ray {u * a(x) omega^m, u >= 0} with u = |xi|^m, so the xi-measure of any
radial set is a sum of (u_hi^{1/m} - u_lo^{1/m}) / |a|^{1/m} terms over
u-intervals.  Sector volumes, volumes of disk preimages {|p - z|^2 <= t} and
tube volumes around boundary curves all reduce to one-dimensional adaptive
quadrature in x of such interval measures, split at the level crossings of
F = arg p where the interval structure changes.  A Monte-Carlo estimator over
the phase-space box provides an independent check of the same quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import ConfigError, HypothesisError, QuadratureError
from .symbols import SymbolModel, eval_symbol, level_crossings
from .trig import TrigPoly, as_profile, wrap_0_2pi, wrap_pm_pi

# Absolute tolerance certified by the quadrature-based volumes.
QUAD_ABS_TOL = 1e-9
# Tolerances requested from QUADPACK (tighter than certified).
_EPSABS = 1e-12
_EPSREL = 1e-12
_LIMIT = 400


@dataclass(frozen=True)
class SectorSpec:
    """Plane sector {r e^{i theta} : theta1 <= theta <= theta2, r1 g <= r <= r2 g}.

    The radial profile g is a positive trigonometric polynomial of the angle
    (a plain number means a round sector).  theta1 may be negative and
    theta2 > 2*pi; only the width theta2 - theta1 <= 2*pi matters, membership
    wraps angles.
    """

    theta1: float
    theta2: float
    r1: float
    r2: float
    g: TrigPoly = field(default_factory=lambda: TrigPoly.constant(1.0))

    def __post_init__(self):
        object.__setattr__(self, "g", as_profile(self.g))
        self.validate()

    @classmethod
    def from_json(cls, obj: dict) -> "SectorSpec":
        try:
            spec = cls(
                theta1=float(obj["theta1"]),
                theta2=float(obj["theta2"]),
                r1=float(obj["r1"]),
                r2=float(obj["r2"]),
                g=as_profile(obj.get("g", 1.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed sector description: {exc}") from exc
        spec.validate()
        return spec

    def to_json(self) -> dict:
        return {
            "theta1": self.theta1,
            "theta2": self.theta2,
            "r1": self.r1,
            "r2": self.r2,
            "g": self.g.to_json(),
        }

    @property
    def width(self) -> float:
        return self.theta2 - self.theta1

    @property
    def is_full_angle(self) -> bool:
        return self.width >= 2.0 * np.pi - 1e-12

    def validate(self) -> None:
        if not (0.0 <= self.width <= 2.0 * np.pi + 1e-12):
            raise ConfigError(
                f"sector width must lie in [0, 2*pi], got {self.width:.6f}"
            )
        if not (0.0 <= self.r1 <= self.r2):
            raise ConfigError(f"need 0 <= r1 <= r2, got r1={self.r1}, r2={self.r2}")
        if not self.g.is_real:
            raise ConfigError("radial profile must be real-valued")
        thetas = np.linspace(self.theta1, self.theta2, 512)
        if np.min(self.g(thetas).real) <= 0.0:
            raise ConfigError("radial profile must be positive on the angular range")

    def profile_range(self) -> tuple[float, float]:
        thetas = np.linspace(self.theta1, self.theta2, 2048)
        vals = self.g(thetas).real
        return float(np.min(vals)), float(np.max(vals))

    def scaled(self, factor: float) -> "SectorSpec":
        """Sector with both radii multiplied by factor (same angles, same profile)."""
        return SectorSpec(self.theta1, self.theta2, factor * self.r1, factor * self.r2, self.g)


def sector_membership(z, sector: SectorSpec, outer_open: bool = False):
    """Boolean membership of complex points in the (closed) sector.

    ``outer_open`` excludes the outer boundary r = r2 g(theta); everything
    else stays inclusive.  Vectorized over arrays of z.
    """
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    theta = np.angle(z)
    rel = wrap_0_2pi(theta - sector.theta1)
    in_angle = rel <= sector.width if not sector.is_full_angle else np.ones_like(r, dtype=bool)
    gv = sector.g(theta).real
    inner_ok = r >= sector.r1 * gv
    outer_ok = r < sector.r2 * gv if outer_open else r <= sector.r2 * gv
    out = in_angle & inner_ok & outer_ok
    return out if out.shape else bool(out)


def boundary_distance(z, sector: SectorSpec) -> np.ndarray:
    """Rough distance from each point to the nearest sector boundary piece.

    Used only to flag boundary-grazing counts; radial distances are exact for
    round sectors and first-order for profiled ones, angular distances are
    arc lengths at the point's own radius.
    """
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    theta = np.angle(z)
    gv = sector.g(theta).real
    dists = [np.abs(r - sector.r2 * gv)]
    if sector.r1 > 0.0:
        # r1 = 0 degenerates the inner circle to the origin, not a boundary
        dists.append(np.abs(r - sector.r1 * gv))
    if not sector.is_full_angle:
        for edge in (sector.theta1, sector.theta2):
            dists.append(np.abs(wrap_pm_pi(theta - edge)) * np.maximum(r, 1e-300))
    return np.min(np.stack(dists), axis=0)


def _quad_piece(f, a: float, b: float, points=None) -> tuple[float, float]:
    """quad wrapper returning (value, error-estimate) and surfacing non-convergence."""
    if b - a <= 0.0:
        return 0.0, 0.0
    pts = None
    if points is not None:
        pts = sorted(p for p in points if a < p < b)
        if not pts:
            pts = None
    out = quad(f, a, b, epsabs=_EPSABS, epsrel=_EPSREL, limit=_LIMIT,
               points=pts, full_output=1)
    val, err = out[0], out[1]
    if len(out) > 3 and err > QUAD_ABS_TOL * 10.0:
        raise QuadratureError(
            f"quadrature failed to converge on [{a:.6f}, {b:.6f}]: {out[3]}",
            achieved=float(err),
        )
    return float(val), float(err)


def _angular_intervals(model: SymbolModel, theta1: float, width: float) -> list[tuple[float, float]]:
    """x-intervals of {x : arg p(x) in [theta1, theta1 + width] mod 2*pi}."""
    if width >= 2.0 * np.pi - 1e-12:
        return [(0.0, 2.0 * np.pi)]
    cuts: list[float] = []
    for theta in (theta1, theta1 + width):
        cuts.extend(level_crossings(model, wrap_0_2pi(theta)).points.tolist())
    cuts = sorted(set(wrap_0_2pi(np.asarray(cuts)).tolist())) if cuts else []
    edges = [0.0] + cuts + [2.0 * np.pi]

    def inside(x: float) -> bool:
        F = float(np.angle(eval_symbol(model, x, 1.0)))
        return wrap_0_2pi(F - theta1) <= width

    intervals = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo < 1e-13:
            continue
        if inside(0.5 * (lo + hi)):
            intervals.append((lo, hi))
    # merge adjacent intervals sharing an endpoint
    merged: list[tuple[float, float]] = []
    for lo, hi in intervals:
        if merged and abs(merged[-1][1] - lo) < 1e-13:
            merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return merged


def sector_volume(model: SymbolModel, sector: SectorSpec) -> float:
    """vol p^{-1}(sector), reduced to angular quadrature.

    At each x with F(x) = arg p(x, omega) inside the angular range, the ray
    contributes xi-measure (r2^{1/m} - r1^{1/m}) (g(F)/|a|)^{1/m}; summing the
    two ray directions and integrating over x gives the volume.  The
    integration domain is split exactly at the level crossings of the two
    boundary angles, so each piece is smooth.
    """
    sector.validate()
    m = model.order_m
    radial_weight = sector.r2 ** (1.0 / m) - sector.r1 ** (1.0 / m)
    if radial_weight <= 0.0 or sector.width <= 0.0:
        return 0.0
    total = 0.0
    err_acc = 0.0
    intervals = _angular_intervals(model, sector.theta1, sector.width)
    for omega in (1.0, -1.0):

        def integrand(x: float) -> float:
            val = eval_symbol(model, x, omega)
            F = float(np.angle(val))
            gv = float(sector.g(F).real)
            return (gv / abs(val)) ** (1.0 / m)

        for lo, hi in intervals:
            v, e = _quad_piece(integrand, lo, hi)
            total += v
            err_acc += e
    if err_acc > QUAD_ABS_TOL * max(1.0, total):
        raise QuadratureError(
            f"sector volume error estimate {err_acc:.3e} exceeds tolerance",
            achieved=err_acc,
        )
    return radial_weight * total


def _interval_measure(u_los: np.ndarray, u_his: np.ndarray, inv_mod: float, m: int) -> float:
    """Sum of r-measures ((u_hi)^{1/m} - (u_lo)^{1/m}) / |a|^{1/m} over u-intervals."""
    acc = 0.0
    for lo, hi in zip(u_los, u_his):
        if hi > lo:
            acc += (hi ** (1.0 / m) - lo ** (1.0 / m)) * inv_mod
    return acc


def _merge_intervals(intervals: list[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    """Union of closed intervals, returned as sorted disjoint (los, his)."""
    ivs = [(lo, hi) for lo, hi in intervals if hi > lo]
    if not ivs:
        return np.empty(0), np.empty(0)
    ivs.sort()
    los, his = [ivs[0][0]], [ivs[0][1]]
    for lo, hi in ivs[1:]:
        if lo <= his[-1]:
            his[-1] = max(his[-1], hi)
        else:
            los.append(lo)
            his.append(hi)
    return np.asarray(los), np.asarray(his)


def disk_preimage_volume(model: SymbolModel, z: complex, t: float) -> float:
    """vol {(x, xi) : |p(x, xi) - z|^2 <= t}.

    Along each ray the condition is a quadratic in u = |xi|^m |a|, solved in
    closed form; the only kinks of the resulting x-integrand are where the
    discriminant changes sign, and those crossings are passed to the
    quadrature as split points.
    """
    if t < 0.0:
        raise ConfigError(f"disk radius-squared t must be >= 0, got {t}")
    z = complex(z)
    m = model.order_m
    C = abs(z) ** 2 - t
    total = 0.0
    err_acc = 0.0
    for omega in (1.0, -1.0):

        def u_interval(x: float) -> tuple[float, float] | None:
            c = complex(eval_symbol(model, x, omega))
            mod2 = abs(c) ** 2
            B = (c.conjugate() * z).real
            disc = B * B - mod2 * C
            if disc < 0.0:
                return None
            root = math.sqrt(disc)
            u_hi = (B + root) / mod2
            if u_hi <= 0.0:
                return None
            u_lo = max((B - root) / mod2, 0.0)
            return u_lo, u_hi

        def integrand(x: float) -> float:
            iv = u_interval(x)
            if iv is None:
                return 0.0
            c = abs(complex(eval_symbol(model, x, omega)))
            return (iv[1] ** (1.0 / m) - iv[0] ** (1.0 / m)) / c ** (1.0 / m)

        # discriminant sign changes are the only integrand kinks
        xs = model.grid()
        cvals = eval_symbol(model, xs, omega)
        disc_grid = ((np.conj(cvals) * z).real) ** 2 - (np.abs(cvals) ** 2) * C
        pts = []
        n = xs.size
        h = xs[1] - xs[0]
        for i in range(n):
            j = (i + 1) % n
            if (disc_grid[i] < 0) != (disc_grid[j] < 0):
                lo, hi = float(xs[i]), float(xs[i]) + h

                def dfun(x):
                    c = complex(eval_symbol(model, x, omega))
                    return ((c.conjugate() * z).real) ** 2 - abs(c) ** 2 * C

                pts.append(brentq(dfun, lo, hi, xtol=1e-13))
        v, e = _quad_piece(integrand, 0.0, 2.0 * np.pi, points=pts)
        total += v
        err_acc += e
    if err_acc > QUAD_ABS_TOL * max(1.0, total):
        raise QuadratureError(
            f"disk-preimage volume error estimate {err_acc:.3e} exceeds tolerance",
            achieved=err_acc,
        )
    return total


@dataclass(frozen=True)
class TubeSpec:
    """A t-neighbourhood of a curve in the plane, to be pulled back under p.

    Kinds: ``profile_arc`` is {radius * g(theta) e^{i theta}, theta1 <= theta
    <= theta2}; ``radial_segment`` is {s e^{i theta0}, r1 <= s <= r2};
    ``sector_boundary`` is all four boundary pieces of a sector, summed
    subadditively.  Curves must stay away from the origin.
    """

    kind: str
    t: float
    theta1: float = 0.0
    theta2: float = 0.0
    radius: float = 1.0
    g: TrigPoly = field(default_factory=lambda: TrigPoly.constant(1.0))
    theta0: float = 0.0
    r1: float = 0.0
    r2: float = 0.0
    sector: SectorSpec | None = None

    @classmethod
    def profile_arc(cls, radius: float, theta1: float, theta2: float, t: float,
                    g: TrigPoly | float = 1.0) -> "TubeSpec":
        return cls(kind="profile_arc", t=t, radius=radius, theta1=theta1,
                   theta2=theta2, g=as_profile(g))

    @classmethod
    def radial_segment(cls, theta0: float, r1: float, r2: float, t: float) -> "TubeSpec":
        return cls(kind="radial_segment", t=t, theta0=theta0, r1=r1, r2=r2)

    @classmethod
    def sector_boundary(cls, sector: SectorSpec, t: float) -> "TubeSpec":
        return cls(kind="sector_boundary", t=t, sector=sector)


@dataclass
class TubeVolumeResult:
    value: float
    pieces: dict
    subadditive_bound: bool = False


def _arc_ray_intervals(phi: float, R0: float, theta1: float, width: float,
                       t: float) -> list[tuple[float, float]]:
    """u-intervals of {u >= 0 : dist(u e^{i phi}, arc of radius R0) <= t}."""
    ivs: list[tuple[float, float]] = []
    full = width >= 2.0 * np.pi - 1e-12
    rel = wrap_0_2pi(phi - theta1)
    if full or rel <= width:
        ivs.append((max(R0 - t, 0.0), R0 + t))
    if not full:
        for edge in (theta1, theta1 + width):
            d = wrap_pm_pi(phi - edge)
            sin_d = math.sin(d)
            if R0 * abs(sin_d) > t:
                continue
            half = math.sqrt(max(t * t - (R0 * sin_d) ** 2, 0.0))
            center = R0 * math.cos(d)
            if center + half > 0.0:
                ivs.append((max(center - half, 0.0), center + half))
    return ivs


def _segment_ray_intervals(phi: float, theta0: float, r1: float, r2: float,
                           t: float) -> list[tuple[float, float]]:
    """u-intervals of {u >= 0 : dist(u e^{i phi}, [r1, r2] e^{i theta0}) <= t}."""
    d = wrap_pm_pi(phi - theta0)
    sin_d, cos_d = math.sin(d), math.cos(d)
    ivs: list[tuple[float, float]] = []
    for s in (r1, r2):
        disc = t * t - (s * sin_d) ** 2
        if disc >= 0.0:
            half = math.sqrt(disc)
            center = s * cos_d
            if center + half > 0.0:
                ivs.append((max(center - half, 0.0), center + half))
    if cos_d > 0.0:
        # strip alongside the segment interior
        lo = r1 / cos_d
        hi = r2 / cos_d
        if sin_d != 0.0:
            hi = min(hi, t / abs(sin_d))
        if hi > lo:
            ivs.append((lo, hi))
    return ivs


def tube_volume(model: SymbolModel, tube: TubeSpec) -> TubeVolumeResult:
    """vol p^{-1}({dist(., curve) <= t}) for the curve the tube describes.

    Exact ray intervals for constant-profile arcs and radial segments;
    non-constant arc profiles fall back to bisection against a dense
    polyline of the curve.  The x-integration runs only over the angular
    windows where the tube is reachable, with the window edges located by
    level-crossing search, so thin tubes are resolved reliably.
    """
    if tube.t <= 0.0:
        raise ConfigError(f"tube thickness must be positive, got {tube.t}")
    if tube.kind == "sector_boundary":
        if tube.sector is None:
            raise ConfigError("sector_boundary tube needs a sector")
        sec = tube.sector
        pieces: dict[str, float] = {}
        specs: list[tuple[str, TubeSpec]] = [
            ("outer_arc", TubeSpec.profile_arc(sec.r2, sec.theta1, sec.theta2, tube.t, sec.g)),
        ]
        if sec.r1 > 0.0:
            specs.append(("inner_arc",
                          TubeSpec.profile_arc(sec.r1, sec.theta1, sec.theta2, tube.t, sec.g)))
        if not sec.is_full_angle:
            for name, edge in (("edge_lo", sec.theta1), ("edge_hi", sec.theta2)):
                gv = float(sec.g(edge).real)
                specs.append((name, TubeSpec.radial_segment(
                    edge, sec.r1 * gv, sec.r2 * gv, tube.t)))
        for name, sub in specs:
            pieces[name] = tube_volume(model, sub).value
        return TubeVolumeResult(sum(pieces.values()), pieces, subadditive_bound=True)

    m = model.order_m
    t = tube.t

    if tube.kind == "profile_arc":
        g = tube.g
        if g.is_constant:
            R0 = tube.radius * float(g(0.0).real)
            if R0 - t <= 0.0:
                raise HypothesisError("tube reaches the origin: radius <= t")
            width = tube.theta2 - tube.theta1
            dmax = math.asin(min(1.0, t / R0)) * 1.0000001
            window_lo, window_hi = tube.theta1 - dmax, tube.theta2 + dmax

            def ray_ivs(phi: float) -> list[tuple[float, float]]:
                return _arc_ray_intervals(phi, R0, tube.theta1, width, t)

            cut_angles = [tube.theta1, tube.theta2]
        else:
            thetas = np.linspace(tube.theta1, tube.theta2, 8193)
            curve = tube.radius * g(thetas).real * np.exp(1j * thetas)
            rad = np.abs(curve)
            if float(np.min(rad)) - t <= 0.0:
                raise HypothesisError("tube reaches the origin: min curve radius <= t")
            rho_lo_all = float(np.min(rad)) - t
            rho_hi_all = float(np.max(rad)) + t
            dmax = math.asin(min(1.0, t / (float(np.min(rad))))) * 1.0000001
            window_lo, window_hi = tube.theta1 - dmax, tube.theta2 + dmax

            def curve_dist(w: complex) -> float:
                return float(np.min(np.abs(curve - w)))

            def ray_ivs(phi: float) -> list[tuple[float, float]]:
                e = complex(math.cos(phi), math.sin(phi))
                # assume a single rho-interval; valid for t below the curvature scale
                n_scan = 64
                rhos = np.linspace(rho_lo_all, rho_hi_all, n_scan)
                inside = np.array([curve_dist(r * e) <= t for r in rhos])
                if not inside.any():
                    return []
                i0, i1 = np.flatnonzero(inside)[[0, -1]]
                lo = rhos[i0]
                if i0 > 0:
                    a, b = rhos[i0 - 1], rhos[i0]
                    for _ in range(50):
                        mid = 0.5 * (a + b)
                        if curve_dist(mid * e) <= t:
                            b = mid
                        else:
                            a = mid
                    lo = b
                hi = rhos[i1]
                if i1 < n_scan - 1:
                    a, b = rhos[i1], rhos[i1 + 1]
                    for _ in range(50):
                        mid = 0.5 * (a + b)
                        if curve_dist(mid * e) <= t:
                            a = mid
                        else:
                            b = mid
                    hi = a
                return [(lo, hi)]

            cut_angles = [tube.theta1, tube.theta2]
        full = (tube.theta2 - tube.theta1) >= 2.0 * np.pi - 1e-12
    elif tube.kind == "radial_segment":
        if tube.r1 <= 0.0:
            raise HypothesisError("radial-segment tube must stay away from the origin (r1 > 0)")
        if tube.r1 - t <= 0.0:
            raise HypothesisError("tube reaches the origin: r1 <= t")
        dmax = math.asin(min(1.0, t / tube.r1)) * 1.0000001
        window_lo, window_hi = tube.theta0 - dmax, tube.theta0 + dmax
        full = False

        def ray_ivs(phi: float) -> list[tuple[float, float]]:
            return _segment_ray_intervals(phi, tube.theta0, tube.r1, tube.r2, t)

        cut_angles = [tube.theta0]
    else:
        raise ConfigError(f"unknown tube kind {tube.kind!r}")

    total = 0.0
    err_acc = 0.0
    for omega in (1.0, -1.0):

        def integrand(x: float) -> float:
            val = complex(eval_symbol(model, x, omega))
            phi = math.atan2(val.imag, val.real)
            ivs = ray_ivs(phi)
            if not ivs:
                return 0.0
            los, his = _merge_intervals(ivs)
            inv = 1.0 / abs(val) ** (1.0 / m)
            return _interval_measure(los, his, inv, m)

        if full:
            x_windows = [(0.0, 2.0 * np.pi)]
            pts: list[float] = []
        else:
            x_windows = _angular_intervals(model, window_lo, window_hi - window_lo)
            pts = []
            for theta in cut_angles:
                pts.extend(level_crossings(model, wrap_0_2pi(theta)).points.tolist())
        for lo, hi in x_windows:
            v, e = _quad_piece(integrand, lo, hi, points=pts)
            total += v
            err_acc += e
    if err_acc > max(QUAD_ABS_TOL, 1e-6 * total):
        raise QuadratureError(
            f"tube volume error estimate {err_acc:.3e} exceeds tolerance",
            achieved=err_acc,
        )
    return TubeVolumeResult(total, {tube.kind: total})


def monte_carlo_sector_volume(model: SymbolModel, sector: SectorSpec,
                              n_samples: int, seed: int,
                              chunk: int = 1_000_000) -> tuple[float, float]:
    """Monte-Carlo estimate (value, sigma) of vol p^{-1}(sector).

    Samples (x, xi) uniformly on [0, 2*pi) x [-Xi, Xi] with Xi just covering
    the sector's outer radius, counts symbol values landing inside, and
    scales by the box measure.  Deliberately independent of the quadrature
    route: membership only, no radial reduction.
    """
    sector.validate()
    xs_probe = model.grid()
    amin = float(np.min(np.abs(model.top_coeff(xs_probe))))
    _, gmax = sector.profile_range()
    xi_max = (sector.r2 * gmax / amin) ** (1.0 / model.order_m) * 1.05
    box = 2.0 * np.pi * 2.0 * xi_max
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    hits = 0
    done = 0
    while done < n_samples:
        nb = min(chunk, n_samples - done)
        x = rng.uniform(0.0, 2.0 * np.pi, nb)
        xi = rng.uniform(-xi_max, xi_max, nb)
        vals = eval_symbol(model, x, xi)
        hits += int(np.count_nonzero(sector_membership(vals, sector)))
        done += nb
    p_hat = hits / n_samples
    est = box * p_hat
    sigma = box * math.sqrt(max(p_hat * (1.0 - p_hat), 1e-300) / n_samples)
    return est, sigma
