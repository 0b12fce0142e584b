"""Certified spectra: dense eigensolves cross-validated by resolution doubling.

A Galerkin eigenvalue is only meaningful where the truncation has converged,
so every spectrum is computed twice, at K and 2K modes, and eigenvalues are
trusted only when the two resolutions agree within a relative matching
tolerance and lie inside the trusted window Lambda(K) = (K/4)^m.  Matching is
greedy nearest-neighbour with consumption: ambiguous matches near clustered
eigenvalues are excluded from the trusted set and reported as contention
rather than silently resolved.  Counting in a plane sector then uses only
trusted eigenvalues, refuses sectors that reach beyond the certified radius,
and flags counts that graze the sector boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, EigensolveError, TrustedRadiusError
from .discretization import DiscretizedOperator
from .geometry import SectorSpec, boundary_distance, sector_membership

# Relative agreement required between the two resolutions.
MATCH_TOL_REL = 1e-6
# Boundary-grazing flag distance, relative to 1 + |eigenvalue|.
GRAZING_TOL = 1e-9


def trusted_window(modes_K: int, order_m: int) -> float:
    """Default certified radius Lambda(K) = (K/4)^m."""
    return (modes_K / 4.0) ** order_m


@dataclass
class RawSpectrum:
    """One dense eigensolve: sorted eigenvalues plus backward-error residuals."""

    eigenvalues: np.ndarray
    residuals: np.ndarray
    modes_K: int
    order_m: int
    provenance: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0


def eigensolve(op: DiscretizedOperator) -> RawSpectrum:
    """All eigenvalues of the dense matrix, with ||A v - lambda v|| / ||A||_F per pair.

    Eigenvalues are sorted by (real, imag) so equal inputs give byte-equal
    outputs regardless of LAPACK's internal ordering.
    """
    from scipy.linalg import eig

    A = op.matrix
    try:
        vals, vecs = eig(A, right=True)
    except np.linalg.LinAlgError as exc:
        raise EigensolveError(
            f"dense eigensolve failed at K = {op.modes_K}: {exc}"
        ) from exc
    scale = np.linalg.norm(A, ord="fro")
    resid = np.linalg.norm(A @ vecs - vecs * vals[None, :], axis=0)
    vecs_norm = np.linalg.norm(vecs, axis=0)
    resid = resid / (scale * np.where(vecs_norm == 0.0, 1.0, vecs_norm))
    order = np.lexsort((vals.imag, vals.real))
    return RawSpectrum(
        eigenvalues=vals[order],
        residuals=resid[order],
        modes_K=op.modes_K,
        order_m=op.order_m,
        provenance=dict(op.provenance),
    )


@dataclass
class SpectrumResult:
    """Low-resolution spectrum with its cross-validation verdicts.

    ``eigenvalues`` is the K-resolution list; ``trusted_mask`` marks entries
    matched at 2K inside the certified radius; ``partners`` holds the matched
    2K values (NaN when unmatched).  ``contention`` counts eigenvalues whose
    only match candidates were consumed by closer pairs.
    """

    eigenvalues: np.ndarray
    trusted_mask: np.ndarray
    partners: np.ndarray
    modes_low: int
    modes_high: int
    order_m: int
    radius_max: float
    window: float
    contention: int
    residual_low_max: float
    residual_high_max: float
    provenance: dict = field(default_factory=dict)

    @property
    def trusted(self) -> np.ndarray:
        return self.eigenvalues[self.trusted_mask]

    def untrusted_within(self, radius: float) -> int:
        inside = np.abs(self.eigenvalues) <= radius
        return int(np.count_nonzero(inside & ~self.trusted_mask))

    def scaled(self, factor: float) -> "SpectrumResult":
        """Spectrum of the operator scaled by ``factor`` (exact for powers of two)."""
        return SpectrumResult(
            eigenvalues=self.eigenvalues * factor,
            trusted_mask=self.trusted_mask.copy(),
            partners=self.partners * factor,
            modes_low=self.modes_low,
            modes_high=self.modes_high,
            order_m=self.order_m,
            radius_max=self.radius_max * abs(factor),
            window=self.window * abs(factor),
            contention=self.contention,
            residual_low_max=self.residual_low_max,
            residual_high_max=self.residual_high_max,
            provenance=dict(self.provenance),
        )


def _compatible(low: RawSpectrum, high: RawSpectrum) -> None:
    if high.modes_K != 2 * low.modes_K:
        raise ConfigError(
            f"resolution doubling needs 2K = {2 * low.modes_K} modes, got {high.modes_K}"
        )
    for key in ("symbol_digest", "potential_entropy", "symmetrized"):
        if low.provenance.get(key) != high.provenance.get(key):
            raise ConfigError(
                f"cannot cross-validate spectra of different operators ({key} differs)"
            )


def filter_trusted(low: RawSpectrum, high: RawSpectrum,
                   radius_max: float | None = None,
                   window: float | None = None) -> SpectrumResult:
    """Greedy global matching of the K spectrum against the 2K spectrum.

    Matching is global (all pairs within tol considered, closest first), and
    the radius restriction is applied afterwards, so the trusted set at a
    smaller radius is always a subset of the trusted set at a larger one.
    ``window`` overrides the default Lambda(K) certified radius for callers
    that can justify a wider one (exactly diagonal operators); ``radius_max``
    beyond the window raises.
    """
    _compatible(low, high)
    win = trusted_window(low.modes_K, low.order_m) if window is None else float(window)
    rad = win if radius_max is None else float(radius_max)
    if rad > win * (1.0 + 1e-12):
        raise TrustedRadiusError(
            f"requested radius {rad:.6g} exceeds the certified window {win:.6g}"
        )

    lo_vals = low.eigenvalues
    hi_vals = high.eigenvalues
    n_lo = lo_vals.size
    matched_partner = np.full(n_lo, np.nan + 1j * np.nan, dtype=complex)
    matched = np.zeros(n_lo, dtype=bool)
    had_candidate = np.zeros(n_lo, dtype=bool)

    if n_lo and hi_vals.size:
        tree = cKDTree(np.column_stack([hi_vals.real, hi_vals.imag]))
        tol = MATCH_TOL_REL * (1.0 + np.abs(lo_vals))
        k_query = min(4, hi_vals.size)
        dists, idxs = tree.query(np.column_stack([lo_vals.real, lo_vals.imag]),
                                 k=k_query)
        dists = np.atleast_2d(dists.reshape(n_lo, -1))
        idxs = np.atleast_2d(idxs.reshape(n_lo, -1))
        pairs = []
        for i in range(n_lo):
            for d, j in zip(dists[i], idxs[i]):
                if d <= tol[i]:
                    had_candidate[i] = True
                    pairs.append((float(d), i, int(j)))
        pairs.sort()
        hi_used = np.zeros(hi_vals.size, dtype=bool)
        for d, i, j in pairs:
            if matched[i] or hi_used[j]:
                continue
            matched[i] = True
            hi_used[j] = True
            matched_partner[i] = hi_vals[j]

    contention = int(np.count_nonzero(had_candidate & ~matched))
    trusted = matched & (np.abs(lo_vals) <= rad)
    return SpectrumResult(
        eigenvalues=lo_vals.copy(),
        trusted_mask=trusted,
        partners=matched_partner,
        modes_low=low.modes_K,
        modes_high=high.modes_K,
        order_m=low.order_m,
        radius_max=rad,
        window=win,
        contention=contention,
        residual_low_max=low.max_residual,
        residual_high_max=high.max_residual,
        provenance=dict(low.provenance),
    )


@dataclass
class CountResult:
    """Eigenvalue count in a sector, with its diagnostic flags."""

    count: int
    boundary_grazing: bool
    untrusted_in_sector: int
    member_mask: np.ndarray

    def __int__(self) -> int:
        return self.count


def count_in_sector(result: SpectrumResult, sector: SectorSpec,
                    outer_open: bool = False) -> CountResult:
    """Number of trusted eigenvalues inside the sector.

    Raises TrustedRadiusError when the sector's outer reach exceeds the
    certified radius (such a count would silently miss eigenvalues).  Counts
    within GRAZING_TOL * (1 + |z|) of the boundary set the grazing flag; they
    are included or excluded exactly as the closed/half-open convention says,
    but the flag warns that rounding could move them.
    """
    _, gmax = sector.profile_range()
    reach = sector.r2 * gmax
    if reach > result.radius_max * (1.0 + 1e-12):
        raise TrustedRadiusError(
            f"sector reaches radius {reach:.6g} beyond certified {result.radius_max:.6g}"
        )
    vals = result.eigenvalues
    member = sector_membership(vals, sector, outer_open=outer_open)
    member = np.asarray(member, dtype=bool)
    counted = member & result.trusted_mask
    near = np.zeros(vals.size, dtype=bool)
    if vals.size:
        dist = boundary_distance(vals, sector)
        near = dist <= GRAZING_TOL * (1.0 + np.abs(vals))
    grazing = bool(np.any(near & result.trusted_mask))
    untrusted_in = int(np.count_nonzero(member & ~result.trusted_mask))
    return CountResult(
        count=int(np.count_nonzero(counted)),
        boundary_grazing=grazing,
        untrusted_in_sector=untrusted_in,
        member_mask=counted,
    )
