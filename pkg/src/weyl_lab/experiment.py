"""Dyadic counting experiments: eigenvalue counts against volume predictions.

The spectrum is scanned over dyadic annular sectors Gamma_k with radii
[2^k, 2^{k+1}) (outer boundary open, so counts add exactly across annuli).
Scaling by 2^{-k} maps Gamma_k onto the fixed template with radii [1, 2);
because the scale factor is a power of two the scaled count equals the direct
count in exact arithmetic, and the experiment asserts that identity on every
trial.  The volume prediction satisfies its own scaling identity
vol p^{-1}(Gamma_k) = 2^{k/m} vol p^{-1}(Gamma_template), checked to 1e-9.

Per annulus the matrix size is chosen so the certified window (K/4)^m covers
four times the outer radius; each trial draws a fresh potential from the
splittable seed (master, k, trial), solves at K and 2K modes, filters to the
trusted set and counts.  Reports carry per-annulus rows, cumulative series,
a fitted error-growth slope against the two reference envelopes, and the
diagnostic flags (grazing, untrusted pollution, matching contention).
Everything in a report is a deterministic function of the resolved request,
so equal seeds give byte-identical files.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .configs import config_digest, to_jsonable
from .discretization import (DiscretizedOperator, assemble_operator,
                             potential_matrix, symmetrize)
from .errors import ConfigError, HypothesisError, TrustedRadiusError
from .geometry import SectorSpec, sector_volume
from .perturbation import (DEFAULT_C0, PerturbationSpec, sample_potential,
                           trial_seed)
from .spectra import count_in_sector, eigensolve, filter_trusted, trusted_window
from .symbols import SymbolModel, check_nondegeneracy

MODES_CAP_DEFAULT = 2048
DELTA_DEFAULT = 0.05
PREDICTION_IDENTITY_TOL = 1e-9
# floor for log2 |cumulative error| when a count happens to hit the
# prediction exactly; keeps the slope fit finite
ERROR_LOG_FLOOR = 1e-3


@dataclass(frozen=True)
class DyadicPlan:
    """Annulus range, trial count and seeds for one dyadic experiment."""

    k_min: int
    k_max: int
    trials: int
    seed: int
    modes_max: int = MODES_CAP_DEFAULT
    n0: int = 1
    delta: float = DELTA_DEFAULT
    workers: int = 1

    def __post_init__(self):
        if not (0 <= self.k_min <= self.k_max <= 60):
            raise ConfigError(
                f"need 0 <= k_min <= k_max <= 60, got [{self.k_min}, {self.k_max}]"
            )
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.modes_max < 16:
            raise ConfigError(f"modes_max must be >= 16, got {self.modes_max}")
        if not (0.0 < self.delta < 0.5):
            raise ConfigError(f"delta must lie in (0, 1/2), got {self.delta}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def from_json(cls, obj: dict) -> "DyadicPlan":
        try:
            return cls(
                k_min=int(obj["k_min"]),
                k_max=int(obj["k_max"]),
                trials=int(obj["trials"]),
                seed=int(obj["seed"]),
                modes_max=int(obj.get("modes_max", MODES_CAP_DEFAULT)),
                n0=int(obj.get("n0", 1)),
                delta=float(obj.get("delta", DELTA_DEFAULT)),
                workers=int(obj.get("workers", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed plan: {exc}") from exc

    def to_json(self) -> dict:
        return {
            "k_min": self.k_min, "k_max": self.k_max, "trials": self.trials,
            "seed": self.seed, "modes_max": self.modes_max, "n0": self.n0,
            "delta": self.delta,
        }


def select_modes(k: int, order_m: int, bandwidth: int, gmax: float,
                 modes_max: int) -> int:
    """Smallest K (multiple of 16) whose certified window covers 4x the annulus.

    (K/4)^m >= 4 * 2^{k+1} * gmax; raises when the cap cannot honor it.
    """
    need = 4.0 * (4.0 * 2.0 ** (k + 1) * gmax) ** (1.0 / order_m)
    K = max(16, int(math.ceil(need / 16.0)) * 16, 2 * bandwidth)
    if K > modes_max:
        raise TrustedRadiusError(
            f"annulus k = {k} needs K = {K} modes, above the cap {modes_max}"
        )
    return K


def envelope_slopes(order_m: int, n0: int, beta: float, delta: float) -> dict:
    """Reference error-growth exponents in log2(lambda) units.

    Trivial envelope: counts can be off by the whole annulus, error ~
    lambda^{n/m}.  Theorem envelope: lambda^{(n - (1/2 - beta - delta)/(n0+1))/m}.
    """
    trivial = 1.0 / order_m
    theorem = (1.0 - (0.5 - beta - delta) / (n0 + 1.0)) / order_m
    return {"trivial": trivial, "theorem": theorem}


def _fit_series(ks: np.ndarray, max_errors: np.ndarray) -> dict:
    """Least-squares slope of log2(max error) vs log2(outer radius) = k+1."""
    x = ks + 1.0
    y = np.log2(np.maximum(max_errors, ERROR_LOG_FLOOR))
    out: dict = {"points": int(x.size)}
    if x.size >= 2:
        c = np.polyfit(x, y, 1)
        out["slope_all"] = float(c[0])
        out["intercept_all"] = float(c[1])
        half = x.size // 2
        xt, yt = x[half:], y[half:]
        if xt.size >= 2:
            ct = np.polyfit(xt, yt, 1)
            out["slope_top_half"] = float(ct[0])
            out["intercept_top_half"] = float(ct[1])
        else:
            out["slope_top_half"] = None
            out["intercept_top_half"] = None
    else:
        out.update(slope_all=None, intercept_all=None,
                   slope_top_half=None, intercept_top_half=None)
    return out


def _check_sector_preconditions(model: SymbolModel, sector: SectorSpec, n0: int) -> list[dict]:
    """Non-degeneracy at both angular boundaries (full-angle sectors have none)."""
    sector.validate()
    if not math.isclose(sector.r1, 1.0) or not math.isclose(sector.r2, 2.0):
        raise ConfigError(
            "dyadic experiments use the radii-[1,2] template sector; "
            f"got r1={sector.r1}, r2={sector.r2}"
        )
    if sector.is_full_angle:
        return []
    checks = []
    for theta in (sector.theta1, sector.theta2):
        res = check_nondegeneracy(model, theta, n0)
        checks.append(res.to_report())
        if res.verdict != "holds":
            raise HypothesisError(
                f"non-degeneracy {res.verdict} at boundary angle {theta:.6f} "
                f"with derivative budget {n0}; counts in this sector are not covered"
            )
    return checks


def _solve_trial(model: SymbolModel, pert_spec: PerturbationSpec | None,
                 base_low: DiscretizedOperator, base_high: DiscretizedOperator,
                 master_seed: int, k: int, trial: int, radius_max: float):
    """One potential draw, two resolutions, one trusted spectrum."""
    if pert_spec is None:
        low_op, high_op = base_low, base_high
    else:
        pot = sample_potential(pert_spec, trial_seed(master_seed, k, trial))
        prov = dict(base_low.provenance, potential_entropy=pot.seed_entropy)
        low_op = DiscretizedOperator(
            base_low.modes_K, base_low.matrix + potential_matrix(pot, base_low.modes_K),
            base_low.order_m, prov)
        high_op = DiscretizedOperator(
            base_high.modes_K, base_high.matrix + potential_matrix(pot, base_high.modes_K),
            base_high.order_m, dict(prov))
    low = eigensolve(low_op)
    high = eigensolve(high_op)
    return filter_trusted(low, high, radius_max=radius_max)


def run_family(model: SymbolModel, pert_spec: PerturbationSpec | None,
               sectors: list[SectorSpec], plan: DyadicPlan) -> list[dict]:
    """Shared-spectrum dyadic experiment over a family of template sectors.

    Every member sees the same trusted spectra (same draws, same solves), so
    member-to-member differences isolate the sector geometry.  Returns one
    report per member.
    """
    model.validate()
    if not sectors:
        raise ConfigError("need at least one sector")
    precondition_reports = [_check_sector_preconditions(model, sec, plan.n0)
                            for sec in sectors]
    m = model.order_m
    gmax_all = max(sec.profile_range()[1] for sec in sectors)
    deterministic = pert_spec is None
    effective_trials = 1 if deterministic else plan.trials

    # per-sector prediction template volumes (scaling identity route)
    base_vols = [sector_volume(model, sec) for sec in sectors]

    ks = list(range(plan.k_min, plan.k_max + 1))
    per_sector_annuli: list[list[dict]] = [[] for _ in sectors]
    cum_counts = [np.zeros(plan.trials) for _ in sectors]
    cum_pred = [0.0 for _ in sectors]
    cum_series: list[list[dict]] = [[] for _ in sectors]
    pred_dev_max = 0.0
    count_identity_all = True
    flags = [dict(grazing=False, untrusted=False, contention=False) for _ in sectors]

    for k in ks:
        K = select_modes(k, m, model.bandwidth, gmax_all, plan.modes_max)
        radius_max = min(2.0 * 2.0 ** (k + 1) * gmax_all,
                         trusted_window(K, m))
        base_low = symmetrize(assemble_operator(model, None, K))
        base_high = symmetrize(assemble_operator(model, None, 2 * K))

        def one(trial: int):
            return _solve_trial(model, pert_spec, base_low, base_high,
                                plan.seed, k, trial, radius_max)

        if plan.workers > 1 and effective_trials > 1:
            with ThreadPoolExecutor(max_workers=plan.workers) as ex:
                results = list(ex.map(one, range(effective_trials)))
        else:
            results = [one(t) for t in range(effective_trials)]

        scale = 2.0 ** (-k)
        for si, sec in enumerate(sectors):
            annulus = sec.scaled(2.0 ** k)
            pred_direct = sector_volume(model, annulus) / (2.0 * math.pi)
            pred_scaled = (2.0 ** (k / m)) * base_vols[si] / (2.0 * math.pi)
            dev = abs(pred_direct - pred_scaled)
            pred_dev_max = max(pred_dev_max, dev)
            if dev > PREDICTION_IDENTITY_TOL * max(1.0, pred_direct):
                raise HypothesisError(
                    f"prediction scaling identity violated at k={k}: "
                    f"direct {pred_direct!r} vs scaled {pred_scaled!r}"
                )
            rows = []
            for trial in range(plan.trials):
                res = results[min(trial, effective_trials - 1)]
                direct = count_in_sector(res, annulus, outer_open=True)
                rescaled = count_in_sector(res.scaled(scale), sec, outer_open=True)
                identity_ok = direct.count == rescaled.count
                count_identity_all = count_identity_all and identity_ok
                err = direct.count - pred_direct
                rows.append({
                    "trial": trial,
                    "count": direct.count,
                    "error": err,
                    "grazing": direct.boundary_grazing,
                    "untrusted_in_sector": direct.untrusted_in_sector,
                    "contention": res.contention,
                    "count_identity_ok": identity_ok,
                })
                cum_counts[si][trial] += direct.count
                flags[si]["grazing"] |= direct.boundary_grazing
                flags[si]["untrusted"] |= direct.untrusted_in_sector > 0
                flags[si]["contention"] |= res.contention > 0
            counts = np.array([r["count"] for r in rows], dtype=float)
            errors = counts - pred_direct
            cum_pred[si] += pred_direct
            cum_err = cum_counts[si] - cum_pred[si]
            per_sector_annuli[si].append({
                "k": k,
                "lambda_lo": 2.0 ** k,
                "lambda_hi": 2.0 ** (k + 1),
                "modes_K": K,
                "radius_max": radius_max,
                "prediction": pred_direct,
                "prediction_scaled_dev": dev,
                "rows": rows,
                "mean_count": float(np.mean(counts)),
                "mean_abs_error": float(np.mean(np.abs(errors))),
                "max_abs_error": float(np.max(np.abs(errors))),
                "rel_error_mean_abs": float(np.mean(np.abs(errors)) / pred_direct)
                if pred_direct > 0 else None,
                "rel_error_of_mean": float(abs(np.mean(counts) - pred_direct) / pred_direct)
                if pred_direct > 0 else None,
            })
            cum_series[si].append({
                "k": k,
                "lambda_hi": 2.0 ** (k + 1),
                "prediction_cum": cum_pred[si],
                "mean_count_cum": float(np.mean(cum_counts[si])),
                "max_abs_error_cum": float(np.max(np.abs(cum_err))),
                "mean_abs_error_cum": float(np.mean(np.abs(cum_err))),
            })

    beta = pert_spec.beta if pert_spec is not None else 0.0
    env = envelope_slopes(m, plan.n0, beta, plan.delta)
    reports = []
    for si, sec in enumerate(sectors):
        fit = _fit_series(np.array(ks, dtype=float),
                          np.array([c["max_abs_error_cum"] for c in cum_series[si]]))
        request = {
            "symbol": model.to_json(),
            "perturbation": None if pert_spec is None else pert_spec.to_json(),
            "sector": sec.to_json(),
            "plan": plan.to_json(),
        }
        reports.append(to_jsonable({
            "version": __version__,
            "config_digest": config_digest(request),
            "request": request,
            "seed": plan.seed,
            "deterministic_trials": deterministic,
            "constants": {"c0_default": DEFAULT_C0,
                          "prediction_identity_tol": PREDICTION_IDENTITY_TOL},
            "preconditions": precondition_reports[si],
            "envelopes": env,
            "annuli": per_sector_annuli[si],
            "cumulative": cum_series[si],
            "fit": fit,
            "identities": {
                "count_identity_all_ok": count_identity_all,
                "prediction_identity_max_dev": pred_dev_max,
            },
            "flags": {
                "boundary_grazing": flags[si]["grazing"],
                "untrusted_pollution": flags[si]["untrusted"],
                "matching_contention": flags[si]["contention"],
            },
        }))
    return reports


def dyadic_weyl_experiment(model: SymbolModel, pert_spec: PerturbationSpec | None,
                           sector: SectorSpec, plan: DyadicPlan) -> dict:
    """Single-sector dyadic experiment (see run_family)."""
    return run_family(model, pert_spec, [sector], plan)[0]


def family_sweep(model: SymbolModel, pert_spec: PerturbationSpec | None,
                 sectors: list[SectorSpec], plan: DyadicPlan) -> dict:
    """Dyadic experiment over several sectors with shared draws, plus worst cases."""
    members = run_family(model, pert_spec, sectors, plan)
    worst = {
        "slope_top_half": None,
        "largest_annulus_rel_error": None,
        "any_grazing": any(r["flags"]["boundary_grazing"] for r in members),
        "any_untrusted": any(r["flags"]["untrusted_pollution"] for r in members),
    }
    slopes = [r["fit"].get("slope_top_half") for r in members
              if r["fit"].get("slope_top_half") is not None]
    if slopes:
        worst["slope_top_half"] = max(slopes)
    rels = [r["annuli"][-1]["rel_error_mean_abs"] for r in members
            if r["annuli"] and r["annuli"][-1]["rel_error_mean_abs"] is not None]
    if rels:
        worst["largest_annulus_rel_error"] = max(rels)
    return {"members": members, "worst": to_jsonable(worst)}


def weyl_series_rows(report: dict) -> list[dict]:
    """Long-form rows (k, trial, count, prediction, error) for the series CSV."""
    rows = []
    for ann in report["annuli"]:
        for r in ann["rows"]:
            rows.append({
                "k": ann["k"],
                "trial": r["trial"],
                "count": r["count"],
                "prediction": ann["prediction"],
                "error": r["error"],
            })
    return rows


def weyl_plot_rows(report: dict) -> list[dict]:
    """Per-annulus log2 series with both reference envelopes anchored at the first point."""
    cum = report["cumulative"]
    env = report["envelopes"]
    if not cum:
        return []
    x0 = math.log2(cum[0]["lambda_hi"])
    y0 = math.log2(max(cum[0]["max_abs_error_cum"], ERROR_LOG_FLOOR))
    rows = []
    for c in cum:
        x = math.log2(c["lambda_hi"])
        rows.append({
            "log2_lambda": x,
            "log2_max_cum_error": math.log2(max(c["max_abs_error_cum"], ERROR_LOG_FLOOR)),
            "trivial_envelope": y0 + env["trivial"] * (x - x0),
            "theorem_envelope": y0 + env["theorem"] * (x - x0),
        })
    return rows
