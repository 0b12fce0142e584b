"""Dyadic annulus experiments: mode budgeting, scaling identities, report shape."""

import json
import math

import numpy as np
import pytest

from weyl_lab.errors import ConfigError, HypothesisError, TrustedRadiusError
from weyl_lab.experiment import (
    DyadicPlan,
    dyadic_weyl_experiment,
    envelope_slopes,
    family_sweep,
    select_modes,
    weyl_plot_rows,
    weyl_series_rows,
)
from weyl_lab.geometry import SectorSpec
from weyl_lab.perturbation import PerturbationSpec
from weyl_lab.symbols import SymbolModel

TWO_PI = 2.0 * math.pi
LAPLACIAN = SymbolModel.from_json({"m": 2, "coeffs": [{"alpha": 2, "cos": [1.0]}]})
A05 = SymbolModel.from_json(
    {"m": 2, "coeffs": [{"alpha": 2, "cos": [1.0, 0.0], "cos_imag": [0.0, 0.5]}]}
)
PERT = PerturbationSpec(rho=2.0, s=0.75, eps=0.1, beta=0.0, cutoff_J=65)
FULL = SectorSpec(0.0, TWO_PI, 1.0, 2.0)
RANGE_COVER = SectorSpec(-0.5, 0.5, 1.0, 2.0)
INTERIOR = SectorSpec(-0.4, 0.4, 1.0, 2.0)


def test_plan_validation():
    DyadicPlan(2, 4, 1, 0)
    with pytest.raises(ConfigError):
        DyadicPlan(4, 2, 1, 0)  # empty range
    with pytest.raises(ConfigError):
        DyadicPlan(2, 4, 0, 0)  # no trials
    with pytest.raises(ConfigError):
        DyadicPlan(2, 4, 1, 0, modes_max=8)
    with pytest.raises(ConfigError):
        DyadicPlan(2, 4, 1, 0, delta=0.5)
    with pytest.raises(ConfigError):
        DyadicPlan(2, 4, 1, 0, workers=0)


def test_plan_json_roundtrip_excludes_workers():
    plan = DyadicPlan(2, 6, 5, 99, modes_max=512, n0=2, delta=0.1, workers=4)
    blob = plan.to_json()
    assert "workers" not in blob  # reports stay identical across worker counts
    again = DyadicPlan.from_json(blob)
    assert again == DyadicPlan(2, 6, 5, 99, modes_max=512, n0=2, delta=0.1, workers=1)
    with pytest.raises(ConfigError):
        DyadicPlan.from_json({"k_min": 2, "k_max": 4})


def test_select_modes_budget():
    # (K/4)^2 >= 4 * 2^{k+1}: k = 4 needs K >= 4 sqrt(128) = 45.3 -> 48
    assert select_modes(4, 2, 1, 1.0, 2048) == 48
    assert select_modes(10, 2, 1, 1.0, 2048) == 368
    for k in range(0, 11):
        K = select_modes(k, 2, 1, 1.0, 2048)
        assert K % 16 == 0
        assert (K / 4.0) ** 2 >= 4.0 * 2.0 ** (k + 1)
    # wide symbol bands force at least 2x the bandwidth
    assert select_modes(0, 2, 40, 1.0, 2048) == 80
    with pytest.raises(TrustedRadiusError):
        select_modes(10, 2, 1, 1.0, 256)


def test_envelope_slopes_closed_form():
    env = envelope_slopes(2, 1, 0.0, 0.05)
    assert env["trivial"] == pytest.approx(0.5, rel=1e-14)
    assert env["theorem"] == pytest.approx(0.3875, rel=1e-14)
    assert envelope_slopes(2, 2, 0.0, 0.05)["theorem"] == pytest.approx(0.425, rel=1e-14)


def test_deterministic_laplacian_counts():
    # eigenvalues k^2: annuli [4,8) -> {4,4}, [8,16) -> {9,9}, [16,32) -> {16,16,25,25}
    plan = DyadicPlan(2, 4, 3, 0, modes_max=256)
    report = dyadic_weyl_experiment(LAPLACIAN, None, FULL, plan)
    assert report["deterministic_trials"] is True
    counts = [ann["mean_count"] for ann in report["annuli"]]
    assert counts == [2.0, 2.0, 4.0]
    for ann, expected_pred in zip(
        report["annuli"],
        [2 * (math.sqrt(8) - 2), 2 * (4 - math.sqrt(8)), 2 * (math.sqrt(32) - 4)],
    ):
        assert ann["prediction"] == pytest.approx(expected_pred, rel=1e-12)
        # a deterministic operator repeats the same count across trials
        assert len(ann["rows"]) == 3
        assert len({r["count"] for r in ann["rows"]}) == 1
        assert all(r["count_identity_ok"] for r in ann["rows"])
    assert report["identities"]["count_identity_all_ok"]
    assert report["identities"]["prediction_identity_max_dev"] <= 1e-9
    # full-angle sector has no angular boundary to check
    assert report["preconditions"] == []


def test_report_shape_and_cumulative_accounting():
    plan = DyadicPlan(2, 4, 2, 7, modes_max=256)
    report = dyadic_weyl_experiment(A05, PERT, RANGE_COVER, plan)
    assert set(report["flags"]) == {
        "boundary_grazing", "untrusted_pollution", "matching_contention"
    }
    assert report["fit"]["points"] == 3
    assert {"slope_all", "intercept_all", "slope_top_half",
            "intercept_top_half"} <= set(report["fit"])
    row_keys = {"trial", "count", "error", "grazing", "untrusted_in_sector",
                "contention", "count_identity_ok"}
    pred_cum = 0.0
    for ann in report["annuli"]:
        assert set(ann["rows"][0]) == row_keys
        assert ann["lambda_hi"] == 2 * ann["lambda_lo"]
        counts = [r["count"] for r in ann["rows"]]
        assert ann["mean_count"] == pytest.approx(np.mean(counts))
        assert ann["max_abs_error"] == pytest.approx(
            max(abs(c - ann["prediction"]) for c in counts)
        )
        pred_cum += ann["prediction"]
    # cumulative predictions accumulate annulus by annulus
    assert report["cumulative"][-1]["prediction_cum"] == pytest.approx(pred_cum)
    ks = [c["k"] for c in report["cumulative"]]
    assert ks == [2, 3, 4]
    # report is JSON-serializable as produced
    json.dumps(report)


def test_equal_seeds_equal_reports_across_workers():
    plan1 = DyadicPlan(2, 3, 2, 5, modes_max=256, workers=1)
    plan2 = DyadicPlan(2, 3, 2, 5, modes_max=256, workers=2)
    r1 = dyadic_weyl_experiment(A05, PERT, RANGE_COVER, plan1)
    r2 = dyadic_weyl_experiment(A05, PERT, RANGE_COVER, plan2)
    assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)


def test_seed_is_part_of_report_identity():
    plan1 = DyadicPlan(2, 3, 2, 5, modes_max=256)
    plan2 = DyadicPlan(2, 3, 2, 6, modes_max=256)
    r1 = dyadic_weyl_experiment(A05, PERT, RANGE_COVER, plan1)
    r2 = dyadic_weyl_experiment(A05, PERT, RANGE_COVER, plan2)
    assert r1["seed"] == 5 and r2["seed"] == 6
    assert r1["config_digest"] != r2["config_digest"]
    r1_again = dyadic_weyl_experiment(A05, PERT, RANGE_COVER, plan1)
    assert r1_again["config_digest"] == r1["config_digest"]


def test_angular_boundary_preconditions():
    plan = DyadicPlan(2, 2, 1, 0, modes_max=256)
    # interior boundary angles cross the argument transversally: allowed
    report = dyadic_weyl_experiment(A05, PERT, INTERIOR, plan)
    assert len(report["preconditions"]) == 2
    assert all(p["verdict"] == "holds" for p in report["preconditions"])
    # the argument's extreme value is touched tangentially: one derivative
    # is not enough there
    touch = SectorSpec(-math.atan(0.5), math.atan(0.5), 1.0, 2.0)
    with pytest.raises(HypothesisError):
        dyadic_weyl_experiment(A05, PERT, touch, plan)
    # a second derivative certifies the same sector
    plan_n2 = DyadicPlan(2, 2, 1, 0, modes_max=256, n0=2)
    report2 = dyadic_weyl_experiment(A05, PERT, touch, plan_n2)
    assert all(p["verdict"] == "holds" for p in report2["preconditions"])


def test_template_radii_enforced():
    plan = DyadicPlan(2, 2, 1, 0, modes_max=256)
    with pytest.raises(ConfigError):
        dyadic_weyl_experiment(LAPLACIAN, None, SectorSpec(0.0, TWO_PI, 1.0, 2.5), plan)


def test_series_and_plot_rows():
    plan = DyadicPlan(2, 4, 2, 7, modes_max=256)
    report = dyadic_weyl_experiment(A05, PERT, RANGE_COVER, plan)
    series = weyl_series_rows(report)
    assert len(series) == 3 * 2  # annuli x trials
    assert set(series[0]) == {"k", "trial", "count", "prediction", "error"}
    for row in series:
        assert row["error"] == pytest.approx(row["count"] - row["prediction"])

    plot = weyl_plot_rows(report)
    assert len(plot) == 3
    assert plot[0]["log2_lambda"] == pytest.approx(3.0)  # log2 of first lambda_hi = 8
    # both envelopes are anchored at the first observed point
    assert plot[0]["trivial_envelope"] == pytest.approx(plot[0]["log2_max_cum_error"])
    assert plot[0]["theorem_envelope"] == pytest.approx(plot[0]["log2_max_cum_error"])
    env = report["envelopes"]
    dx = plot[1]["log2_lambda"] - plot[0]["log2_lambda"]
    assert plot[1]["trivial_envelope"] - plot[0]["trivial_envelope"] == pytest.approx(
        env["trivial"] * dx
    )
    assert plot[1]["theorem_envelope"] - plot[0]["theorem_envelope"] == pytest.approx(
        env["theorem"] * dx
    )


def test_family_sweep_shared_draws_and_worst():
    plan = DyadicPlan(2, 4, 2, 7, modes_max=256)
    sweep = family_sweep(A05, PERT, [RANGE_COVER, INTERIOR], plan)
    members = sweep["members"]
    assert len(members) == 2
    # same draws: the wider sector can never count fewer eigenvalues
    for ann_wide, ann_int in zip(members[0]["annuli"], members[1]["annuli"]):
        for rw, ri in zip(ann_wide["rows"], ann_int["rows"]):
            assert rw["count"] >= ri["count"]
    slopes = [m["fit"]["slope_top_half"] for m in members]
    assert sweep["worst"]["slope_top_half"] == pytest.approx(max(slopes))
    rels = [m["annuli"][-1]["rel_error_mean_abs"] for m in members]
    assert sweep["worst"]["largest_annulus_rel_error"] == pytest.approx(max(rels))
    assert isinstance(sweep["worst"]["any_grazing"], bool)


def test_sector_list_required():
    with pytest.raises(ConfigError):
        family_sweep(LAPLACIAN, None, [], DyadicPlan(2, 2, 1, 0))
