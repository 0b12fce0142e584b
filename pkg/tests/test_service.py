"""HTTP service endpoints: core parity, defaults, and error-category mapping."""

import math
import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

import weyl_lab
from weyl_lab.experiment import DyadicPlan, dyadic_weyl_experiment
from weyl_lab.geometry import SectorSpec
from weyl_lab.service import create_app
from weyl_lab.symbols import SymbolModel

TWO_PI = 2.0 * math.pi
LAPLACIAN = {"m": 2, "coeffs": [{"alpha": 2, "cos": [1.0]}]}
A05 = {"m": 2, "coeffs": [{"alpha": 2, "cos": [1.0, 0.0], "cos_imag": [0.0, 0.5]}]}
PERT = {"rho": 2.0, "s": 0.75, "eps": 0.1, "beta": 0.0, "cutoff_J": 9}
FULL_DISK = {"theta1": 0.0, "theta2": TWO_PI, "r1": 0.0, "r2": 1.0}


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app(), raise_server_exceptions=False) as c:
        yield c


def test_health(client):
    r = client.get("/v1/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["version"] == weyl_lab.__version__


def test_symbol_check_verdicts(client):
    r = client.post("/v1/symbol/check",
                    json={"symbol": A05, "theta0": 0.0, "n0": 1})
    assert r.status_code == 200
    assert r.json()["verdict"] == "holds"
    assert r.json()["holds"] is True

    # constant-coefficient symbol: the argument never varies, so its level
    # set is the whole circle and no derivative budget can help
    r = client.post("/v1/symbol/check",
                    json={"symbol": LAPLACIAN, "theta0": 0.0, "n0": 4})
    assert r.json()["verdict"] == "fails"
    assert r.json()["report"]["covers_circle"] is True

    touch = {"symbol": A05, "theta0": math.atan(0.5), "n0": 1}
    r = client.post("/v1/symbol/check", json=touch)
    assert r.json()["verdict"] == "fails"
    r = client.post("/v1/symbol/check", json={**touch, "n0": 2})
    assert r.json()["verdict"] == "holds"


def test_volume_closed_form_and_mc(client):
    r = client.post("/v1/volume/sector",
                    json={"symbol": LAPLACIAN, "sector": FULL_DISK,
                          "mc_samples": 20000, "seed": 3})
    assert r.status_code == 200
    body = r.json()
    assert body["volume"] == pytest.approx(4.0 * math.pi, rel=1e-9)
    assert body["prediction"] == pytest.approx(2.0, rel=1e-9)
    assert abs(body["mc_volume"] - body["volume"]) <= 4.0 * body["mc_sigma"]


def test_sample_rows_and_determinism(client):
    req = {"pert": PERT, "seed": 11}
    r1 = client.post("/v1/potential/sample", json=req)
    r2 = client.post("/v1/potential/sample", json=req)
    assert r1.status_code == 200
    body = r1.json()
    assert len(body["rows"]) == 9
    assert body["cutoff_J"] == 9
    assert body["seed"] == 11
    assert body["hs_norm"] > 0
    assert r1.json() == r2.json()
    r3 = client.post("/v1/potential/sample", json={"pert": PERT, "seed": 12})
    assert r3.json()["rows"] != body["rows"]


def test_spectrum_matches_core(client):
    r = client.post("/v1/spectrum/solve",
                    json={"symbol": LAPLACIAN, "modes": 16,
                          "sector": {"theta1": 0.0, "theta2": TWO_PI,
                                     "r1": 0.5, "r2": 9.0}})
    assert r.status_code == 200
    body = r.json()
    assert body["modes_K"] == 16
    assert len(body["eigenvalues"]) == 33
    assert body["n_trusted"] == 9
    assert body["radius_max"] == 16.0
    assert body["contention"] == 0
    block = body["sector_count"]
    assert block["count"] == 6  # 1, 1, 4, 4 and the grazing pair at 9
    assert block["boundary_grazing"] is True
    # prediction for xi^2 over the full-angle [0.5, 9] sector
    assert block["prediction"] == pytest.approx(2.0 * (3.0 - math.sqrt(0.5)), rel=1e-9)
    trusted_vals = sorted(e["re"] for e in body["eigenvalues"] if e["trusted"])
    assert trusted_vals == pytest.approx([0, 1, 1, 4, 4, 9, 9, 16, 16], abs=1e-9)


def test_weyl_endpoint_matches_core(client):
    plan = {"k_min": 2, "k_max": 4, "trials": 1, "seed": 0, "modes_max": 256}
    sector = {"theta1": 0.0, "theta2": TWO_PI, "r1": 1.0, "r2": 2.0}
    r = client.post("/v1/experiment/weyl",
                    json={"symbol": LAPLACIAN, "sector": sector, "plan": plan})
    assert r.status_code == 200
    body = r.json()
    direct = dyadic_weyl_experiment(
        SymbolModel.from_json(LAPLACIAN), None,
        SectorSpec(0.0, TWO_PI, 1.0, 2.0), DyadicPlan(2, 4, 1, 0, modes_max=256),
    )
    assert body["report"]["config_digest"] == direct["config_digest"]
    assert [a["mean_count"] for a in body["report"]["annuli"]] == \
        [a["mean_count"] for a in direct["annuli"]]
    assert body["fit"] == direct["fit"]
    assert body["largest_annulus_rel_error"] == pytest.approx(
        direct["annuli"][-1]["rel_error_mean_abs"]
    )


def test_family_sweep_endpoint(client):
    plan = {"k_min": 2, "k_max": 3, "trials": 1, "seed": 0, "modes_max": 256}
    sectors = [
        {"theta1": -0.5, "theta2": 0.5, "r1": 1.0, "r2": 2.0},
        {"theta1": -0.4, "theta2": 0.4, "r1": 1.0, "r2": 2.0},
    ]
    r = client.post("/v1/experiment/family-sweep",
                    json={"symbol": A05, "pert": PERT, "sectors": sectors,
                          "plan": plan})
    assert r.status_code == 200
    body = r.json()
    assert len(body["members"]) == 2
    assert "slope_top_half" in body["worst"]


def test_tailbound_calibrating_branch(client):
    r = client.post("/v1/experiment/tailbound", json={"trials": 2000, "seed": 7})
    assert r.status_code == 200
    body = r.json()
    assert body["calibrated"] is True
    assert body["c0"] == 0.25
    assert body["all_dominated"] is True
    assert len(body["table"]) == 9
    single = body["single_gaussian"]
    assert single["closed_form"] == pytest.approx(math.exp(-2.0), rel=1e-12)
    assert single["within_3sigma"] is True


def test_tailbound_fixed_c0_branch(client):
    r = client.post("/v1/experiment/tailbound",
                    json={"trials": 2000, "seed": 7, "c0": 1.0})
    body = r.json()
    assert body["calibrated"] is False
    assert body["c0"] == 1.0
    assert body["all_dominated"] is True
    assert len(body["table"]) == 9
    for row in body["table"]:
        assert row["empirical"] <= row["bound_at_calibrated"]


def test_sc1_endpoint(client):
    r = client.post("/v1/experiment/sc1",
                    json={"pert": PERT, "m": 2, "h_list": [0.9, 0.5],
                          "trials": 1500, "seed": 13})
    assert r.status_code == 200
    body = r.json()
    assert len(body["rows"]) == 2
    assert body["monotone"] is True
    assert body["report"]["m_order"] == 2


def test_calibrate_endpoint(client):
    r = client.post("/v1/calibrate/c0", json={"trials": 1500, "seed": 7})
    assert r.status_code == 200
    body = r.json()
    assert body["calibrated"] is True
    assert body["c0"] == 0.25
    assert body["default_c0"] == 1.0
    assert len(body["table"]) == 9


def test_validation_error_maps_to_400_config(client):
    r = client.post("/v1/volume/sector", json={"symbol": LAPLACIAN})
    assert r.status_code == 400
    err = r.json()["error"]
    assert err["category"] == "config"
    assert err["message"]
    # unknown fields are rejected, not silently dropped
    bad = dict(LAPLACIAN, typo_field=1)
    r = client.post("/v1/volume/sector", json={"symbol": bad, "sector": FULL_DISK})
    assert r.status_code == 400


def test_core_config_error_maps_to_400(client):
    bad_pert = {"rho": 1.0, "s": 0.75, "eps": 0.1}  # outside the corridor
    r = client.post("/v1/potential/sample", json={"pert": bad_pert, "seed": 0})
    assert r.status_code == 400
    assert r.json()["error"]["category"] == "config"


def test_hypothesis_error_maps_to_422(client):
    non_elliptic = {"m": 2, "coeffs": [{"alpha": 2, "cos": [1.0, 1.0]}]}
    r = client.post("/v1/volume/sector",
                    json={"symbol": non_elliptic, "sector": FULL_DISK})
    assert r.status_code == 422
    assert r.json()["error"]["category"] == "hypothesis"


def test_trusted_radius_maps_to_422(client):
    r = client.post("/v1/spectrum/solve",
                    json={"symbol": LAPLACIAN, "modes": 16,
                          "sector": {"theta1": 0.0, "theta2": TWO_PI,
                                     "r1": 0.5, "r2": 17.0}})
    assert r.status_code == 422
    assert r.json()["error"]["category"] == "hypothesis"


def test_weyl_precondition_failure_maps_to_422(client):
    plan = {"k_min": 2, "k_max": 2, "trials": 1, "seed": 0, "modes_max": 256}
    touch = {"theta1": -math.atan(0.5), "theta2": math.atan(0.5),
             "r1": 1.0, "r2": 2.0}
    r = client.post("/v1/experiment/weyl",
                    json={"symbol": A05, "pert": PERT, "sector": touch,
                          "plan": plan})
    assert r.status_code == 422
    assert r.json()["error"]["category"] == "hypothesis"
