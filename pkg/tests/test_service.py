"""HTTP service endpoints via the in-process test client."""
import math

import pytest
from fastapi.testclient import TestClient

import utilmax
from utilmax.service.app import app

client = TestClient(app)


def test_health():
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["version"] == utilmax.__version__


# --- /solve -----------------------------------------------------------------

def test_solve_empty_document_runs_baseline():
    r = client.post("/solve", json={})
    assert r.status_code == 200
    body = r.json()
    assert body["passed"]
    assert body["value_dual"] == pytest.approx(-0.6814202223120523, abs=1e-10)
    assert body["utility_family"] == "exponential"
    assert abs(body["gap"]) <= 1e-6
    assert body["constrained_value"] is None


def test_solve_trinomial_log_with_cap():
    doc = {
        "market": {"kind": "trinomial"},
        "utility": {"family": "log_shifted", "endpoint": -2.0},
        "x": 1.0,
        "c_max": 0.5,
        "loss_bound": {"kind": "constant", "value": 1.0},
    }
    r = client.post("/solve", json=doc)
    assert r.status_code == 200
    body = r.json()
    assert body["passed"]
    assert body["value_dual"] == pytest.approx(1.1339471993650247, abs=1e-8)
    assert body["constrained_value"] is not None
    assert body["constrained_value"] <= body["value_dual"] + 1e-8


def test_solve_arbitrage_maps_to_422():
    doc = {
        "market": {
            "kind": "one_period",
            "s0_vec": [1.0],
            "s1": [[1.5], [2.0]],
            "probs": [0.5, 0.5],
        },
        "utility": {"family": "exponential"},
    }
    r = client.post("/solve", json=doc)
    assert r.status_code == 422
    detail = r.json()["detail"]
    assert detail["error"] == "ArbitrageError"
    assert "arbitrage" in detail["message"].lower()


def test_solve_validation_errors():
    # typo'd field is rejected, not silently ignored
    r = client.post("/solve", json={"endowment": 1.0})
    assert r.status_code == 422
    # endowment at the domain endpoint never reaches the solver
    r = client.post(
        "/solve",
        json={"utility": {"family": "log_shifted", "endpoint": -2.0}, "x": -2.0},
    )
    assert r.status_code == 422
    r = client.post("/solve", json={"market": {"kind": "heptanomial"}})
    assert r.status_code == 422


def test_solve_linear_utility_rejected_as_solver_error():
    r = client.post("/solve", json={"utility": {"family": "linear"}})
    assert r.status_code == 422
    assert r.json()["detail"]["error"] == "StrictConcavityError"


# --- /duality-check ---------------------------------------------------------

def test_duality_check_sweep():
    r = client.post("/duality-check", json={"trials": 6, "seed": 3})
    assert r.status_code == 200
    body = r.json()
    assert body["all_passed"]
    assert len(body["rows"]) == 6
    assert [row["seed"] for row in body["rows"]] == list(range(3, 9))
    fams = {row["utility_family"] for row in body["rows"]}
    assert fams == {"exponential", "log_shifted"}
    for row in body["rows"]:
        assert row["passed"]
        assert row["membership_ok"]


def test_duality_check_is_deterministic():
    a = client.post("/duality-check", json={"trials": 3, "seed": 11}).json()
    b = client.post("/duality-check", json={"trials": 3, "seed": 11}).json()
    for ra, rb in zip(a["rows"], b["rows"]):
        assert ra["value_dual"] == rb["value_dual"]
        assert ra["lambda_star"] == rb["lambda_star"]


# --- /orlicz ----------------------------------------------------------------

def test_orlicz_norm_constant_exponential():
    r = client.post(
        "/orlicz/norm",
        json={"utility": {"family": "exponential"}, "values": [1.0, 1.0]},
    )
    assert r.status_code == 200
    body = r.json()
    assert body["luxemburg"] == pytest.approx(1.0 / math.log(2.0), rel=1e-8)
    assert body["sup_norm"] == 1.0
    assert body["equivalence_lower"] is None   # no finite endpoint


def test_orlicz_norm_equivalence_for_log():
    r = client.post(
        "/orlicz/norm",
        json={
            "utility": {"family": "log_shifted", "endpoint": -2.0},
            "values": [0.5, 1.5, 0.25, 1.0],
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["equivalence_ok"] is True
    assert body["equivalence_lower"] <= body["sup_norm"] + 1e-9
    assert body["sup_norm"] <= body["equivalence_upper"] + 1e-9


def test_orlicz_classify_tail_families():
    r = client.post(
        "/orlicz/classify",
        json={"utility": {"family": "exponential"}, "tail": "gaussian"},
    )
    assert r.status_code == 200
    assert r.json()["verdict"] == "compatible"
    r = client.post(
        "/orlicz/classify",
        json={
            "utility": {"family": "exponential", "gamma": 2.0},
            "tail": "two_sided_exponential",
            "rate": 3.0,
        },
    )
    body = r.json()
    assert body["verdict"] == "weakly_compatible"
    assert body["critical_scale"] == pytest.approx(1.5, rel=1e-9)
    r = client.post(
        "/orlicz/classify",
        json={"utility": {"family": "exponential"}, "tail": "cauchy"},
    )
    assert r.json()["verdict"] == "incompatible"


def test_orlicz_classify_needs_some_input():
    r = client.post("/orlicz/classify", json={"utility": {"family": "exponential"}})
    assert r.status_code == 422
    assert r.json()["detail"]["error"] == "InputError"


# --- /reproduce -------------------------------------------------------------

def test_reproduce_ex35():
    r = client.post("/reproduce/ex35", json={})
    assert r.status_code == 200
    body = r.json()
    assert body["scenario"] == "ex35"
    assert body["a_star_closed_form"] == pytest.approx(math.sqrt(5.0) - 1.0, rel=1e-12)
    assert body["value"] == pytest.approx(-0.5886510177363932, abs=1e-10)


def test_reproduce_ex36_defaults_leak_mass():
    r = client.post("/reproduce/ex36", json={})
    body = r.json()
    assert body["scenario"] == "ex36"
    assert body["gprime_at_1"] == pytest.approx(0.025, abs=1e-12)
    assert body["exp_moment"] == pytest.approx(0.65, abs=1e-12)
    assert body["singular_mass"] == pytest.approx(0.025 / 0.65, rel=1e-10)
    assert body["limit_value"] == pytest.approx(-0.65, abs=1e-10)


def test_reproduce_ex37_single_atom():
    r = client.post("/reproduce/ex37", json={"single_atom": True})
    body = r.json()
    assert body["p1"] == pytest.approx(8.0 / 9.0, rel=1e-12)
    assert body["tail"]["2"] == pytest.approx(1.0 / 9.0, rel=1e-12)
    assert body["singular_mass"] == 0.0
    assert abs(body["gprime_at_1"]) <= 1e-12


def test_reproduce_ex38():
    r = client.post("/reproduce/ex38", json={})
    body = r.json()
    assert body["finite_at_5"] is True
    assert body["finite_at_5.1"] is False
    assert body["psi_minus_s1"] == 1.0
    assert body["psi_subdiagonal"] == 1.0
    assert body["psi_bounded"] == 0.0
    assert body["singular_mass"] == pytest.approx(3.6416447095577507, rel=1e-9)


def test_reproduce_unknown_name():
    r = client.post("/reproduce/ex99", json={})
    assert r.status_code == 422
    assert r.json()["detail"]["error"] == "InputError"


# --- /truncation-study ------------------------------------------------------

def test_truncation_study_binomial_control():
    r = client.post(
        "/truncation-study", json={"scenario": "binomial", "levels": [1, 2]}
    )
    assert r.status_code == 200
    body = r.json()
    assert body["direction"] == "constant"
    assert body["monotone"] is True
    assert body["converging"] is None
    assert body["rows"][0]["value_dual"] == pytest.approx(
        -0.6814202223120523, abs=1e-10
    )


def test_truncation_study_ex35():
    r = client.post(
        "/truncation-study", json={"scenario": "ex35", "levels": [1, 2, 4]}
    )
    body = r.json()
    assert body["direction"] == "nonincreasing"
    assert body["converging"] is True
    assert body["analytic_value"] == pytest.approx(-0.5886510177363932, abs=1e-10)
    for row in body["rows"]:
        assert abs(row["expected_gain"]) <= 1e-10


def test_truncation_study_rejects_bad_levels():
    r = client.post("/truncation-study", json={"scenario": "binomial", "levels": []})
    assert r.status_code == 422
    r = client.post("/truncation-study", json={"scenario": "nope", "levels": [1]})
    assert r.status_code == 422
