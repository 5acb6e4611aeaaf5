import json

import pytest

from chainanchor.attacks import (
    ScenarioError,
    ThreatScenario,
    run_scenario,
)


def run(threat_id, tmp_path, seed=42, params=None):
    scenario = ThreatScenario(id=threat_id, seed=seed, params=params or {})
    return run_scenario(scenario, tmp_path / f"{threat_id}-{seed}")


# --- scenario scripts ---------------------------------------------------------


def test_unknown_threat_id_rejected():
    with pytest.raises(ScenarioError):
        ThreatScenario(id="T9")


def test_scenario_load_from_json(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"id": "T1", "seed": 7, "params": {"chain": "stellar"}}))
    scenario = ThreatScenario.load(path)
    assert scenario == ThreatScenario(id="T1", seed=7, params={"chain": "stellar"})
    path.write_text(json.dumps({"seed": 7}))
    with pytest.raises(ScenarioError):
        ThreatScenario.load(path)


def test_t1_unknown_chain_rejected(tmp_path):
    with pytest.raises(ScenarioError):
        run("T1", tmp_path, params={"chain": "dogecoin"})


# --- the four threats ---------------------------------------------------------


def test_t1_masquerade_detected(tmp_path):
    result = run("T1", tmp_path)
    assert result.detection and result.mitigation
    assert result.details["divergent_chain"] == "eos"
    assert result.details["bogus_tx"] in result.details["unmatched"]


def test_t1_targets_requested_chain(tmp_path):
    result = run("T1", tmp_path, params={"chain": "stellar"})
    assert result.detection
    assert result.details["divergent_chain"] == "stellar"


def test_t2_flood_detected_and_recovered(tmp_path):
    result = run("T2", tmp_path)
    assert result.detection and result.mitigation
    assert result.details["evicted_count"] > 0
    assert result.details["recovered_on_day"] in (1, 2)
    assert result.details["rows"] == 6


def test_t3_censorship_detected_and_recovered(tmp_path):
    result = run("T3", tmp_path)
    assert result.detection and result.mitigation
    assert result.details["dropped"] == 12  # 6 rows x 2 chains


def test_t4_counterfeit_cost_and_detection(tmp_path):
    result = run("T4", tmp_path)
    assert result.detection and result.mitigation
    assert result.details["attack_cost_usd"] >= 2_400_000
    assert result.details["rollback_depth"] == 6 * 3600 // 15
    assert result.details["rewritten_anchors"]
    assert result.details["verdicts"] == ["tampered"]


def test_null_control_is_clean(tmp_path):
    result = run("null", tmp_path, params={"days": 3})
    assert not result.detection
    assert result.mitigation
    assert result.details["detections"] == 0
    assert result.details["rows"] == 2 * 2 * 3


# --- seed robustness ----------------------------------------------------------


@pytest.mark.parametrize("threat_id", ["T1", "T2", "T3", "T4"])
def test_threats_hold_under_alternate_seed(tmp_path, threat_id):
    result = run(threat_id, tmp_path, seed=1234)
    assert result.detection and result.mitigation


def test_result_obj_round_trips_through_json(tmp_path):
    result = run("T1", tmp_path)
    obj = json.loads(json.dumps(result.to_obj()))
    assert obj["threat_id"] == "T1"
    assert obj["detection"] is True
