import json
from decimal import Decimal

import pytest

from chainanchor.costmodel import (
    APPROACHES,
    CostModelError,
    CostScenario,
    UnitCostTable,
    cost_report,
    default_scenario,
    format_report_table,
    report_json_obj,
    scenario_cost,
)


# --- inputs -------------------------------------------------------------------


def test_default_scenario_shape():
    s = default_scenario()
    assert (s.boats, s.events_per_boat_per_day, s.days) == (1000, 10, 365)
    assert s.total_tx == 3_650_000
    assert s.anchors_per_day == 2


def test_invalid_inputs_rejected():
    with pytest.raises(CostModelError):
        CostScenario(boats=0, events_per_boat_per_day=1, days=1)
    with pytest.raises(CostModelError):
        UnitCostTable(eos_per_tx=Decimal("-1"))
    with pytest.raises(CostModelError):
        scenario_cost(default_scenario(), UnitCostTable(), "mainframe")


def test_from_obj_round_trip():
    table = UnitCostTable.from_obj({"eos_per_tx": "0.001", "eth_func_call": 0.01})
    assert table.eos_per_tx == Decimal("0.001")
    assert table.eth_func_call == Decimal("0.01")
    assert table.stellar_per_tx == Decimal("0.000054")  # untouched default
    s = CostScenario.from_obj({"boats": 3, "events_per_boat_per_day": 4, "days": 5})
    assert s.total_tx == 60


# --- reference totals, exact to the cent --------------------------------------


def test_reference_totals():
    report = cost_report(default_scenario())
    totals = {a: report["approaches"][a]["total"] for a in APPROACHES}
    assert totals["multichain"] == Decimal("443.11")
    assert totals["eth_func_call"] == Decimal("13140.00")
    assert totals["eth_new_contract"] == Decimal("69350.00")
    assert report["cheapest"] == "multichain"
    assert report["savings_ratio_vs_func_call"] == Decimal("29.7")


def test_multichain_itemization():
    breakdown = scenario_cost(default_scenario(), UnitCostTable(), "multichain")
    items = breakdown["items"]
    assert items["eos_tx"] == Decimal("3650000") * Decimal("0.0000636")
    assert items["stellar_tx"] == Decimal("3650000") * Decimal("0.000054")
    assert items["ethereum_anchors"] == 2 * 365 * Decimal("0.019")
    assert breakdown["total"] == sum(items.values()).quantize(Decimal("0.01"))


def test_func_call_deployment_is_a_separate_line_item():
    breakdown = scenario_cost(default_scenario(), UnitCostTable(), "eth_func_call")
    assert breakdown["items"]["contract_deployment_one_time"] == Decimal("0.019")
    assert breakdown["total"] == breakdown["items"]["function_calls"].quantize(Decimal("0.01"))


def test_headline_eos_rate_scales_by_ten():
    table = UnitCostTable(eos_per_tx=UnitCostTable().eos_per_tx_headline)
    breakdown = scenario_cost(default_scenario(), table, "multichain")
    assert breakdown["items"]["eos_tx"] == Decimal("2299.50")


def test_rate_discrepancy_note_present():
    report = cost_report(default_scenario())
    assert any("0.0000636" in note and "0.00063" in note for note in report["notes"])
    assert any("stake" in note for note in report["notes"])


# --- oracle: float recomputation ----------------------------------------------


def test_totals_against_float_oracle():
    s = CostScenario(boats=17, events_per_boat_per_day=3, days=29, first_level_chains=2)
    u = UnitCostTable()
    report = cost_report(s, u)
    tx = 17 * 3 * 29
    expected = {
        "multichain": tx * 0.0000636 + tx * 0.000054 + 2 * 29 * 0.019,
        "eth_func_call": tx * 0.0036,
        "eth_new_contract": tx * 0.019,
    }
    for approach, value in expected.items():
        got = float(report["approaches"][approach]["total"])
        assert got == pytest.approx(value, abs=0.005)


# --- rendering ----------------------------------------------------------------


def test_json_obj_is_serializable_and_stringly():
    obj = report_json_obj(cost_report(default_scenario()))
    text = json.dumps(obj)
    parsed = json.loads(text)
    assert parsed["approaches"]["multichain"]["total"] == "443.11"
    assert parsed["savings_ratio_vs_func_call"] == "29.7"


def test_table_rendering():
    text = format_report_table(cost_report(default_scenario()))
    assert "3,650,000" in text
    assert "443.11" in text
    assert "13,140.00" in text
    assert "69,350.00" in text
    assert "<- cheapest" in text
    assert "29.7x" in text
