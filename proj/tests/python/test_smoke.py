import math

import pytest

import loghier


def test_parse_line():
    rec = loghier.parse_line('{"ts":"2021-01-04T00:00:01Z","host":"sw-1","msg":"link down"}')
    assert rec["device"] == "sw-1"
    assert rec["message"] == "link down"
    assert rec["event_time"].startswith("2021-01-04T00:00:01")
    with pytest.raises(ValueError):
        loghier.parse_line("not a record")


def test_template_miner():
    m = loghier.TemplateMiner()
    assert m.add_message("login failed for user alice") == (1, True)
    tid, new = m.add_message("login failed for user bob")
    assert tid == 1 and not new
    assert m.template(1) == "login failed for user <*>"
    assert len(m) == 1


def test_wpm_and_weights():
    a = loghier.wpm([(1.0, 0.2)] * 4, 2)
    b = loghier.wpm([(1.0, 0.4)] * 4, 2)
    assert b / a == pytest.approx(math.sqrt(2), abs=1e-9)
    four = loghier.wpm([(2.0, w) for w in loghier.implicit_weights(4)], 2)
    eight = loghier.wpm([(2.0, w) for w in loghier.implicit_weights(8)], 2)
    assert abs(four - eight) <= 1e-12
    assert loghier.effective_weight([100, 100]) == pytest.approx(1.0)
    assert loghier.normalize_rank(95, 90) == pytest.approx(50)
    assert loghier.percentile_rank(2.5, [1, 2, 3, 4]) == 50


def test_metrics():
    assert loghier.metrics(1, 0, 0) == (1.0, 1.0, 1.0)
    rows = [(21.1, 1.9, 111), (11.0, 6.5, 95), (7.7, 6.0, 59), (6.9, 25.0, 51)]
    per_dc = [((p / 100, r / 100, loghier.f1(p / 100, r / 100)), n) for p, r, n in rows]
    assert abs(loghier.weighted_mean(per_dc)[2] * 100 - 6.7) <= 0.1


def test_generate_detect_evaluate(tmp_path):
    logs, tickets, alerts = tmp_path / "logs.jsonl", tmp_path / "tickets.jsonl", tmp_path / "alerts.jsonl"
    lines, incidents = loghier.generate(str(logs), str(tickets), seed=4, devices=10, templates=5, hours=6, incidents=1)
    assert incidents == 1 and lines > 0
    summary = loghier.run_detect({"sources": [{"path": str(logs)}], "output": {"alerts": str(alerts)}})
    assert summary[0]["records"] == lines
    assert summary[0]["templates"] == 5
    report = loghier.evaluate(alerts, tickets)
    assert "rows" in report


def test_config_error():
    with pytest.raises(ValueError, match="window.sise"):
        loghier.run_detect({"window": {"sise": "5min"}})
