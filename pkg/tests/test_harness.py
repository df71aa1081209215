"""Harness plumbing: predicates, cookie jars, reports and verdicts."""
import json

import pytest

from emmental.harness import (
    AttackContext,
    BLOCKED,
    ERROR,
    EVIDENCE_LIMIT,
    EXPLOITED,
    HarnessReport,
    MiniClient,
    MiniResponse,
    ScenarioResult,
    StepError,
    TargetDown,
    _trim,
    reset_target,
    run_scenario,
)
from emmental.scenarios import (
    AllOf,
    AnyOf,
    BodyContains,
    BodyStartsWith,
    DetectionHits,
    HeaderContains,
    Not,
    NoteEquals,
    Probe,
    ProcessExited42,
    SCENARIOS,
    Scenario,
    StatusEquals,
)


def response(status=200, body=b"", headers=None) -> MiniResponse:
    return MiniResponse(status, "reason", headers or [], body)


def probe(status=200, body=b"", headers=None, notes=None) -> Probe:
    return Probe(response(status, body, headers), notes or {})


def test_status_and_body_predicates():
    sample = probe(403, b"denied <b>here</b>")
    assert StatusEquals(403).check(sample).matched
    assert not StatusEquals(200).check(sample).matched
    assert BodyContains("<b>here</b>").check(sample).matched
    missing = BodyContains("ghost").check(sample)
    assert not missing.matched and "ghost" in missing.evidence
    assert BodyStartsWith("denied").check(sample).matched
    assert not BodyStartsWith("enied").check(sample).matched


def test_header_predicate_is_case_insensitive():
    sample = probe(headers=[("Content-Type", "Application/JSON; charset=utf-8")])
    assert HeaderContains("content-type", "application/json").check(sample).matched
    assert not HeaderContains("content-type", "text/html").check(sample).matched
    assert not HeaderContains("x-missing", "x").check(sample).matched


def test_detection_predicate_and_kind_filter():
    live = probe(body=b'<p><script>alert(1)</script></p>')
    assert DetectionHits().check(live).matched
    assert DetectionHits(frozenset({"script-tag"})).check(live).matched
    assert not DetectionHits(frozenset({"event-handler"})).check(live).matched
    inert = probe(body=b"&lt;script&gt;alert(1)&lt;/script&gt;")
    assert not DetectionHits().check(inert).matched


def test_note_predicates():
    sample = probe(notes={"exit_code": "42"})
    assert NoteEquals("exit_code", "42").check(sample).matched
    assert ProcessExited42().check(sample).matched
    assert not ProcessExited42().check(probe()).matched


def test_predicate_combinators():
    sample = probe(200, b"hello")
    both = AllOf(StatusEquals(200), BodyContains("hello"))
    assert both.check(sample).matched
    assert not AllOf(StatusEquals(200), BodyContains("bye")).check(sample).matched
    either = AnyOf(StatusEquals(404), BodyContains("hello"))
    assert either.check(sample).matched
    assert not AnyOf(StatusEquals(404), BodyContains("bye")).check(sample).matched
    assert Not(StatusEquals(404)).check(sample).matched
    assert not Not(StatusEquals(200)).check(sample).matched


def test_predicates_handle_missing_response():
    empty = Probe(None)
    for predicate in (
        StatusEquals(200),
        BodyContains("x"),
        BodyStartsWith("x"),
        HeaderContains("a", "b"),
        DetectionHits(),
    ):
        result = predicate.check(empty)
        assert not result.matched
        assert result.evidence == "no response"


def test_cookie_jar_absorb_and_delete():
    client = MiniClient("http://127.0.0.1:1")
    client._absorb_cookies(
        "me", response(headers=[("Set-Cookie", "GRUYERE=abc|u|0|1; Path=/; HttpOnly")])
    )
    assert client.cookie("me", "GRUYERE") == "abc|u|0|1"
    assert client.cookie("other", "GRUYERE") is None
    client._absorb_cookies(
        "me", response(headers=[("Set-Cookie", "GRUYERE=; Path=/; Max-Age=0")])
    )
    assert client.cookie("me", "GRUYERE") is None


def test_cookie_jar_manual_set():
    client = MiniClient("http://127.0.0.1:1")
    client.set_cookie("attacker", "GRUYERE", "00000000|foo|admin|author")
    assert client.cookie("attacker", "GRUYERE") == "00000000|foo|admin|author"


def test_client_rejects_non_http_targets():
    with pytest.raises(ValueError):
        MiniClient("https://example.com")


def test_reset_target_false_when_down():
    assert reset_target(MiniClient("http://127.0.0.1:1", timeout=0.2)) is False


def make_scenario(execute) -> Scenario:
    return Scenario(
        vuln_id="XSS_REFLECTED",
        title="fake",
        execute=execute,
        exploited=BodyContains("owned"),
        blocked=StatusEquals(403),
    )


def fake_ctx() -> AttackContext:
    return AttackContext(MiniClient("http://127.0.0.1:1", timeout=0.2))


def test_run_scenario_verdict_mapping():
    exploited = run_scenario(make_scenario(lambda ctx: probe(200, b"owned")), fake_ctx())
    assert exploited.verdict == EXPLOITED
    blocked = run_scenario(make_scenario(lambda ctx: probe(403, b"nope")), fake_ctx())
    assert blocked.verdict == BLOCKED
    ambiguous = run_scenario(make_scenario(lambda ctx: probe(200, b"nope")), fake_ctx())
    assert ambiguous.verdict == ERROR
    assert "neither outcome" in ambiguous.evidence


def test_run_scenario_step_error_and_target_down():
    def boom(ctx):
        raise StepError("login failed with status 500")

    result = run_scenario(make_scenario(boom), fake_ctx())
    assert result.verdict == ERROR
    assert "login failed" in result.evidence

    def gone(ctx):
        raise TargetDown("connection refused")

    assert run_scenario(make_scenario(gone), fake_ctx()).verdict == ERROR


def test_evidence_trimmed_to_limit():
    trimmed = _trim("x" * (EVIDENCE_LIMIT + 50))
    assert trimmed == "x" * EVIDENCE_LIMIT + "..."
    assert _trim("short") == "short"


def sample_report() -> HarnessReport:
    return HarnessReport(
        target="http://127.0.0.1:9",
        expectation="vulnerable",
        started_at="2026-01-01T00:00:00+00:00",
        finished_at="2026-01-01T00:01:00+00:00",
        results=[
            ScenarioResult("XSS_REFLECTED", "reflect", EXPLOITED, "hit", EXPLOITED),
            ScenarioResult("CSRF", "forge", BLOCKED, "403", EXPLOITED),
            ScenarioResult("DOS_QUIT", "quit", ERROR, "no response", None),
        ],
    )


def test_result_ok_mapping():
    report = sample_report()
    assert report.results[0].ok is True
    assert report.results[1].ok is False
    assert report.results[2].ok is None
    assert report.overall_ok is False


def test_overall_ok_none_without_expectations():
    report = sample_report()
    for result in report.results:
        result.expected = None
    assert report.overall_ok is None


def test_report_json_round_trip():
    report = sample_report()
    loaded = HarnessReport.from_json(report.to_json())
    assert loaded == report
    raw = json.loads(report.to_json())
    assert raw["counts"] == {"EXPLOITED": 1, "BLOCKED": 1, "ERROR": 1}
    assert raw["overall_ok"] is False


def test_report_text_rendering():
    text = sample_report().render_text()
    lines = text.splitlines()
    assert lines[0] == "target: http://127.0.0.1:9"
    assert any("[ok]" in line and "XSS_REFLECTED" in line for line in lines)
    assert any("[MISMATCH]" in line and "CSRF" in line for line in lines)
    assert "exploited=1 blocked=1 errors=1" in text
    assert text.endswith("result: FAIL")


def test_scenarios_cover_every_id_once():
    from emmental.modes import ALL_VULNERABILITIES

    ids = [s.vuln_id for s in SCENARIOS]
    assert sorted(ids) == sorted(ALL_VULNERABILITIES)
    assert len(ids) == len(set(ids)) == 14
    assert ids[-1] == "DOS_QUIT", "the process-killing scenario runs last"


def test_cli_list_prints_scenarios(capsys):
    from emmental.harness import main

    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for scenario in SCENARIOS:
        assert scenario.vuln_id in out
