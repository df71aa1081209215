"""Exploit harness: drives attacks against a running server.

The client is deliberately thin: request paths go on the wire byte for
byte, cookies are a plain per-identity jar, and nothing follows
redirects, so scenarios control exactly what the server sees.
"""
from __future__ import annotations

import argparse
import datetime
import http.client
import json
import secrets
import shlex
import socket
import subprocess
import sys
import time
import urllib.parse
from dataclasses import dataclass, field

EVIDENCE_LIMIT = 200

EXPLOITED = "EXPLOITED"
BLOCKED = "BLOCKED"
ERROR = "ERROR"


class TargetDown(Exception):
    """Connection to the target failed or died mid-request."""


class StepError(Exception):
    """A scenario step that must succeed did not."""


@dataclass
class MiniResponse:
    status: int
    reason: str
    headers: list[tuple[str, str]]
    body: bytes

    @property
    def text(self) -> str:
        return self.body.decode("utf-8", "replace")

    def header(self, name: str) -> str | None:
        wanted = name.lower()
        for key, value in self.headers:
            if key.lower() == wanted:
                return value
        return None

    def headers_all(self, name: str) -> list[str]:
        wanted = name.lower()
        return [v for k, v in self.headers if k.lower() == wanted]


class MiniClient:
    """Raw http.client wrapper with named cookie jars."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        parsed = urllib.parse.urlsplit(base_url)
        if parsed.scheme != "http":
            raise ValueError("only http targets are supported")
        self.host = parsed.hostname or "127.0.0.1"
        self.port = parsed.port or 80
        self.timeout = timeout
        self.jars: dict[str, dict[str, str]] = {}

    @property
    def origin(self) -> str:
        return f"http://{self.host}:{self.port}"

    def set_cookie(self, identity: str, name: str, value: str) -> None:
        self.jars.setdefault(identity, {})[name] = value

    def cookie(self, identity: str, name: str) -> str | None:
        return self.jars.get(identity, {}).get(name)

    def request(
        self,
        method: str,
        path: str,
        *,
        identity: str | None = None,
        headers: dict[str, str] | None = None,
        body: bytes | None = None,
        form: dict[str, str] | None = None,
    ) -> MiniResponse:
        sent_headers = dict(headers or {})
        if form is not None:
            body = urllib.parse.urlencode(form).encode("utf-8")
            sent_headers.setdefault("Content-Type", "application/x-www-form-urlencoded")
        if identity is not None and self.jars.get(identity):
            jar = self.jars[identity]
            sent_headers.setdefault(
                "Cookie", "; ".join(f"{k}={v}" for k, v in jar.items())
            )
        connection = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout)
        try:
            # putrequest sends the path exactly as given: no re-encoding,
            # no dot-segment cleanup.
            connection.putrequest(method, path, skip_accept_encoding=True)
            if body is not None:
                sent_headers.setdefault("Content-Length", str(len(body)))
            for name, value in sent_headers.items():
                connection.putheader(name, value)
            connection.endheaders()
            if body:
                connection.send(body)
            raw = connection.getresponse()
            response = MiniResponse(
                status=raw.status,
                reason=raw.reason,
                headers=list(raw.getheaders()),
                body=raw.read(),
            )
        except (ConnectionError, socket.timeout, http.client.HTTPException, OSError) as exc:
            raise TargetDown(f"{method} {path}: {exc}") from exc
        finally:
            connection.close()
        if identity is not None:
            self._absorb_cookies(identity, response)
        return response

    def _absorb_cookies(self, identity: str, response: MiniResponse) -> None:
        jar = self.jars.setdefault(identity, {})
        for header in response.headers_all("Set-Cookie"):
            first = header.split(";", 1)[0]
            name, sep, value = first.partition("=")
            if not sep:
                continue
            attrs = header.lower()
            if "max-age=0" in attrs and not value:
                jar.pop(name.strip(), None)
            else:
                jar[name.strip()] = value


def multipart_body(
    fields: dict[str, str], file_field: str, filename: str, content: bytes
) -> tuple[bytes, str]:
    """Encode a multipart/form-data body with one file part."""
    boundary = "----emmental" + secrets.token_hex(8)
    out = bytearray()
    for name, value in fields.items():
        out += (
            f"--{boundary}\r\n"
            f'Content-Disposition: form-data; name="{name}"\r\n\r\n'
            f"{value}\r\n"
        ).encode("utf-8")
    out += (
        f"--{boundary}\r\n"
        f'Content-Disposition: form-data; name="{file_field}"; filename="{filename}"\r\n'
        "Content-Type: application/octet-stream\r\n\r\n"
    ).encode("utf-8")
    out += content
    out += f"\r\n--{boundary}--\r\n".encode("utf-8")
    return bytes(out), f"multipart/form-data; boundary={boundary}"


class ServerSupervisor:
    """Launches the target server and relaunches it after exits."""

    def __init__(self, command: list[str], base_url: str, *, startup_timeout: float = 20.0):
        self.command = command
        self.base_url = base_url
        self.startup_timeout = startup_timeout
        self.process: subprocess.Popen | None = None
        self.exit_codes: list[int] = []

    def start(self) -> None:
        self.process = subprocess.Popen(self.command)
        self._wait_ready()

    def _wait_ready(self) -> None:
        client = MiniClient(self.base_url, timeout=2.0)
        deadline = time.monotonic() + self.startup_timeout
        while time.monotonic() < deadline:
            if self.process is not None and self.process.poll() is not None:
                raise StepError(
                    f"server exited during startup with code {self.process.returncode}"
                )
            try:
                client.request("GET", "/")
                return
            except TargetDown:
                time.sleep(0.1)
        raise StepError("server did not become ready in time")

    def poll_exit(self) -> int | None:
        if self.process is None:
            return None
        return self.process.poll()

    def wait_exit(self, timeout: float) -> int | None:
        """Wait up to timeout for the server to exit; records the code."""
        if self.process is None:
            return None
        try:
            code = self.process.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            return None
        self.exit_codes.append(code)
        return code

    def relaunch(self) -> None:
        self.start()

    def stop(self) -> None:
        if self.process is None or self.process.poll() is not None:
            return
        self.process.terminate()
        try:
            self.process.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.process.kill()
            self.process.wait(timeout=5)


@dataclass
class AttackContext:
    client: MiniClient
    supervisor: ServerSupervisor | None = None


# --- report ---------------------------------------------------------------


@dataclass
class ScenarioResult:
    vuln_id: str
    title: str
    verdict: str
    evidence: str
    expected: str | None = None

    @property
    def ok(self) -> bool | None:
        if self.expected is None:
            return None
        return self.verdict == self.expected

    def as_dict(self) -> dict:
        return {
            "vuln_id": self.vuln_id,
            "title": self.title,
            "verdict": self.verdict,
            "evidence": self.evidence,
            "expected": self.expected,
            "ok": self.ok,
        }


@dataclass
class HarnessReport:
    target: str
    expectation: str | None
    started_at: str
    finished_at: str
    results: list[ScenarioResult] = field(default_factory=list)

    @property
    def overall_ok(self) -> bool | None:
        judged = [r.ok for r in self.results if r.ok is not None]
        if not judged:
            return None
        return all(judged)

    def counts(self) -> dict[str, int]:
        out = {EXPLOITED: 0, BLOCKED: 0, ERROR: 0}
        for result in self.results:
            out[result.verdict] = out.get(result.verdict, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "expectation": self.expectation,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "overall_ok": self.overall_ok,
            "counts": self.counts(),
            "results": [r.as_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, raw: dict) -> "HarnessReport":
        results = [
            ScenarioResult(
                vuln_id=r["vuln_id"],
                title=r["title"],
                verdict=r["verdict"],
                evidence=r["evidence"],
                expected=r.get("expected"),
            )
            for r in raw["results"]
        ]
        return cls(
            target=raw["target"],
            expectation=raw.get("expectation"),
            started_at=raw["started_at"],
            finished_at=raw["finished_at"],
            results=results,
        )

    @classmethod
    def from_json(cls, text: str) -> "HarnessReport":
        return cls.from_dict(json.loads(text))

    def render_text(self) -> str:
        lines = [f"target: {self.target}"]
        if self.expectation:
            lines.append(f"expectation: every attack {self.expectation}")
        for result in self.results:
            mark = ""
            if result.ok is not None:
                mark = " [ok]" if result.ok else " [MISMATCH]"
            lines.append(
                f"{result.verdict:<9} {result.vuln_id:<18}{mark} {result.evidence}"
            )
        counts = self.counts()
        lines.append(
            f"exploited={counts[EXPLOITED]} blocked={counts[BLOCKED]} errors={counts[ERROR]}"
        )
        if self.overall_ok is not None:
            lines.append("result: PASS" if self.overall_ok else "result: FAIL")
        return "\n".join(lines)


# --- runner ---------------------------------------------------------------


def _trim(evidence: str) -> str:
    data = evidence.encode("utf-8", "replace")
    if len(data) <= EVIDENCE_LIMIT:
        return evidence
    return data[:EVIDENCE_LIMIT].decode("utf-8", "replace") + "..."


def run_scenario(scenario, ctx: AttackContext) -> ScenarioResult:
    from .scenarios import Probe  # local import to avoid a cycle

    try:
        probe = scenario.execute(ctx)
    except (StepError, TargetDown) as exc:
        return ScenarioResult(scenario.vuln_id, scenario.title, ERROR, _trim(str(exc)))
    hit = scenario.exploited.check(probe)
    if hit.matched:
        return ScenarioResult(scenario.vuln_id, scenario.title, EXPLOITED, _trim(hit.evidence))
    stopped = scenario.blocked.check(probe)
    if stopped.matched:
        return ScenarioResult(scenario.vuln_id, scenario.title, BLOCKED, _trim(stopped.evidence))
    ambiguous = f"neither outcome: {hit.evidence} / {stopped.evidence}"
    return ScenarioResult(scenario.vuln_id, scenario.title, ERROR, _trim(ambiguous))


def reset_target(client: MiniClient) -> bool:
    """Restore factory state when the server exposes test hooks."""
    try:
        response = client.request("POST", "/testhooks/reset")
    except TargetDown:
        return False
    return response.status == 200


def run_all(
    target: str,
    *,
    expectation: str | dict[str, str] | None = None,
    only: list[str] | None = None,
    supervisor: ServerSupervisor | None = None,
    timeout: float = 10.0,
) -> HarnessReport:
    from .scenarios import SCENARIOS

    selected = [s for s in SCENARIOS if only is None or s.vuln_id in only]
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    results = []
    for scenario in selected:
        client = MiniClient(target, timeout=timeout)
        reset_target(client)
        result = run_scenario(scenario, AttackContext(client, supervisor))
        if isinstance(expectation, dict):
            result.expected = expectation.get(scenario.vuln_id)
        elif expectation == "vulnerable":
            result.expected = EXPLOITED
        elif expectation == "hardened":
            result.expected = BLOCKED
        results.append(result)
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
    expect_label = expectation if isinstance(expectation, str) else None
    return HarnessReport(
        target=target,
        expectation=expect_label,
        started_at=started,
        finished_at=finished,
        results=results,
    )


# --- CLI --------------------------------------------------------------------


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emmental-harness",
        description="Run attack scenarios against a training server",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run-all", help="run every scenario")
    run.add_argument("--target", required=True, help="base URL, e.g. http://127.0.0.1:8008")
    run.add_argument("--expect", choices=("vulnerable", "hardened"),
                     help="judge verdicts against this expectation")
    run.add_argument("--only", help="comma separated vulnerability ids")
    run.add_argument("--report", help="write the JSON report here")
    run.add_argument("--server-cmd",
                     help="launch this server command and supervise restarts")
    run.add_argument("--timeout", type=float, default=10.0, help="per-request timeout")
    sub.add_parser("list", help="list scenarios")
    return parser


def main(argv: list[str] | None = None) -> int:
    from .scenarios import SCENARIOS

    args = build_arg_parser().parse_args(argv)
    if args.command == "list":
        for scenario in SCENARIOS:
            print(f"{scenario.vuln_id:<18} {scenario.title}")
        return 0
    only = [x.strip() for x in args.only.split(",")] if args.only else None
    supervisor = None
    if args.server_cmd:
        supervisor = ServerSupervisor(shlex.split(args.server_cmd), args.target)
        supervisor.start()
    try:
        report = run_all(
            args.target,
            expectation=args.expect,
            only=only,
            supervisor=supervisor,
            timeout=args.timeout,
        )
    finally:
        if supervisor is not None:
            supervisor.stop()
    print(report.render_text())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    if report.overall_ok is None:
        return 0
    return 0 if report.overall_ok else 1


if __name__ == "__main__":
    # Re-import so `python -m emmental.harness` shares one module copy
    # with the scenarios; otherwise exception classes split identities.
    from emmental.harness import main as _main

    raise SystemExit(_main())
