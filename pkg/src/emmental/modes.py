"""Per-vulnerability mode switchboard.

Every intentional weakness in the application is registered here under a
stable identifier.  A ModeConfig picks a default mode for all of them and
may override individual ones, so any subset can run vulnerable while the
rest runs hardened.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

VULNERABLE = "vulnerable"
HARDENED = "hardened"
MODES = (VULNERABLE, HARDENED)

# Stable identifiers, one per intentional weakness.
XSS_UPLOAD = "XSS_UPLOAD"
XSS_REFLECTED = "XSS_REFLECTED"
XSS_REFLECTED_AJAX = "XSS_REFLECTED_AJAX"
XSS_STORED = "XSS_STORED"
XSS_ATTR = "XSS_ATTR"
XSS_STORED_AJAX = "XSS_STORED_AJAX"
PRIV_ESCALATION = "PRIV_ESCALATION"
COOKIE_FORGE = "COOKIE_FORGE"
CSRF = "CSRF"
XSSI_FEED = "XSSI_FEED"
PATH_TRAVERSAL = "PATH_TRAVERSAL"
RCE_TEMPLATE = "RCE_TEMPLATE"
INFO_DUMP = "INFO_DUMP"
DOS_QUIT = "DOS_QUIT"

ALL_VULNERABILITIES: tuple[str, ...] = (
    XSS_UPLOAD,
    XSS_REFLECTED,
    XSS_REFLECTED_AJAX,
    XSS_STORED,
    XSS_ATTR,
    XSS_STORED_AJAX,
    PRIV_ESCALATION,
    COOKIE_FORGE,
    CSRF,
    XSSI_FEED,
    PATH_TRAVERSAL,
    RCE_TEMPLATE,
    INFO_DUMP,
    DOS_QUIT,
)


class ModeError(ValueError):
    """Bad vulnerability id or mode name in a config source."""


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ModeError(f"unknown mode {mode!r}, expected one of {MODES}")
    return mode


def _check_vuln(vuln_id: str) -> str:
    if vuln_id not in ALL_VULNERABILITIES:
        raise ModeError(f"unknown vulnerability id {vuln_id!r}")
    return vuln_id


@dataclass(frozen=True)
class ModeConfig:
    """Default mode plus per-vulnerability overrides."""

    default_mode: str = VULNERABLE
    overrides: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _check_mode(self.default_mode)
        for vuln_id, mode in self.overrides.items():
            _check_vuln(vuln_id)
            _check_mode(mode)

    def mode_of(self, vuln_id: str) -> str:
        _check_vuln(vuln_id)
        return self.overrides.get(vuln_id, self.default_mode)

    def is_vulnerable(self, vuln_id: str) -> bool:
        return self.mode_of(vuln_id) == VULNERABLE

    def is_hardened(self, vuln_id: str) -> bool:
        return self.mode_of(vuln_id) == HARDENED

    def as_dict(self) -> dict:
        return {
            "default_mode": self.default_mode,
            "overrides": dict(self.overrides),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModeConfig":
        if not isinstance(raw, dict):
            raise ModeError("mode config must be a JSON object")
        extra = set(raw) - {"default_mode", "overrides"}
        if extra:
            raise ModeError(f"unknown mode config keys: {sorted(extra)}")
        overrides = raw.get("overrides", {})
        if not isinstance(overrides, dict):
            raise ModeError("overrides must be an object of id -> mode")
        return cls(
            default_mode=raw.get("default_mode", VULNERABLE),
            overrides=dict(overrides),
        )

    @classmethod
    def from_json_file(cls, path: str) -> "ModeConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def with_toggles(self, toggles: dict[str, str]) -> "ModeConfig":
        """New config with extra overrides; later sources win."""
        merged = dict(self.overrides)
        merged.update(toggles)
        return ModeConfig(default_mode=self.default_mode, overrides=merged)


def parse_toggle_args(pairs: list[str]) -> dict[str, str]:
    """Parse repeated ``ID=mode`` CLI arguments into an override map."""
    toggles: dict[str, str] = {}
    for pair in pairs:
        vuln_id, sep, mode = pair.partition("=")
        if not sep:
            raise ModeError(f"bad toggle {pair!r}, expected ID=mode")
        toggles[_check_vuln(vuln_id.strip())] = _check_mode(mode.strip())
    return toggles
