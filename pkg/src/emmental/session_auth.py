"""Session cookies, CSRF tokens, login throttling and password storage.

The vulnerable cookie scheme ties identity to an unkeyed 32-bit FNV-1a
checksum that the parser never verifies, so any client can mint admin
claims.  The hardened scheme authenticates the whole payload with
HMAC-SHA256 under a random server key of at least 256 bits and rejects
anything that does not verify byte for byte.
"""
from __future__ import annotations

import hashlib
import hmac
import secrets
import time
from collections import deque
from dataclasses import dataclass

COOKIE_NAME = "GRUYERE"
COOKIE_SALT = "gruyere"  # public by design: it ships in the repo
MIN_KEY_BYTES = 32

_FNV_OFFSET = 2166136261
_FNV_PRIME = 16777619


class CookieError(ValueError):
    """Base class for cookie parsing failures."""


class MalformedCookie(CookieError):
    """Wrong field count or unparseable cookie value."""


class BadSignature(CookieError):
    """HMAC verification failed."""


class UnknownUser(CookieError):
    """Verified cookie names a user that is not in the store."""


@dataclass(frozen=True)
class SessionClaims:
    username: str
    is_admin: bool
    is_author: bool


def fnv1a32(data: bytes) -> int:
    value = _FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * _FNV_PRIME) & 0xFFFFFFFF
    return value


def cookie_checksum(username: str) -> str:
    """Unkeyed checksum of salt + username, eight hex digits."""
    return format(fnv1a32((COOKIE_SALT + username).encode("utf-8")), "08x")


def make_cookie_vulnerable(username: str, is_admin: bool, is_author: bool) -> str:
    flags = f"{int(is_admin)}|{int(is_author)}"
    return f"{cookie_checksum(username)}|{username}|{flags}"


def parse_cookie_vulnerable(value: str) -> SessionClaims:
    """Trusting parser: the checksum field is never checked.

    Flag fields accept both the 0/1 wire form and the bare words
    ``admin`` and ``author`` anywhere after the username.
    """
    fields = value.split("|")
    if len(fields) < 2 or not fields[1]:
        raise MalformedCookie("expected tag|username|...")
    username = fields[1]
    rest = fields[2:]
    is_admin = "admin" in rest or (len(rest) > 0 and rest[0] == "1")
    is_author = "author" in rest or (len(rest) > 1 and rest[1] == "1")
    return SessionClaims(username, is_admin, is_author)


def _mac_payload(username: str, is_admin: bool, is_author: bool) -> str:
    return f"{username}|{int(is_admin)}|{int(is_author)}"


def make_cookie_hardened(
    username: str, is_admin: bool, is_author: bool, key: bytes
) -> str:
    payload = _mac_payload(username, is_admin, is_author)
    mac = hmac.new(key, payload.encode("utf-8"), hashlib.sha256).hexdigest()
    return f"{mac}|{payload}"


def parse_cookie_hardened(value: str, key: bytes) -> SessionClaims:
    """Verify the HMAC over the exact four-field wire format."""
    fields = value.split("|")
    if len(fields) != 4:
        raise MalformedCookie("expected mac|username|admin|author")
    mac, username, admin_flag, author_flag = fields
    if not username or admin_flag not in ("0", "1") or author_flag not in ("0", "1"):
        raise MalformedCookie("bad field values")
    payload = f"{username}|{admin_flag}|{author_flag}"
    expected = hmac.new(key, payload.encode("utf-8"), hashlib.sha256).hexdigest()
    if not hmac.compare_digest(mac, expected):
        raise BadSignature("cookie MAC mismatch")
    return SessionClaims(username, admin_flag == "1", author_flag == "1")


def generate_key() -> bytes:
    return secrets.token_bytes(MIN_KEY_BYTES)


def load_or_create_key(path: str | None) -> bytes:
    """Read a hex key file, creating it with a fresh key if absent."""
    if path is None:
        return generate_key()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            key = bytes.fromhex(fh.read().strip())
    except FileNotFoundError:
        key = generate_key()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(key.hex() + "\n")
        return key
    if len(key) < MIN_KEY_BYTES:
        raise ValueError(f"server key must be at least {MIN_KEY_BYTES} bytes")
    return key


# --- CSRF tokens --------------------------------------------------------


class TokenStore:
    """Per-user anti-CSRF tokens, multi-use until they expire."""

    def __init__(self, ttl_seconds: float = 3600.0, clock=time.time):
        self.ttl = ttl_seconds
        self.clock = clock
        self._tokens: dict[str, dict[str, float]] = {}

    def issue(self, username: str) -> str:
        token = secrets.token_hex(16)
        self._purge(username)
        self._tokens.setdefault(username, {})[token] = self.clock() + self.ttl
        return token

    def validate(self, username: str, token: str) -> bool:
        self._purge(username)
        return token in self._tokens.get(username, {})

    def clear(self) -> None:
        self._tokens.clear()

    def _purge(self, username: str) -> None:
        now = self.clock()
        held = self._tokens.get(username)
        if held:
            for token in [t for t, exp in held.items() if exp <= now]:
                del held[token]


# --- login throttling -----------------------------------------------------


class FailureThrottle:
    """Blocks a username after too many recent failed logins."""

    def __init__(self, limit: int = 5, window_seconds: float = 60.0, clock=time.time):
        self.limit = limit
        self.window = window_seconds
        self.clock = clock
        self._failures: dict[str, deque[float]] = {}

    def _trim(self, username: str) -> deque[float]:
        now = self.clock()
        queue = self._failures.setdefault(username, deque())
        while queue and queue[0] <= now - self.window:
            queue.popleft()
        return queue

    def is_blocked(self, username: str) -> bool:
        return len(self._trim(username)) >= self.limit

    def record_failure(self, username: str) -> None:
        self._trim(username).append(self.clock())

    def reset(self, username: str) -> None:
        self._failures.pop(username, None)

    def clear(self) -> None:
        self._failures.clear()


# --- password storage ------------------------------------------------------

PBKDF2_ITERATIONS = 50_000
SALT_BYTES = 16


def hash_password(password: str, iterations: int = PBKDF2_ITERATIONS) -> str:
    salt = secrets.token_bytes(SALT_BYTES)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations)
    return f"pbkdf2:sha256:{iterations}${salt.hex()}${digest.hex()}"


def verify_password(stored: str, candidate: str) -> bool:
    """Check a candidate against plaintext or pbkdf2 storage."""
    if not stored.startswith("pbkdf2:"):
        return hmac.compare_digest(stored.encode(), candidate.encode())
    try:
        scheme, salt_hex, digest_hex = stored.split("$")
        _, algo, iter_text = scheme.split(":")
        iterations = int(iter_text)
        salt = bytes.fromhex(salt_hex)
        expected = bytes.fromhex(digest_hex)
    except ValueError:
        return False
    actual = hashlib.pbkdf2_hmac(algo, candidate.encode("utf-8"), salt, iterations)
    return hmac.compare_digest(actual, expected)


def is_hashed(stored: str) -> bool:
    return stored.startswith("pbkdf2:")
