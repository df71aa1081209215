"""In-memory application data with a line-delimited JSON snapshot format.

A snapshot writes one JSON object per line, users first, then snippets,
then uploads.  Because every record only references users defined on an
earlier line, any prefix of whole lines is itself a loadable snapshot.
"""
from __future__ import annotations

import base64
import copy
import json
from dataclasses import dataclass, field, asdict


class MalformedSnapshot(ValueError):
    """Snapshot line that cannot be decoded into a record."""


@dataclass
class UserRecord:
    """One account; password may be plaintext or a pbkdf2 string."""

    username: str
    password: str
    is_admin: bool = False
    is_author: bool = False
    color: str = ""
    private_snippet: str = ""

    def as_dict(self) -> dict:
        return {"kind": "user", **asdict(self)}


class DataStore:
    """Users, per-user snippet lists and uploaded files."""

    def __init__(self) -> None:
        self.users: dict[str, UserRecord] = {}
        self.snippets: dict[str, list[str]] = {}
        self.uploads: dict[tuple[str, str], bytes] = {}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DataStore):
            return NotImplemented
        return (
            self.users == other.users
            and self.snippets == other.snippets
            and self.uploads == other.uploads
        )

    def clone(self) -> "DataStore":
        return copy.deepcopy(self)

    # -- users ---------------------------------------------------------

    def add_user(self, record: UserRecord) -> None:
        self.users[record.username] = record
        self.snippets.setdefault(record.username, [])

    def get_user(self, username: str) -> UserRecord | None:
        return self.users.get(username)

    # -- snippets --------------------------------------------------------

    def add_snippet(self, username: str, body: str) -> int:
        if username not in self.users:
            raise KeyError(username)
        rows = self.snippets.setdefault(username, [])
        rows.append(body)
        return len(rows) - 1

    def delete_snippet(self, username: str, index: int) -> None:
        self.snippets[username].pop(index)

    def all_snippets(self) -> list[tuple[str, int, str]]:
        out = []
        for username in self.users:
            for index, body in enumerate(self.snippets.get(username, [])):
                out.append((username, index, body))
        return out

    def first_snippets(self) -> list[tuple[str, str]]:
        """Each user's first snippet, in user order; snippetless users skipped."""
        out = []
        for username in self.users:
            rows = self.snippets.get(username, [])
            if rows:
                out.append((username, rows[0]))
        return out

    # -- uploads ---------------------------------------------------------

    def store_upload(self, username: str, filename: str, content: bytes) -> None:
        if username not in self.users:
            raise KeyError(username)
        self.uploads[(username, filename)] = content

    def get_upload(self, username: str, filename: str) -> bytes | None:
        return self.uploads.get((username, filename))

    def uploads_for(self, username: str) -> list[str]:
        return [name for (owner, name) in self.uploads if owner == username]

    # -- snapshots ---------------------------------------------------------

    def dump(self) -> str:
        lines = []
        for user in self.users.values():
            lines.append(json.dumps(user.as_dict()))
        for username in self.users:
            for body in self.snippets.get(username, []):
                lines.append(
                    json.dumps({"kind": "snippet", "user": username, "body": body})
                )
        for (username, filename), content in self.uploads.items():
            lines.append(
                json.dumps(
                    {
                        "kind": "upload",
                        "user": username,
                        "name": filename,
                        "content_b64": base64.b64encode(content).decode("ascii"),
                    }
                )
            )
        return "".join(line + "\n" for line in lines)

    @classmethod
    def load(cls, text: str) -> "DataStore":
        store = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedSnapshot(f"line {lineno}: bad JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise MalformedSnapshot(f"line {lineno}: expected object")
            kind = raw.get("kind")
            try:
                if kind == "user":
                    fields = {k: v for k, v in raw.items() if k != "kind"}
                    record = UserRecord(**fields)
                    if not isinstance(record.username, str) or not record.username:
                        raise MalformedSnapshot(f"line {lineno}: bad username")
                    store.add_user(record)
                elif kind == "snippet":
                    if raw["user"] not in store.users:
                        raise MalformedSnapshot(
                            f"line {lineno}: snippet for unknown user {raw['user']!r}"
                        )
                    store.add_snippet(raw["user"], _req_str(raw, "body", lineno))
                elif kind == "upload":
                    if raw["user"] not in store.users:
                        raise MalformedSnapshot(
                            f"line {lineno}: upload for unknown user {raw['user']!r}"
                        )
                    content = base64.b64decode(
                        _req_str(raw, "content_b64", lineno), validate=True
                    )
                    store.store_upload(raw["user"], _req_str(raw, "name", lineno), content)
                else:
                    raise MalformedSnapshot(f"line {lineno}: unknown kind {kind!r}")
            except MalformedSnapshot:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedSnapshot(f"line {lineno}: {exc!r}") from exc
        return store

    @classmethod
    def load_file(cls, path: str) -> "DataStore":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.load(fh.read())

    def dump_file(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dump())


def _req_str(raw: dict, key: str, lineno: int) -> str:
    value = raw.get(key)
    if not isinstance(value, str):
        raise MalformedSnapshot(f"line {lineno}: field {key!r} must be a string")
    return value


def seed_store(hashed_passwords: bool = False) -> DataStore:
    """Factory-state store with the two documented accounts."""
    from .session_auth import hash_password

    def enc(password: str) -> str:
        return hash_password(password) if hashed_passwords else password

    store = DataStore()
    store.add_user(
        UserRecord(
            username="admin",
            password=enc("gouda"),
            is_admin=True,
            is_author=True,
            color="blue",
            private_snippet="Administrator private notes.",
        )
    )
    store.add_user(
        UserRecord(
            username="cheddar",
            password=enc("brie"),
            is_admin=False,
            is_author=True,
            color="red",
            private_snippet="Cheddar keeps the cellar key under the mat.",
        )
    )
    store.add_snippet("cheddar", "Welcome to the snippet board!")
    return store
