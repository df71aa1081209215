"""HTML escaping, weak and strict sanitizers, and a vector detector.

The weak sanitizer reproduces a blacklist style of filtering with three
deliberate gaps: tag matching is case sensitive, only two event handler
attributes are stripped, and attribute values are never re-escaped.  The
strict sanitizer tokenizes markup itself, rebuilds it against a whitelist
policy and demotes everything else to inert escaped text.

detect() is an independent grammar over rendered output that flags live
script vectors.  It is used to judge sanitizer output, so it shares no
code with either sanitizer.
"""
from __future__ import annotations

import html as _html
import json
import re
from dataclasses import dataclass, field

_HTML_ESCAPES = {
    "&": "&amp;",
    "<": "&lt;",
    ">": "&gt;",
    '"': "&quot;",
    "'": "&#39;",
}
_HTML_TABLE = {ord(ch): rep for ch, rep in _HTML_ESCAPES.items()}

# Characters that stay literal inside a double-quoted attribute value.
_ATTR_SAFE = frozenset(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 _.,:;/-"
)


def escape_html(text: str) -> str:
    """Escape the five HTML special characters."""
    return text.translate(_HTML_TABLE)


def escape_attribute(text: str) -> str:
    """Escape text for a double-quoted attribute value.

    The five specials get their usual entities; anything outside a small
    safe alphabet becomes a decimal character reference, so characters
    like ``=`` and ``(`` can never reach markup position.
    """
    out: list[str] = []
    for ch in text:
        if ch in _HTML_ESCAPES:
            out.append(_HTML_ESCAPES[ch])
        elif ch in _ATTR_SAFE:
            out.append(ch)
        else:
            out.append(f"&#{ord(ch)};")
    return "".join(out)


# --- weak sanitizer ---------------------------------------------------

# Case-sensitive on purpose: <ScRiPt> sails through.
_WEAK_SCRIPT_RE = re.compile(r"</?script[^>]*>")
# Only these two handlers are stripped; onmouseover etc. survive.
_WEAK_HANDLER_RE = re.compile(
    r"\s(?:onclick|onload)\s*=\s*(?:\"[^\"]*\"|'[^']*'|[^\s>]*)"
)


def weak_sanitize(markup: str) -> str:
    """Blacklist filter with known gaps; see module docstring."""
    markup = _WEAK_SCRIPT_RE.sub("", markup)
    markup = _WEAK_HANDLER_RE.sub("", markup)
    return markup


# --- strict sanitizer -------------------------------------------------


class PolicyError(ValueError):
    """Malformed sanitizer policy document."""


@dataclass(frozen=True)
class SanitizerPolicy:
    """Whitelist of tags, per-tag attributes and URL schemes."""

    allowed_tags: frozenset[str]
    allowed_attributes: dict[str, frozenset[str]]
    url_attributes: frozenset[str]
    allowed_schemes: frozenset[str]
    void_tags: frozenset[str] = frozenset({"br"})

    @classmethod
    def from_dict(cls, raw: dict) -> "SanitizerPolicy":
        try:
            return cls(
                allowed_tags=frozenset(t.lower() for t in raw["allowed_tags"]),
                allowed_attributes={
                    tag.lower(): frozenset(a.lower() for a in attrs)
                    for tag, attrs in raw.get("allowed_attributes", {}).items()
                },
                url_attributes=frozenset(
                    a.lower() for a in raw.get("url_attributes", [])
                ),
                allowed_schemes=frozenset(
                    s.lower() for s in raw.get("allowed_schemes", [])
                ),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise PolicyError(f"bad sanitizer policy: {exc!r}") from exc

    @classmethod
    def from_json_file(cls, path: str) -> "SanitizerPolicy":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


DEFAULT_POLICY = SanitizerPolicy(
    allowed_tags=frozenset({"b", "i", "u", "em", "strong", "p", "br", "a", "span"}),
    allowed_attributes={"a": frozenset({"href"})},
    url_attributes=frozenset({"href", "src"}),
    allowed_schemes=frozenset({"http", "https"}),
)


@dataclass
class _Token:
    kind: str  # text | start | end | comment
    raw: str
    name: str = ""
    attrs: list[tuple[str, str]] = field(default_factory=list)


_TAG_NAME_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9]*")
_ATTR_NAME_RE = re.compile(r"[^\s=/>]+")
_WS_RE = re.compile(r"\s+")


def _tokenize(markup: str) -> list[_Token]:
    """Split markup into text, tag and comment tokens.

    Unterminated constructs fall back to text so no input can make the
    tokenizer lose characters.
    """
    tokens: list[_Token] = []
    pos = 0
    n = len(markup)

    def text(chunk: str) -> None:
        if chunk:
            if tokens and tokens[-1].kind == "text":
                tokens[-1].raw += chunk
            else:
                tokens.append(_Token("text", chunk))

    while pos < n:
        lt = markup.find("<", pos)
        if lt < 0:
            text(markup[pos:])
            break
        text(markup[pos:lt])
        pos = lt
        if markup.startswith("<!--", pos):
            end = markup.find("-->", pos + 4)
            if end < 0:
                tokens.append(_Token("comment", markup[pos:]))
                pos = n
            else:
                tokens.append(_Token("comment", markup[pos : end + 3]))
                pos = end + 3
            continue
        if pos + 1 < n and markup[pos + 1] in "!?":
            end = markup.find(">", pos)
            if end < 0:
                tokens.append(_Token("comment", markup[pos:]))
                pos = n
            else:
                tokens.append(_Token("comment", markup[pos : end + 1]))
                pos = end + 1
            continue
        closing = markup.startswith("</", pos)
        name_at = pos + (2 if closing else 1)
        m = _TAG_NAME_RE.match(markup, name_at)
        if not m:
            text("<")
            pos += 1
            continue
        name = m.group(0)
        cur = m.end()
        attrs: list[tuple[str, str]] = []
        ok = False
        while cur < n:
            ws = _WS_RE.match(markup, cur)
            if ws:
                cur = ws.end()
            if cur >= n:
                break
            if markup[cur] == ">":
                cur += 1
                ok = True
                break
            if markup.startswith("/>", cur):
                cur += 2
                ok = True
                break
            if markup[cur] == "/":
                cur += 1
                continue
            am = _ATTR_NAME_RE.match(markup, cur)
            if not am:
                cur += 1
                continue
            aname = am.group(0)
            cur = am.end()
            ws = _WS_RE.match(markup, cur)
            if ws:
                cur = ws.end()
            value = ""
            if cur < n and markup[cur] == "=":
                cur += 1
                ws = _WS_RE.match(markup, cur)
                if ws:
                    cur = ws.end()
                if cur < n and markup[cur] in "\"'":
                    quote = markup[cur]
                    endq = markup.find(quote, cur + 1)
                    if endq < 0:
                        value = markup[cur + 1 :]
                        cur = n
                    else:
                        value = markup[cur + 1 : endq]
                        cur = endq + 1
                else:
                    vm = re.match(r"[^\s>]*", markup[cur:])
                    value = vm.group(0)
                    cur += len(value)
            attrs.append((aname, value))
        if not ok and cur >= n:
            # Ran off the end mid-tag: keep it as text.
            text(markup[pos:])
            break
        tokens.append(
            _Token("end" if closing else "start", markup[pos:cur], name, attrs)
        )
        pos = cur
    return tokens


def _clean_url(value: str, schemes: frozenset[str]) -> str | None:
    """Return the value if its scheme is allowed, else None."""
    compact = re.sub(r"[\s\x00-\x1f]+", "", value)
    head = re.split(r"[/?#]", compact, maxsplit=1)[0]
    if ":" not in head:
        return value  # relative
    scheme = head.split(":", 1)[0].lower()
    return value if scheme in schemes else None


def strict_sanitize(markup: str, policy: SanitizerPolicy = DEFAULT_POLICY) -> str:
    """Rebuild markup keeping only whitelisted structure.

    Disallowed or unmatched tags come back as escaped source text with
    their original spelling, comments vanish, entities in text and
    attribute values are canonicalized, and open elements are closed at
    the end of input.  The result is a fixed point: sanitizing it again
    changes nothing.
    """
    out: list[str] = []
    stack: list[str] = []
    for tok in _tokenize(markup):
        if tok.kind == "text":
            out.append(escape_html(_html.unescape(tok.raw)))
        elif tok.kind == "comment":
            continue
        elif tok.kind == "start":
            name = tok.name.lower()
            if name not in policy.allowed_tags:
                out.append(escape_html(tok.raw))
                continue
            allowed = policy.allowed_attributes.get(name, frozenset())
            parts = [f"<{name}"]
            seen: set[str] = set()
            for aname, avalue in tok.attrs:
                aname = aname.lower()
                if aname not in allowed or aname in seen:
                    continue
                value = _html.unescape(avalue)
                if aname in policy.url_attributes:
                    checked = _clean_url(value, policy.allowed_schemes)
                    if checked is None:
                        continue
                    value = checked
                parts.append(f' {aname}="{escape_attribute(value)}"')
                seen.add(aname)
            parts.append(">")
            out.append("".join(parts))
            if name not in policy.void_tags:
                stack.append(name)
        else:  # end tag
            name = tok.name.lower()
            if name in policy.allowed_tags and name in stack:
                while stack:
                    top = stack.pop()
                    out.append(f"</{top}>")
                    if top == name:
                        break
            else:
                out.append(escape_html(tok.raw))
    while stack:
        out.append(f"</{stack.pop()}>")
    return "".join(out)


# --- detection grammar -------------------------------------------------


@dataclass(frozen=True)
class DetectionHit:
    """One live script vector found in rendered markup."""

    kind: str  # script-tag | event-handler | javascript-url
    excerpt: str


def load_payload_corpus() -> list[tuple[str, str]]:
    """Read the packaged payload corpus as (bypass_class, payload) pairs."""
    from importlib import resources

    text = (
        resources.files(__package__)
        .joinpath("data/corpus/xss_payloads.txt")
        .read_text("utf-8")
    )
    out: list[tuple[str, str]] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        raw = json.loads(line)
        out.append((raw["class"], raw["payload"]))
    return out


_SCRIPT_RE = re.compile(r"<script", re.I)
_TAG_REGION_RE = re.compile(r"<[a-zA-Z][^>]*>")
_HANDLER_RE = re.compile(r"(?<![\w-])on\w+\s*=", re.I)
_ATTR_VALUE_RE = re.compile(r"""[\w-]+\s*=\s*("[^"]*"|'[^']*'|[^\s>]+)""")


def detect(markup: str) -> list[DetectionHit]:
    """Flag script tags, inline handlers and javascript: URLs."""
    hits: list[DetectionHit] = []
    for m in _SCRIPT_RE.finditer(markup):
        hits.append(DetectionHit("script-tag", markup[m.start() : m.start() + 40]))
    for region_match in _TAG_REGION_RE.finditer(markup):
        region = region_match.group(0)
        hm = _HANDLER_RE.search(region)
        if hm:
            hits.append(DetectionHit("event-handler", region[:80]))
        for am in _ATTR_VALUE_RE.finditer(region):
            value = am.group(1)
            if value[:1] in "\"'":
                value = value[1:-1]
            compact = re.sub(r"[\s\x00-\x1f]+", "", _html.unescape(value)).lower()
            if compact.startswith("javascript:"):
                hits.append(DetectionHit("javascript-url", region[:80]))
                break
    return hits
