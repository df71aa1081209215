"""Tiny text template language with raw and escaped substitution.

Syntax: ``{{name}}`` or ``{{name:modifier}}`` where name matches
``[A-Za-z_][A-Za-z0-9_.]*`` and the modifier is ``raw`` (default) or
``text`` for HTML escaping.  ``{{{{`` renders a literal ``{{``.  The
parse is lossless: every node keeps its exact source slice, so joining
node sources reproduces the input byte for byte.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .sanitizer import escape_html

MODIFIERS = ("raw", "text")

_NAME_START = frozenset(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_"
)
_NAME_REST = _NAME_START | frozenset("0123456789.")


class TemplateError(ValueError):
    """Malformed template source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class TextNode:
    source: str

    def render(self, context: dict, warnings: list[str]) -> str:
        return self.source


@dataclass(frozen=True)
class BraceNode:
    """Source ``{{{{``, renders a literal ``{{``."""

    source: str

    def render(self, context: dict, warnings: list[str]) -> str:
        return "{{"


def _lookup(name: str, context: dict) -> tuple[bool, object]:
    """Resolve a dotted name through dict keys, then attributes."""
    value: object = context
    for part in name.split("."):
        if isinstance(value, dict):
            if part not in value:
                return False, None
            value = value[part]
        elif hasattr(value, part):
            value = getattr(value, part)
        else:
            return False, None
    return True, value


@dataclass(frozen=True)
class VarNode:
    source: str
    name: str
    modifier: str

    def render(self, context: dict, warnings: list[str]) -> str:
        found, value = _lookup(self.name, context)
        if not found:
            warnings.append(f"undefined template variable {self.name!r}")
            return ""
        text = value if isinstance(value, str) else str(value)
        if self.modifier == "text":
            return escape_html(text)
        return text


Node = TextNode | BraceNode | VarNode


@dataclass(frozen=True)
class Template:
    nodes: tuple[Node, ...]

    @property
    def source(self) -> str:
        return "".join(node.source for node in self.nodes)

    def render(self, context: dict) -> "RenderResult":
        warnings: list[str] = []
        text = "".join(node.render(context, warnings) for node in self.nodes)
        return RenderResult(text=text, warnings=warnings)

    def variables(self) -> set[str]:
        return {n.name for n in self.nodes if isinstance(n, VarNode)}


@dataclass(frozen=True)
class RenderResult:
    text: str
    warnings: list[str] = field(default_factory=list)


def parse(source: str) -> Template:
    """Parse template source; raises TemplateError on bad syntax."""
    nodes: list[Node] = []
    pos = 0
    n = len(source)

    def add_text(chunk: str) -> None:
        if not chunk:
            return
        if nodes and isinstance(nodes[-1], TextNode):
            nodes[-1] = TextNode(nodes[-1].source + chunk)
        else:
            nodes.append(TextNode(chunk))

    while pos < n:
        start = source.find("{{", pos)
        if start < 0:
            add_text(source[pos:])
            break
        add_text(source[pos:start])
        if source.startswith("{{{{", start):
            nodes.append(BraceNode("{{{{"))
            pos = start + 4
            continue
        cur = start + 2
        if cur >= n or source[cur] not in _NAME_START:
            raise TemplateError("expected variable name after '{{'", start)
        name_start = cur
        while cur < n and source[cur] in _NAME_REST:
            cur += 1
        name = source[name_start:cur]
        modifier = "raw"
        if cur < n and source[cur] == ":":
            cur += 1
            mod_start = cur
            while cur < n and source[cur].isalnum():
                cur += 1
            modifier = source[mod_start:cur]
            if modifier not in MODIFIERS:
                raise TemplateError(
                    f"unknown modifier {modifier!r}", mod_start
                )
        if not source.startswith("}}", cur):
            raise TemplateError("unterminated variable tag", start)
        cur += 2
        nodes.append(VarNode(source[start:cur], name, modifier))
        pos = cur
    return Template(tuple(nodes))


def parse_file(path: str) -> Template:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())
