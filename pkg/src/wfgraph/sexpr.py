"""S-expression reader and writer used by the model format.

Atoms are unsigned integers, symbols, and ``:keywords``.  A ``;`` starts a
comment that runs to end of line.  Every parsed node keeps its 1-based source
position so later passes can report precise diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass


class SExprError(ValueError):
    """Malformed s-expression input, with a 1-based source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


_DELIMS = set("();")
_WS = set(" \t\r\n")


@dataclass(frozen=True)
class SExpr:
    """One parse-tree node; ``kind`` is ``"int" | "sym" | "kw" | "list"``."""

    kind: str
    value: object
    line: int = 0
    col: int = 0

    @property
    def is_list(self) -> bool:
        return self.kind == "list"

    @property
    def items(self) -> tuple["SExpr", ...]:
        if self.kind != "list":
            raise SExprError("expected a list", self.line, self.col)
        return self.value  # type: ignore[return-value]

    def sym(self) -> str:
        if self.kind != "sym":
            raise SExprError("expected a symbol", self.line, self.col)
        return self.value  # type: ignore[return-value]

    def kw(self) -> str:
        if self.kind != "kw":
            raise SExprError("expected a :keyword", self.line, self.col)
        return self.value  # type: ignore[return-value]

    def pos(self) -> tuple[int, int]:
        return (self.line, self.col)


def _tokenize(text: str):
    """Yield (kind, value, line, col) tokens; kind is '(' ')' 'atom'."""
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in _WS:
            i += 1
            col += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            yield (ch, ch, line, col)
            i += 1
            col += 1
            continue
        start, scol = i, col
        while i < n and text[i] not in _WS and text[i] not in _DELIMS:
            i += 1
            col += 1
        yield ("atom", text[start:i], line, scol)


def _atom(tok_text: str, line: int, col: int) -> SExpr:
    if tok_text.isdigit():
        return SExpr("int", int(tok_text), line, col)
    if tok_text.startswith(":"):
        if len(tok_text) == 1:
            raise SExprError("empty keyword", line, col)
        return SExpr("kw", tok_text[1:], line, col)
    return SExpr("sym", tok_text, line, col)


def parse_sexprs(text: str) -> list[SExpr]:
    """Parse all top-level forms in ``text``."""
    stack: list[tuple[list[SExpr], int, int]] = []
    top: list[SExpr] = []
    for kind, value, line, col in _tokenize(text):
        if kind == "(":
            stack.append(([], line, col))
        elif kind == ")":
            if not stack:
                raise SExprError("unbalanced ')'", line, col)
            items, oline, ocol = stack.pop()
            node = SExpr("list", tuple(items), oline, ocol)
            (stack[-1][0] if stack else top).append(node)
        else:
            node = _atom(value, line, col)
            (stack[-1][0] if stack else top).append(node)
    if stack:
        _, oline, ocol = stack[-1]
        raise SExprError("unclosed '('", oline, ocol)
    return top


def to_text(node: SExpr) -> str:
    """Render one node on a single line."""
    if node.kind == "int":
        return str(node.value)
    if node.kind == "sym":
        return str(node.value)
    if node.kind == "kw":
        return ":" + str(node.value)
    return "(" + " ".join(to_text(x) for x in node.items) + ")"


def pretty(node: SExpr, indent: int = 0, width: int = 96) -> str:
    """Render a node, breaking long lists one child per line.

    The layout is deterministic, so re-rendering a parsed form always gives
    byte-identical text.
    """
    flat = to_text(node)
    if indent + len(flat) <= width or node.kind != "list" or not node.items:
        return flat
    items = node.items
    head = pretty(items[0], indent + 1, width)
    pad = " " * (indent + 2)
    lines = [f"({head}"]
    for child in items[1:]:
        lines.append(pad + pretty(child, indent + 2, width))
    lines[-1] += ")"
    return "\n".join(lines)


def sym(name: str) -> SExpr:
    return SExpr("sym", name)


def kw(name: str) -> SExpr:
    return SExpr("kw", name)


def num(value: int) -> SExpr:
    return SExpr("int", value)


def lst(*items: SExpr) -> SExpr:
    return SExpr("list", tuple(items))
