from __future__ import annotations

import re
from typing import NamedTuple


class ParseError(ValueError):
    def __init__(self, msg, pos, expected=()):
        where = f" at position {pos}"
        exp = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(msg + where + exp)
        self.pos = pos
        self.expected = tuple(expected)


class Token(NamedTuple):
    kind: str  # ident | number | sym | end
    text: str
    pos: int


_LEX = re.compile(
    r"""\s*(?:
        (?P<number>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<sym>/\\|\\/|[~()\[\]{}<>*+;,/.])
    )""",
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    end = len(text.rstrip())
    while pos < end:
        m = _LEX.match(text, pos)
        if m is None or m.lastgroup is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        out.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(Token("end", "", end))
    return out


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, k=0) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def take(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def at(self, text) -> bool:
        tok = self.peek()
        return tok.kind in ("sym", "ident") and tok.text == text

    def accept(self, text) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text) -> Token:
        tok = self.peek()
        if not self.at(text):
            raise ParseError(f"unexpected {describe(tok)}", tok.pos, [repr(text)])
        return self.take()


def describe(tok: Token) -> str:
    return "end of input" if tok.kind == "end" else repr(tok.text)
