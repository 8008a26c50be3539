"""Tolerant Solidity tokenizer.

Every character of the input ends up either inside a token or in the
whitespace between tokens, so spans can always be mapped back to ``raw``.
Malformed input (unterminated strings/comments, stray bytes) yields
diagnostics instead of exceptions.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

IDENT = "ident"
NUMBER = "number"
STRING = "string"
PUNCT = "punct"
COMMENT = "comment"
ERROR = "error"

# longest first
_PUNCTUATORS = sorted(
    """>>>= >>> <<= >>= ** => -> := == != <= >= && || ++ -- += -= *= /= %= |= &= ^= << >>
    ( ) { } [ ] ; , . ? : = + - * / % ! ~ & | ^ < > @""".split(),
    key=len,
    reverse=True,
)

_IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_NUMBER_RE = re.compile(r"0[xX][0-9a-fA-F_]*|(?:\d[\d_]*(?:\.\d[\d_]*)?|\.\d[\d_]*)(?:[eE]-?\d+)?")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int
    end: int

    def is_(self, *texts: str) -> bool:
        return self.kind in (IDENT, PUNCT) and self.text in texts


@dataclass(frozen=True)
class LexDiagnostic:
    start: int
    end: int
    message: str


def tokenize(raw: str) -> tuple[list[Token], list[LexDiagnostic]]:
    """Split ``raw`` into tokens, comments included (kind ``comment``)."""
    tokens: list[Token] = []
    diags: list[LexDiagnostic] = []
    i, n = 0, len(raw)
    while i < n:
        m = _WS_RE.match(raw, i)
        if m:
            i = m.end()
            continue
        ch = raw[i]
        if raw.startswith("//", i):
            j = raw.find("\n", i)
            j = n if j < 0 else j
            tokens.append(Token(COMMENT, raw[i:j], i, j))
            i = j
            continue
        if raw.startswith("/*", i):
            j = raw.find("*/", i + 2)
            if j < 0:
                diags.append(LexDiagnostic(i, n, "unterminated block comment"))
                j = n
            else:
                j += 2
            tokens.append(Token(COMMENT, raw[i:j], i, j))
            i = j
            continue
        if ch in "\"'":
            j = _scan_string(raw, i)
            if j < 0:
                diags.append(LexDiagnostic(i, i + 1, "unterminated string literal"))
                j = raw.find("\n", i)
                j = n if j < 0 else j
            tokens.append(Token(STRING, raw[i:j], i, j))
            i = j
            continue
        m = _IDENT_RE.match(raw, i)
        if m:
            word = m.group()
            # hex"..." / unicode"..." literals
            if word in ("hex", "unicode") and m.end() < n and raw[m.end()] in "\"'":
                j = _scan_string(raw, m.end())
                if j > 0:
                    tokens.append(Token(STRING, raw[i:j], i, j))
                    i = j
                    continue
            tokens.append(Token(IDENT, word, i, m.end()))
            i = m.end()
            continue
        m = _NUMBER_RE.match(raw, i)
        if m and m.end() > i and (ch.isdigit() or (ch == "." and i + 1 < n and raw[i + 1].isdigit())):
            tokens.append(Token(NUMBER, m.group(), i, m.end()))
            i = m.end()
            continue
        for p in _PUNCTUATORS:
            if raw.startswith(p, i):
                tokens.append(Token(PUNCT, p, i, i + len(p)))
                i += len(p)
                break
        else:
            diags.append(LexDiagnostic(i, i + 1, f"unexpected character {ch!r}"))
            tokens.append(Token(ERROR, ch, i, i + 1))
            i += 1
    return tokens, diags


def _scan_string(raw: str, i: int) -> int:
    quote = raw[i]
    j = i + 1
    while j < len(raw):
        c = raw[j]
        if c == "\\":
            j += 2
            continue
        if c == quote:
            return j + 1
        if c == "\n":
            return -1
        j += 1
    return -1
