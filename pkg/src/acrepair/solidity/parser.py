"""Error-tolerant structural parser for Solidity 0.4-0.8 sources and snippets.

The parser works on the token stream and resynchronizes at ``;`` and ``}``
so truncated audit-report snippets still yield a usable model.  Assembly
blocks are kept as opaque ``other`` statements.  Declarations found outside
any contract (bare functions pasted from a report) are collected into a
synthetic contract named ``<toplevel>``.
"""
from __future__ import annotations

import logging
from typing import Iterable, Optional, Union

from ..errors import UsageError
from .lexer import COMMENT, IDENT, PUNCT, STRING, Token, tokenize
from .model import (
    TOPLEVEL,
    CommentSpan,
    ContractDef,
    Diagnostic,
    FunctionDef,
    ModifierDef,
    ModifierInvocation,
    Param,
    SourceUnit,
    Span,
    Statement,
    StateVarDef,
    TypeDecl,
)
from .operations import (
    detect_declaration,
    match_close,
    operations_from_tokens,
    parse_type,
    split_args,
    _top_level_assign,
)
from .version import VersionConstraint

log = logging.getLogger(__name__)

VISIBILITY = ("public", "external", "internal", "private")
MUTABILITY = ("pure", "view", "payable", "constant")
STATE_VAR_ATTRS = ("public", "private", "internal", "constant", "immutable", "transient")
STATEMENT_STARTERS = frozenset(
    "if for while do return emit require assert revert throw break continue unchecked assembly try".split()
)

_MEMBER_STARTS = frozenset({"function", "modifier", "constructor", "event", "error", "struct", "enum", "receive", "fallback"})


def parse_sources(files: Iterable[tuple[str, Union[str, bytes]]]) -> list[SourceUnit]:
    """Parse every ``(path, text)`` pair; never raises on malformed input."""
    files = list(files)
    if not files:
        raise UsageError("no input files")
    return [parse_source(path, text) for path, text in files]


def parse_source(path: str, text: Union[str, bytes]) -> SourceUnit:
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    parser = _Parser(path, text)
    try:
        return parser.parse()
    except Exception as exc:  # totality guard; fuzz tests assert this never fires
        log.exception("internal parser error in %s", path)
        parser.diag(Span(0, len(text)), f"internal parser error: {exc}")
        return SourceUnit(path, text, parser.pragma, parser.contracts, parser.diagnostics, [])


class _Parser:
    def __init__(self, path: str, raw: str):
        self.path = path
        self.raw = raw
        all_tokens, lex_diags = tokenize(raw)
        self.comment_tokens = [t for t in all_tokens if t.kind == COMMENT]
        self.toks = [t for t in all_tokens if t.kind != COMMENT]
        self.diagnostics: list[Diagnostic] = [Diagnostic(Span(d.start, d.end), d.message) for d in lex_diags]
        self.pragma: Optional[VersionConstraint] = None
        self.contracts: list[ContractDef] = []

    # -- helpers ---------------------------------------------------------------

    def diag(self, span: Span, message: str, severity: str = "error") -> None:
        self.diagnostics.append(Diagnostic(span, message, severity))

    def tok(self, i: int) -> Optional[Token]:
        return self.toks[i] if 0 <= i < len(self.toks) else None

    def at(self, i: int, *texts: str) -> bool:
        t = self.tok(i)
        return t is not None and t.is_(*texts)

    def text(self, a: int, b: int) -> str:
        """Raw text from token a to token b inclusive."""
        return self.raw[self.toks[a].start:self.toks[b].end]

    def span(self, a: int, b: int) -> Span:
        return Span(self.toks[a].start, self.toks[b].end)

    def eof_span(self) -> Span:
        return Span(len(self.raw), len(self.raw))

    def close_of(self, i: int) -> int:
        j = match_close(self.toks, i)
        if j >= len(self.toks):
            self.diag(Span(self.toks[i].start, len(self.raw)), f"unclosed '{self.toks[i].text}'")
            return len(self.toks) - 1
        return j

    def skip_to_semicolon(self, i: int, stop_at_brace: bool = True) -> int:
        """Index after the next depth-0 ';' (or at a depth-0 '}' when allowed)."""
        depth = 0
        n = len(self.toks)
        while i < n:
            t = self.toks[i]
            if t.kind == PUNCT:
                if t.text in "([{":
                    depth += 1
                elif t.text in ")]}":
                    if depth == 0 and t.text == "}" and stop_at_brace:
                        return i
                    depth = max(0, depth - 1)
                elif t.text == ";" and depth == 0:
                    return i + 1
            i += 1
        return n

    # -- top level -------------------------------------------------------------

    def parse(self) -> SourceUnit:
        toplevel = _Members()
        i, n = 0, len(self.toks)
        while i < n:
            t = self.toks[i]
            if t.is_("pragma"):
                end = self.skip_to_semicolon(i)
                if self.at(i + 1, "solidity") and self.pragma is None:
                    last = end - 1 if self.at(end - 1, ";") else end
                    expr = self.raw[self.toks[i + 1].end:self.toks[last].start if last < n else len(self.raw)]
                    self.pragma = VersionConstraint.parse(expr.strip().rstrip(";"))
                    if not self.pragma.known:
                        self.diag(self.span(i, min(end, n) - 1), "unrecognized pragma solidity form", "warning")
                i = end
            elif t.is_("import"):
                i = self.skip_to_semicolon(i)
            elif t.is_("contract", "interface", "library") or (t.is_("abstract") and self.at(i + 1, "contract")):
                i = self.parse_contract(i)
            elif t.is_("}"):
                self.diag(self.span(i, i), "unmatched '}'")
                i += 1
            else:
                i = self.parse_member(i, TOPLEVEL, toplevel)
        if toplevel:
            start = min(m.span.start for m in toplevel.all())
            end = max(m.span.end for m in toplevel.all())
            self.contracts.append(toplevel.to_contract(TOPLEVEL, "contract", [], Span(start, end), "", None, synthetic=True))
        self.contracts.sort(key=lambda c: c.span.start)
        unit_comments = self.attach_comments()
        self.diagnostics.sort(key=lambda d: (d.span.start, d.span.end, d.message))
        return SourceUnit(self.path, self.raw, self.pragma, self.contracts, self.diagnostics, unit_comments)

    def parse_contract(self, i: int) -> int:
        start = i
        kind = "contract"
        if self.at(i, "abstract"):
            kind = "abstract"
            i += 1
        elif self.toks[i].text in ("interface", "library"):
            kind = self.toks[i].text
        i += 1
        name_tok = self.tok(i)
        if name_tok is None or name_tok.kind != IDENT:
            self.diag(self.span(start, min(i, len(self.toks) - 1)), "missing contract name")
            return self.skip_to_semicolon(i)
        name = name_tok.text
        i += 1
        inherits: list[str] = []
        if self.at(i, "is"):
            i += 1
            while i < len(self.toks) and not self.at(i, "{"):
                t = self.toks[i]
                if t.kind == IDENT:
                    path = [t.text]
                    while self.at(i + 1, ".") and self.tok(i + 2) is not None and self.toks[i + 2].kind == IDENT:
                        path.append(self.toks[i + 2].text)
                        i += 2
                    inherits.append(path[-1])
                    i += 1
                    if self.at(i, "("):
                        i = self.close_of(i) + 1
                elif t.is_(","):
                    i += 1
                else:
                    self.diag(self.span(i, i), f"unexpected token '{t.text}' in inheritance list")
                    i += 1
        if not self.at(i, "{"):
            self.diag(self.span(start, min(i, len(self.toks) - 1)), f"missing body for {kind} {name}")
            return i
        header_text = self.raw[self.toks[start].start:self.toks[i - 1].end]
        open_idx = i
        members = _Members()
        i += 1
        while i < len(self.toks) and not self.at(i, "}"):
            i = self.parse_member(i, name, members)
        if i >= len(self.toks):
            self.diag(Span(self.toks[open_idx].start, len(self.raw)), f"unterminated {kind} {name}")
            end_off = len(self.raw)
            body_span = Span(self.toks[open_idx].end, end_off)
            nxt = len(self.toks)
        else:
            end_off = self.toks[i].end
            body_span = Span(self.toks[open_idx].end, self.toks[i].start)
            nxt = i + 1
        span = Span(self.toks[start].start, end_off)
        self.contracts.append(members.to_contract(name, kind, inherits, span, header_text, body_span))
        return nxt

    # -- members ---------------------------------------------------------------

    def parse_member(self, i: int, contract: str, out: "_Members") -> int:
        t = self.toks[i]
        if t.is_(";"):
            return i + 1
        if t.is_("function"):
            return self.parse_function(i, contract, out)
        if t.is_("constructor", "fallback", "receive") and self.at(i + 1, "("):
            return self.parse_function(i, contract, out)
        if t.is_("modifier"):
            return self.parse_modifier(i, contract, out)
        if t.is_("event", "error") and self.tok(i + 1) is not None and self.toks[i + 1].kind == IDENT and self.at(i + 2, "("):
            close = self.close_of(i + 2)
            params = self.parse_params(i + 2, close)
            end = self.skip_to_semicolon(close + 1)
            out.types.append(TypeDecl(t.text, self.toks[i + 1].text, contract, params, self.span(i, max(i, end - 1))))
            return end
        if t.is_("struct", "enum") and self.tok(i + 1) is not None and self.at(i + 2, "{"):
            close = self.close_of(i + 2)
            out.types.append(TypeDecl(t.text, self.toks[i + 1].text, contract, [], self.span(i, close)))
            return close + 1
        if t.is_("type") and self.tok(i + 1) is not None and self.at(i + 2, "is"):
            end = self.skip_to_semicolon(i)
            out.types.append(TypeDecl("type", self.toks[i + 1].text, contract, [], self.span(i, max(i, end - 1))))
            return end
        if t.is_("using"):
            return self.skip_to_semicolon(i)
        if t.is_("pragma", "import"):
            return self.skip_to_semicolon(i)
        return self.parse_state_var(i, contract, out)

    def parse_params(self, open_idx: int, close_idx: int) -> list[Param]:
        params: list[Param] = []
        group: list[Token] = []
        depth = 0
        for j in range(open_idx + 1, close_idx + 1):
            t = self.toks[j]
            if j == close_idx or (t.is_(",") and depth == 0):
                if group:
                    params.append(self._param_from(group))
                group = []
                continue
            if t.kind == PUNCT and t.text in "([{":
                depth += 1
            elif t.kind == PUNCT and t.text in ")]}":
                depth -= 1
            group.append(t)
        return params

    def _param_from(self, group: list[Token]) -> Param:
        end = parse_type(group, 0)
        if end is None:
            end = len(group)
        type_name = self.raw[group[0].start:group[end - 1].end] if end > 0 else ""
        rest = [t for t in group[end:] if t.kind == IDENT and t.text not in ("memory", "storage", "calldata", "indexed", "payable")]
        return Param(rest[-1].text if rest else "", type_name)

    def parse_function(self, i: int, contract: str, out: "_Members") -> int:
        start = i
        kw = self.toks[i].text
        kind = kw if kw in ("constructor", "fallback", "receive") else "function"
        name = kw if kind != "function" else ""
        i += 1
        if kind == "function" and self.tok(i) is not None and self.toks[i].kind == IDENT:
            name = self.toks[i].text
            i += 1
        if kind == "function" and not name:
            kind, name = "fallback", "fallback"
        if kind == "function" and name == contract:
            kind = "constructor"
        if not self.at(i, "("):
            self.diag(self.span(start, min(i, len(self.toks) - 1)), f"expected '(' after function {name}")
            return self.recover_member(i)
        close = self.close_of(i)
        params = self.parse_params(i, close)
        i = close + 1
        visibility, mutability = "unset", "nonpayable"
        modifiers: list[ModifierInvocation] = []
        returns: list[Param] = []
        is_virtual = False
        last_sig = close
        while i < len(self.toks):
            t = self.toks[i]
            if t.is_("{", ";"):
                break
            if t.kind == IDENT and t.text in VISIBILITY:
                visibility = t.text
            elif t.kind == IDENT and t.text in MUTABILITY:
                mutability = "view" if t.text == "constant" else t.text
            elif t.is_("virtual"):
                is_virtual = True
            elif t.is_("override"):
                if self.at(i + 1, "("):
                    i = self.close_of(i + 1)
            elif t.is_("returns") and self.at(i + 1, "("):
                rclose = self.close_of(i + 1)
                returns = self.parse_params(i + 1, rclose)
                i = rclose
            elif t.kind == IDENT and t.text not in STATEMENT_STARTERS and t.text not in ("function", "modifier", "event"):
                mstart = i
                path_end = i
                while self.at(path_end + 1, ".") and self.tok(path_end + 2) is not None and self.toks[path_end + 2].kind == IDENT:
                    path_end += 2
                args: tuple[str, ...] = ()
                if self.at(path_end + 1, "("):
                    args, mclose = split_args(self.toks, path_end + 1, self.raw)
                    mclose = min(mclose, len(self.toks) - 1)
                    i = mclose
                else:
                    i = path_end
                modifiers.append(ModifierInvocation(self.toks[path_end].text, args, self.span(mstart, i)))
            else:
                break
            last_sig = i
            i += 1
        sig_span = self.span(start, last_sig)
        sig_text = self.raw[sig_span.start:sig_span.end]
        body: list[Statement] = []
        has_body = False
        body_span = None
        if self.at(i, "{"):
            has_body = True
            body, close_b = self.parse_block(i)
            body_span = Span(self.toks[i].end, self.toks[close_b].start if close_b < len(self.toks) and self.at(close_b, "}") else len(self.raw))
            end_idx = min(close_b, len(self.toks) - 1)
            nxt = close_b + 1
        elif self.at(i, ";"):
            end_idx = i
            nxt = i + 1
        else:
            self.diag(sig_span, f"missing body for function {name}")
            end_idx = last_sig
            nxt = i
        out.functions.append(
            FunctionDef(
                name=name,
                contract=contract,
                kind=kind,
                params=params,
                returns=returns,
                visibility=visibility,
                mutability=mutability,
                modifiers=modifiers,
                body=body,
                has_body=has_body,
                signature_text=sig_text,
                signature_span=sig_span,
                span=Span(self.toks[start].start, self.toks[end_idx].end),
                body_span=body_span,
                is_virtual=is_virtual,
            )
        )
        return nxt

    def parse_modifier(self, i: int, contract: str, out: "_Members") -> int:
        start = i
        i += 1
        name_tok = self.tok(i)
        if name_tok is None or name_tok.kind != IDENT:
            self.diag(self.span(start, start), "missing modifier name")
            return self.recover_member(i)
        i += 1
        params: list[Param] = []
        if self.at(i, "("):
            close = self.close_of(i)
            params = self.parse_params(i, close)
            i = close + 1
        last_sig = i - 1
        while i < len(self.toks) and not self.at(i, "{", ";"):
            t = self.toks[i]
            if t.is_("override") and self.at(i + 1, "("):
                i = self.close_of(i + 1)
            elif not (t.kind == IDENT and t.text in ("virtual", "override")):
                break
            last_sig = i
            i += 1
        sig_span = self.span(start, last_sig)
        body: list[Statement] = []
        has_body = False
        body_span = None
        if self.at(i, "{"):
            has_body = True
            body, close_b = self.parse_block(i)
            end_idx = min(close_b, len(self.toks) - 1)
            body_span = Span(self.toks[i].end, self.toks[end_idx].start)
            nxt = close_b + 1
        elif self.at(i, ";"):
            end_idx, nxt = i, i + 1
        else:
            self.diag(sig_span, f"missing body for modifier {name_tok.text}")
            end_idx, nxt = last_sig, i
        mod = ModifierDef(
            name=name_tok.text,
            contract=contract,
            params=params,
            body=body,
            has_body=has_body,
            signature_text=self.raw[sig_span.start:sig_span.end],
            signature_span=sig_span,
            span=Span(self.toks[start].start, self.toks[end_idx].end),
            body_span=body_span,
        )
        if has_body and not mod.has_placeholder:
            self.diag(sig_span, f"modifier {mod.name} has no '_;' placeholder", "warning")
        out.modifiers.append(mod)
        return nxt

    def parse_state_var(self, i: int, contract: str, out: "_Members") -> int:
        start = i
        end_type = parse_type(self.toks, i)
        if end_type is None:
            self.diag(self.span(i, i), f"unexpected token '{self.toks[i].text}'")
            return self.recover_member(i)
        j = end_type
        visibility = "internal"
        constant = immutable = False
        while j < len(self.toks) and self.toks[j].kind == IDENT and (
            self.toks[j].text in STATE_VAR_ATTRS or self.toks[j].text == "override"
        ):
            word = self.toks[j].text
            if word in VISIBILITY:
                visibility = word
            constant = constant or word == "constant"
            immutable = immutable or word == "immutable"
            if word == "override" and self.at(j + 1, "("):
                j = self.close_of(j + 1)
            j += 1
        name_tok = self.tok(j)
        if name_tok is None or name_tok.kind != IDENT or not (self.at(j + 1, "=", ";") or self.tok(j + 1) is None or self.at(j + 1, "}")):
            self.diag(self.span(start, min(j, len(self.toks) - 1)), "unrecognized contract member")
            return self.recover_member(i)
        initializer = None
        end = j + 1
        if self.at(j + 1, "="):
            end = self.skip_to_semicolon(j + 2)
            last = end - 1 if self.at(end - 1, ";") else end - 1
            if last >= j + 2:
                init_last = last - 1 if self.at(last, ";") else last
                initializer = self.text(j + 2, init_last) if init_last >= j + 2 else ""
        if self.at(end - 1, ";"):
            last_idx = end - 1
        elif self.at(end, ";"):
            last_idx = end
            end += 1
        else:
            self.diag(self.span(start, min(end, len(self.toks)) - 1), "missing ';' after state variable")
            last_idx = min(end, len(self.toks)) - 1
        span = self.span(start, last_idx)
        out.state_vars.append(
            StateVarDef(
                name=name_tok.text,
                contract=contract,
                type_name=self.text(start, end_type - 1),
                visibility=visibility,
                initializer=initializer,
                span=span,
                text=self.raw[span.start:span.end],
                constant=constant,
                immutable=immutable,
            )
        )
        return end

    def recover_member(self, i: int) -> int:
        """Skip a malformed member: to the next depth-0 ';', past a balanced '{...}',
        or up to a keyword that starts the next member."""
        n = len(self.toks)
        depth = 0
        start = i
        while i < n:
            t = self.toks[i]
            if i > start and depth == 0 and t.kind == IDENT and t.text in _MEMBER_STARTS:
                return i
            if t.kind == PUNCT:
                if t.text in "([":
                    depth += 1
                elif t.text in ")]":
                    depth = max(0, depth - 1)
                elif t.text == "{":
                    close = self.close_of(i)
                    return close + 1
                elif t.text == "}":
                    return i if i > start else i + 1
                elif t.text == ";" and depth == 0:
                    return i + 1
            i += 1
        return n

    # -- statements ------------------------------------------------------------

    def parse_block(self, open_idx: int) -> tuple[list[Statement], int]:
        stmts: list[Statement] = []
        i = open_idx + 1
        n = len(self.toks)
        while i < n and not self.at(i, "}"):
            before = i
            parsed, i = self.parse_statement(i)
            stmts.extend(parsed)
            if i <= before:  # guarantee progress
                i = before + 1
        if i >= n:
            self.diag(Span(self.toks[open_idx].start, len(self.raw)), "unterminated block")
        return stmts, i

    def parse_statement(self, i: int) -> tuple[list[Statement], int]:
        t = self.toks[i]
        if t.is_("{"):
            stmts, close = self.parse_block(i)
            return stmts, close + 1
        if t.is_("unchecked") and self.at(i + 1, "{"):
            stmts, close = self.parse_block(i + 1)
            return stmts, close + 1
        if t.is_("if") and self.at(i + 1, "("):
            return self.parse_if(i)
        if t.is_("for", "while") and self.at(i + 1, "("):
            close = self.close_of(i + 1)
            header_ops = operations_from_tokens(self.toks[i + 2:close], self.raw)
            body, nxt = self.parse_statement(close + 1) if close + 1 < len(self.toks) else ([], close + 1)
            end_idx = max(close, nxt - 1)
            end_idx = min(end_idx, len(self.toks) - 1)
            return [self._control(i, end_idx, close, header_ops, body)], nxt
        if t.is_("do"):
            body, j = self.parse_statement(i + 1) if i + 1 < len(self.toks) else ([], i + 1)
            header_ops = []
            end_idx = min(j, len(self.toks)) - 1
            if self.at(j, "while") and self.at(j + 1, "("):
                close = self.close_of(j + 1)
                header_ops = operations_from_tokens(self.toks[j + 2:close], self.raw)
                end = self.skip_to_semicolon(close + 1)
                end_idx = min(end, len(self.toks)) - 1
                j = end
            stmt = self._control(i, end_idx, i, header_ops, body)
            return [stmt], j
        if t.is_("assembly"):
            j = i + 1
            while j < len(self.toks) and not self.at(j, "{"):
                j += 1
            if j >= len(self.toks):
                return [self._simple(i, len(self.toks) - 1, "other", ops=False)], j
            close = self.close_of(j)
            return [self._simple(i, close, "other", ops=False)], close + 1
        if t.is_("try"):
            return self.parse_try(i)
        if t.is_("function", "modifier", "event", "struct", "contract") and self.tok(i + 1) is not None and self.toks[i + 1].kind == IDENT:
            # declaration misplaced inside a body
            end = self.recover_member(i + 1)
            end_idx = min(end, len(self.toks)) - 1
            self.diag(self.span(i, end_idx), f"'{t.text}' declaration inside a function body")
            return [self._simple(i, end_idx, "other", ops=False)], end
        # simple statement up to ';'
        end, missing = self._statement_end(i)
        last = end - 1
        if missing:
            self.diag(self.span(i, max(i, last)), "missing ';'")
        kind = self._classify(i, last)
        return [self._simple(i, last, kind)], end

    def _statement_end(self, i: int) -> tuple[int, bool]:
        """Index after the statement starting at ``i`` and whether ';' was missing."""
        n = len(self.toks)
        depth = 0
        j = i
        while j < n:
            t = self.toks[j]
            if t.kind == PUNCT:
                if t.text in "([{":
                    depth += 1
                elif t.text in ")]}":
                    if depth == 0:
                        return j, True
                    depth -= 1
                elif t.text == ";" and depth == 0:
                    return j + 1, False
            elif (
                depth == 0
                and j > i
                and t.kind == IDENT
                and t.text in STATEMENT_STARTERS
                and self.raw.count("\n", self.toks[j - 1].end, t.start) > 0
                and not self.toks[j - 1].is_(",", "(", "=", "&&", "||", "?", ":")
            ):
                return j, True
            j += 1
        return n, True

    def _classify(self, a: int, b: int) -> str:
        first = self.toks[a]
        code = [t for t in self.toks[a:b + 1] if not t.is_(";")]
        if first.is_("return"):
            return "return"
        if first.is_("require", "assert"):
            return "require"
        if first.is_("emit", "revert"):
            return "call"
        if first.is_("throw", "_", "break", "continue"):
            return "other"
        if detect_declaration(code, self.raw) is not None:
            return "decl"
        if _top_level_assign(code) is not None:
            return "assign"
        if code and code[-1].is_(")") and first.kind == IDENT:
            return "call"
        return "expr"

    def _simple(self, a: int, b: int, kind: str, ops: bool = True) -> Statement:
        b = max(a, min(b, len(self.toks) - 1))
        span = self.span(a, b)
        toks = self.toks[a:b + 1]
        declared = []
        if kind == "decl":
            d = detect_declaration([t for t in toks if not t.is_(";")], self.raw)
            declared = d[0] if d else []
        return Statement(
            kind=kind,
            text=self.raw[span.start:span.end],
            span=span,
            operations=operations_from_tokens(toks, self.raw) if ops else [],
            declared=declared,
        )

    def _control(self, a: int, b: int, header_end: int, header_ops, children, else_children=(), kind="control") -> Statement:
        b = max(a, min(b, len(self.toks) - 1))
        span = self.span(a, b)
        return Statement(
            kind=kind,
            text=self.raw[span.start:span.end],
            span=span,
            operations=list(header_ops),
            children=list(children),
            else_children=list(else_children),
            header=self.span(a, min(header_end, len(self.toks) - 1)),
        )

    def parse_if(self, i: int) -> tuple[list[Statement], int]:
        close = self.close_of(i + 1)
        header_ops = operations_from_tokens(self.toks[i + 2:close], self.raw)
        if close + 1 >= len(self.toks):
            self.diag(self.span(i, close), "missing if body")
            return [self._control(i, close, close, header_ops, [])], close + 1
        then, j = self.parse_statement(close + 1)
        else_branch: list[Statement] = []
        if self.at(j, "else") and j + 1 < len(self.toks):
            else_branch, j = self.parse_statement(j + 1)
        end_idx = min(j, len(self.toks)) - 1
        reverts = len(then) == 1 and (
            then[0].text.startswith("revert") or then[0].text.startswith("throw")
        )
        kind = "ifRevert" if reverts and not else_branch else "control"
        return [self._control(i, end_idx, close, header_ops, then, else_branch, kind)], j

    def parse_try(self, i: int) -> tuple[list[Statement], int]:
        j = i + 1
        n = len(self.toks)
        while j < n and not self.at(j, "{", "returns"):
            if self.at(j, "("):
                j = self.close_of(j)
            j += 1
        header_ops = operations_from_tokens(self.toks[i + 1:j], self.raw)
        header_end = j - 1
        if self.at(j, "returns") and self.at(j + 1, "("):
            j = self.close_of(j + 1) + 1
        if not self.at(j, "{"):
            end, _ = self._statement_end(i)
            return [self._simple(i, end - 1, "other")], end
        body, close = self.parse_block(j)
        j = close + 1
        catches: list[Statement] = []
        while self.at(j, "catch"):
            k = j + 1
            while k < n and not self.at(k, "{"):
                k += 1
            if k >= n:
                j = n
                break
            stmts, cclose = self.parse_block(k)
            catches.extend(stmts)
            j = cclose + 1
        end_idx = min(j, n) - 1
        return [self._control(i, end_idx, max(i, header_end), header_ops, body, catches)], j

    # -- comments --------------------------------------------------------------

    def attach_comments(self) -> list[CommentSpan]:
        unit_comments: list[CommentSpan] = []
        for ct in self.comment_tokens:
            span = Span(ct.start, ct.end)
            owner = next((c for c in self.contracts if c.span.contains(span) and not c.synthetic), None)
            if owner is None:
                owner = next((c for c in self.contracts if c.synthetic and c.span.start <= span.start <= c.span.end), None)
            cs = CommentSpan(ct.text, span)
            if owner is not None:
                cs.attached_to = _attach_target(owner, span)
                owner.comments.append(cs)
            else:
                following = [c for c in self.contracts if c.span.start >= span.end]
                if following:
                    nxt = min(following, key=lambda c: c.span.start)
                    cs.attached_to = ("contract", nxt.name)
                unit_comments.append(cs)
        return unit_comments


def _attach_target(contract: ContractDef, span: Span) -> Optional[tuple[str, str]]:
    members: list[tuple[str, str, Span]] = []
    members += [("function", f.name, f.span) for f in contract.functions]
    members += [("modifier", m.name, m.span) for m in contract.modifiers]
    members += [("stateVar", v.name, v.span) for v in contract.state_vars]
    members += [(t.kind, t.name, t.span) for t in contract.types]
    for kind, name, mspan in members:
        if mspan.start <= span.start and span.end <= mspan.end:
            return (kind, name)
    after = [m for m in members if m[2].start >= span.end]
    if after:
        kind, name, _ = min(after, key=lambda m: m[2].start)
        return (kind, name)
    return ("contract", contract.name)


class _Members:
    def __init__(self) -> None:
        self.functions: list[FunctionDef] = []
        self.modifiers: list[ModifierDef] = []
        self.state_vars: list[StateVarDef] = []
        self.types: list[TypeDecl] = []

    def all(self):
        return [*self.functions, *self.modifiers, *self.state_vars, *self.types]

    def __bool__(self) -> bool:
        return bool(self.all())

    def to_contract(self, name, kind, inherits, span, header_text, body_span, synthetic=False) -> ContractDef:
        seen: dict[str, int] = {}
        for fn in self.functions:
            fn.ordinal = seen.get(fn.name, 0)
            seen[fn.name] = fn.ordinal + 1
        return ContractDef(
            name=name,
            kind=kind,
            inherits=inherits,
            functions=self.functions,
            modifiers=self.modifiers,
            state_vars=self.state_vars,
            types=self.types,
            comments=[],
            span=span,
            header_text=header_text,
            body_span=body_span,
            synthetic=synthetic,
        )
