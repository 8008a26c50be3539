"""Splitting statements into operations with identifier-level read/write sets.

Splitting rules (deterministic):

* ``;`` at bracket depth 0 ends an operation (two statements on one line
  become two operations);
* inside pieces that do not assign, ``&&`` and ``||`` start a new operation,
  so each conjunct of a guard carries its own reads;
* an assignment or declaration piece stays whole so that its writes keep
  every read of the right-hand side.

Identifiers resolve by base name only: ``a[i].b = v`` writes ``a`` and reads
``i`` and ``v``.  ``msg.*``, ``tx.*``, ``block.*`` and ``now`` are ambient
read-only pseudo-variables named by their dotted path.
"""
from __future__ import annotations

from typing import Optional, Sequence

from .lexer import COMMENT, IDENT, NUMBER, PUNCT, STRING, Token, tokenize
from .model import Call, Operation, Span

ASSIGN_OPS = frozenset("= += -= *= /= %= |= &= ^= <<= >>= >>>=".split())
AMBIENT_ROOTS = frozenset({"msg", "tx", "block"})
UNITS = frozenset("wei gwei ether finney szabo seconds minutes hours days weeks years".split())
LOCATIONS = frozenset({"memory", "storage", "calldata"})
KEYWORDS = frozenset(
    """return returns emit delete new if else for while do break continue throw true false this super
    assembly unchecked try catch public private internal external pure view constant immutable override
    virtual indexed anonymous is using modifier function contract interface library event struct enum
    constructor fallback receive pragma import mapping memory storage calldata _""".split()
)


def is_elementary_type(word: str) -> bool:
    if word in ("address", "bool", "string", "bytes", "byte", "int", "uint", "fixed", "ufixed", "var"):
        return True
    for prefix in ("uint", "int", "bytes"):
        if word.startswith(prefix) and word[len(prefix):].isdigit():
            return True
    return False


def is_keyword(word: str) -> bool:
    return word in KEYWORDS or word in UNITS


def match_close(tokens: Sequence[Token], i: int) -> int:
    """Index of the bracket closing ``tokens[i]``; ``len(tokens)`` if unbalanced."""
    pairs = {"(": ")", "[": "]", "{": "}"}
    stack: list[str] = []
    for j in range(i, len(tokens)):
        t = tokens[j]
        if t.kind != PUNCT:
            continue
        if t.text in pairs:
            stack.append(pairs[t.text])
        elif t.text in (")", "]", "}"):
            if stack and stack[-1] == t.text:
                stack.pop()
                if not stack:
                    return j
            else:
                return j
    return len(tokens)


def split_args(tokens: Sequence[Token], open_idx: int, raw: str) -> tuple[tuple[str, ...], int]:
    """Top-level comma-separated argument texts of the bracket at ``open_idx``."""
    close = match_close(tokens, open_idx)
    args: list[str] = []
    depth = 0
    start = open_idx + 1
    for j in range(open_idx + 1, close):
        t = tokens[j]
        if t.kind == PUNCT and t.text in "([{":
            depth += 1
        elif t.kind == PUNCT and t.text in ")]}":
            depth -= 1
        elif t.kind == PUNCT and t.text == "," and depth == 0:
            args.append(_join(tokens[start:j], raw))
            start = j + 1
    last = _join(tokens[start:close], raw)
    if last or args:
        args.append(last)
    return tuple(args), close


def _join(tokens: Sequence[Token], raw: str) -> str:
    if not tokens:
        return ""
    return raw[tokens[0].start:tokens[-1].end]


def parse_type(tokens: Sequence[Token], i: int) -> Optional[int]:
    """Index just past a type name starting at ``i``, or None."""
    if i >= len(tokens):
        return None
    t = tokens[i]
    if t.kind != IDENT:
        return None
    if t.text == "mapping" and i + 1 < len(tokens) and tokens[i + 1].is_("("):
        j = match_close(tokens, i + 1) + 1
    elif t.text == "function" and i + 1 < len(tokens) and tokens[i + 1].is_("("):
        j = match_close(tokens, i + 1) + 1
        while j < len(tokens) and tokens[j].kind == IDENT and tokens[j].text in (
            "internal", "external", "pure", "view", "payable"
        ):
            j += 1
        if j < len(tokens) and tokens[j].is_("returns") and j + 1 < len(tokens) and tokens[j + 1].is_("("):
            j = match_close(tokens, j + 1) + 1
    elif is_keyword(t.text) and t.text != "mapping":
        return None
    else:
        j = i + 1
        while j + 1 < len(tokens) and tokens[j].is_(".") and tokens[j + 1].kind == IDENT:
            j += 2
        if t.text == "address" and j < len(tokens) and tokens[j].is_("payable"):
            j += 1
    while j < len(tokens) and tokens[j].is_("["):
        j = match_close(tokens, j) + 1
    return j


def detect_declaration(tokens: Sequence[Token], raw: str) -> Optional[tuple[list[tuple[str, str]], int]]:
    """Recognize a local variable declaration at the start of ``tokens``.

    Returns ``([(name, type)], index_after_declarators)`` or None.
    """
    if not tokens:
        return None
    if tokens[0].is_("("):
        close = match_close(tokens, 0)
        if close + 1 < len(tokens) and tokens[close + 1].is_("="):
            groups = _comma_groups(tokens, 1, close)
            declared = []
            for g in groups:
                if len(g) >= 2 and g[-1].kind == IDENT and not is_keyword(g[-1].text):
                    end = parse_type(g, 0)
                    if end is not None and end < len(g):
                        declared.append((g[-1].text, _join(g[:end], raw)))
            if declared:
                return declared, close + 1
        return None
    end = parse_type(tokens, 0)
    if end is None:
        return None
    k = end
    while k < len(tokens) and tokens[k].kind == IDENT and tokens[k].text in LOCATIONS:
        k += 1
    if k < len(tokens) and tokens[k].kind == IDENT and not is_keyword(tokens[k].text):
        nxt = tokens[k + 1] if k + 1 < len(tokens) else None
        if nxt is None or nxt.is_("=", ";", ",", ")"):
            return [(tokens[k].text, _join(tokens[:end], raw))], k + 1
    return None


def _comma_groups(tokens: Sequence[Token], lo: int, hi: int) -> list[list[Token]]:
    groups: list[list[Token]] = [[]]
    depth = 0
    for t in tokens[lo:hi]:
        if t.kind == PUNCT and t.text in "([{":
            depth += 1
        elif t.kind == PUNCT and t.text in ")]}":
            depth -= 1
        if t.kind == PUNCT and t.text == "," and depth == 0:
            groups.append([])
        else:
            groups[-1].append(t)
    return groups


class _Scan:
    """Reads, calls and base-path occurrences of an expression token run."""

    def __init__(self, tokens: Sequence[Token], raw: str):
        self.tokens = tokens
        self.raw = raw
        self.reads: set[str] = set()
        self.calls: list[Call] = []
        self.paths: list[tuple[str, int, int]] = []  # (base, first idx, last idx)
        self.is_return = False
        self._run()

    def _run(self) -> None:
        toks = self.tokens
        n = len(toks)
        brace_depth = 0
        i = 0
        while i < n:
            t = toks[i]
            prev = toks[i - 1] if i > 0 else None
            if t.kind == PUNCT:
                if t.text == "{":
                    brace_depth += 1
                elif t.text == "}":
                    brace_depth -= 1
                i += 1
                continue
            if t.kind != IDENT:
                i += 1
                continue
            word = t.text
            nxt = toks[i + 1] if i + 1 < n else None
            # named argument / call option label
            if nxt is not None and nxt.is_(":") and prev is not None and prev.is_("{", ",") and brace_depth > 0:
                i += 1
                continue
            if prev is not None and prev.is_("."):
                # member of a non-path expression, e.g. a[i].f(x) or IERC20(t).transfer(x)
                call_at = self._call_open(i + 1)
                if call_at is not None:
                    self._add_call(word, "<expr>", call_at, t)
                i += 1
                continue
            if word == "return":
                self.is_return = True
                i += 1
                continue
            if word == "emit":
                j = i + 1
                name_parts = []
                while j < n and toks[j].kind == IDENT:
                    name_parts.append(toks[j].text)
                    if j + 1 < n and toks[j + 1].is_("."):
                        j += 2
                        continue
                    j += 1
                    break
                if name_parts and j < n and toks[j].is_("("):
                    self._add_call(name_parts[-1], "emit", j, toks[i + 1])
                i = j
                continue
            if word == "revert" and nxt is not None and nxt.kind == IDENT:
                call_at = self._call_open(i + 2)
                if call_at is not None:
                    self._add_call(nxt.text, "revert", call_at, nxt)
                i = i + 2
                continue
            if word == "new":
                end = parse_type(toks, i + 1)
                i = end if end is not None else i + 1
                # `new C(args)` constructor call: args scanned normally
                continue
            if word == "type" and nxt is not None and nxt.is_("("):
                close = match_close(toks, i + 1)
                self._add_call("type", None, i + 1, t)
                i = close + 1
                continue
            if is_keyword(word):
                i += 1
                continue
            if is_elementary_type(word) or word == "payable":
                call_at = self._call_open(i + 1)
                if call_at is not None:
                    self._add_call(word, None, call_at, t)
                i += 1
                continue
            # identifier path
            j = i
            parts = [word]
            while j + 2 < n and toks[j + 1].is_(".") and toks[j + 2].kind == IDENT:
                parts.append(toks[j + 2].text)
                j += 2
            call_at = self._call_open(j + 1)
            if parts[0] in AMBIENT_ROOTS and len(parts) >= 2:
                base = parts[0] + "." + parts[1]
                if call_at is not None and len(parts) >= 3:
                    self._add_call(parts[-1], ".".join(parts[:-1]), call_at, toks[j])
                    self.reads.add(base)
                elif call_at is not None:
                    # msg.sender.call(...) style with two parts, e.g. abi-like namespaces
                    self._add_call(parts[-1], parts[0], call_at, toks[j])
                else:
                    self.reads.add(base)
                self.paths.append((base, i, j))
            elif word == "now":
                self.reads.add("now")
                self.paths.append(("now", i, j))
            elif call_at is not None:
                if len(parts) == 1:
                    self._add_call(word, None, call_at, t)
                else:
                    qualifier = ".".join(parts[:-1])
                    self._add_call(parts[-1], qualifier, call_at, toks[j])
                    if parts[0] not in ("this", "super", "abi"):
                        self.reads.add(parts[0])
                        self.paths.append((parts[0], i, j))
            elif word != "abi":
                self.reads.add(word)
                self.paths.append((word, i, j))
            i = j + 1

    def _call_open(self, k: int) -> Optional[int]:
        """Index of the '(' opening a call whose callee ends right before ``k``."""
        toks = self.tokens
        if k < len(toks) and toks[k].is_("{"):
            close = match_close(toks, k)
            k = close + 1
        if k < len(toks) and toks[k].is_("("):
            return k
        return None

    def _add_call(self, name: str, qualifier: Optional[str], open_idx: int, name_tok: Token) -> None:
        args, close = split_args(self.tokens, open_idx, self.raw)
        end_tok = self.tokens[min(close, len(self.tokens) - 1)]
        self.calls.append(Call(name, qualifier, args, Span(name_tok.start, max(end_tok.end, name_tok.end))))


def _analyze_piece(tokens: Sequence[Token], raw: str) -> tuple[set[str], set[str], list[Call], bool, list[tuple[str, str]]]:
    """reads, writes, calls, is_return, declared for one piece (or sub-piece)."""
    declared: list[tuple[str, str]] = []
    writes: set[str] = set()
    reads: set[str] = set()
    calls: list[Call] = []
    decl = detect_declaration(tokens, raw)
    rest = list(tokens)
    if decl is not None:
        declared, after = decl
        writes.update(name for name, _ in declared)
        rest = list(tokens[after:])
        if rest and rest[0].is_("="):
            rest = rest[1:]
        sc = _Scan(rest, raw)
        return sc.reads, writes, sc.calls, sc.is_return, declared
    assign_idx = _top_level_assign(rest)
    if assign_idx is not None:
        lhs, op, rhs = rest[:assign_idx], rest[assign_idx], rest[assign_idx + 1:]
        lscan = _Scan(lhs, raw)
        heads = _lhs_heads(lhs)
        for base, first, _last in lscan.paths:
            if first in heads:
                writes.add(base)
                if op.text != "=":
                    reads.add(base)
            else:
                reads.add(base)
        calls.extend(lscan.calls)
        r_reads, r_writes, r_calls, r_ret, _ = _analyze_piece(rhs, raw)
        reads |= r_reads
        writes |= r_writes
        calls.extend(r_calls)
        return reads, writes, calls, lscan.is_return or r_ret, declared
    sc = _Scan(rest, raw)
    reads |= sc.reads
    calls.extend(sc.calls)
    for k, t in enumerate(rest):
        if t.kind == PUNCT and t.text in ("++", "--"):
            target = _adjacent_path(rest, sc.paths, k)
            if target:
                writes.add(target)
        elif t.kind == IDENT and t.text == "delete":
            target = _adjacent_path(rest, sc.paths, k, after_only=True)
            if target:
                writes.add(target)
    return reads, writes, calls, sc.is_return, declared


def _top_level_assign(tokens: Sequence[Token]) -> Optional[int]:
    depth = 0
    for k, t in enumerate(tokens):
        if t.kind != PUNCT:
            continue
        if t.text in "([{":
            depth += 1
        elif t.text in ")]}":
            depth -= 1
        elif t.text in ASSIGN_OPS and depth == 0:
            return k
    return None


def _lhs_heads(lhs: Sequence[Token]) -> set[int]:
    """Token indices where an assignment target path begins."""
    # skip leading keywords like `return` that can't appear, but tolerate them
    start = 0
    while start < len(lhs) and lhs[start].kind == IDENT and lhs[start].text in ("return",):
        start += 1
    if start < len(lhs) and lhs[start].is_("("):
        heads = set()
        close = match_close(lhs, start)
        expect = True
        depth = 0
        for k in range(start + 1, close):
            t = lhs[k]
            if t.kind == PUNCT and t.text in "([{":
                depth += 1
            elif t.kind == PUNCT and t.text in ")]}":
                depth -= 1
            if t.kind == PUNCT and t.text == "," and depth == 0:
                expect = True
                continue
            if expect and t.kind == IDENT:
                heads.add(k)
            expect = False
        return heads
    return {start}


def _adjacent_path(
    tokens: Sequence[Token], paths: list[tuple[str, int, int]], k: int, after_only: bool = False
) -> Optional[str]:
    """Base of the path operand of a prefix/postfix operator at ``k``."""
    if not after_only:
        j = k - 1
        while j >= 0 and tokens[j].is_("]"):
            depth = 0
            while j >= 0:
                if tokens[j].is_("]"):
                    depth += 1
                elif tokens[j].is_("["):
                    depth -= 1
                    if depth == 0:
                        break
                j -= 1
            j -= 1
        for base, _first, last in paths:
            if last == j:
                return base
    for base, first, _last in paths:
        if first == k + 1:
            return base
    return None


def split_pieces(tokens: Sequence[Token]) -> list[list[Token]]:
    """Split at depth-0 ``;`` (kept with the preceding piece)."""
    pieces: list[list[Token]] = [[]]
    depth = 0
    for t in tokens:
        pieces[-1].append(t)
        if t.kind == PUNCT:
            if t.text in "([{":
                depth += 1
            elif t.text in ")]}":
                depth = max(0, depth - 1)
            elif t.text == ";" and depth == 0:
                pieces.append([])
    return [p for p in pieces if p]


def _logical_segments(piece: list[Token]) -> list[list[Token]]:
    segs: list[list[Token]] = [[]]
    bracket = 0
    for t in piece:
        if t.kind == PUNCT and t.text == "[":
            bracket += 1
        elif t.kind == PUNCT and t.text == "]":
            bracket -= 1
        if t.kind == PUNCT and t.text in ("&&", "||") and bracket == 0 and segs[-1]:
            segs.append([])
        segs[-1].append(t)
    return segs


def operations_from_tokens(tokens: Sequence[Token], raw: str) -> list[Operation]:
    """Operations for a token run whose offsets index into ``raw``."""
    code = [t for t in tokens if t.kind != COMMENT]
    ops: list[Operation] = []
    for piece in split_pieces(code):
        meaningful = [t for t in piece if not t.is_(";")]
        if not meaningful:
            # stray ';' is still covered text
            ops.append(Operation(_join(piece, raw), Span(piece[0].start, piece[-1].end)))
            continue
        is_assign = detect_declaration(meaningful, raw) is not None or _top_level_assign(meaningful) is not None
        segments = [piece] if is_assign else _logical_segments(piece)
        piece_return = False
        for seg in segments:
            reads, writes, calls, is_ret, _ = _analyze_piece([t for t in seg if not t.is_(";")], raw)
            piece_return = piece_return or is_ret
            ops.append(
                Operation(
                    text=_join(seg, raw),
                    span=Span(seg[0].start, seg[-1].end),
                    reads=frozenset(reads),
                    writes=frozenset(writes),
                    calls=tuple(calls),
                    is_return=piece_return,
                )
            )
    return ops


def declared_in(tokens: Sequence[Token], raw: str) -> list[tuple[str, str]]:
    code = [t for t in tokens if t.kind != COMMENT and not t.is_(";")]
    decl = detect_declaration(code, raw)
    return decl[0] if decl else []


def split_statement(text: str) -> list[Operation]:
    """Split one statement's text into operations (spans relative to ``text``)."""
    tokens, _ = tokenize(text)
    return operations_from_tokens([t for t in tokens if t.kind in (IDENT, NUMBER, STRING, PUNCT) or t.kind == "error"], text)
