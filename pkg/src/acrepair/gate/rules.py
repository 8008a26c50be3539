"""The seven static validity rules applied to every generated patch.

Each rule owns a disjoint concern so a patch that breaks one rule leaves the
others passing:

* UndefinedTokens: modifiers, types, events and errors the patch names;
  parse errors that are not structural;
* InfeasibleInvocation: calls from the patched function (name and arity);
* MisusedTypes: state/local variable types kept across versions and
  address/non-address comparisons or assignments;
* SolidityVersion: version-gated constructs and pragma changes;
* MsgSenderCheck: a caller check guards the patched function;
* DefUse: every variable read or written is defined before use;
* StructuralCompat: signature, placement and member preservation.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

from ..analysis.program import BUILTIN_FUNCTIONS, BUILTIN_MEMBERS, Program
from ..solidity.lexer import COMMENT, IDENT, NUMBER, STRING, Token, tokenize
from ..solidity.model import (
    TOPLEVEL,
    FunctionDef,
    ModifierDef,
    SourceUnit,
    Span,
    Statement,
    StateVarDef,
    TypeDecl,
)
from ..solidity.operations import declared_in, is_elementary_type, is_keyword, match_close
from .features import features_used
from .subject import Member, PatchSubject, build_subject, norm_type

UNDEFINED_TOKENS = "UndefinedTokens"
INFEASIBLE_INVOCATION = "InfeasibleInvocation"
MISUSED_TYPES = "MisusedTypes"
SOLIDITY_VERSION = "SolidityVersion"
MSG_SENDER_CHECK = "MsgSenderCheck"
DEF_USE = "DefUse"
STRUCTURAL_COMPAT = "StructuralCompat"
RULES = (
    UNDEFINED_TOKENS,
    INFEASIBLE_INVOCATION,
    MISUSED_TYPES,
    SOLIDITY_VERSION,
    MSG_SENDER_CHECK,
    DEF_USE,
    STRUCTURAL_COMPAT,
)

STRUCTURAL_DIAGNOSTICS = (
    "declaration inside a function body",
    "unrecognized contract member",
    "unmatched '}'",
    "unclosed",
    "unterminated",
    "missing body",
)
AMBIENT_NAMES = frozenset({"now", "this", "super", "_", "abi", "type", "msg", "tx", "block"})
ROLE_CHECK_FUNCTIONS = frozenset({"_checkRole", "_checkOwner", "_onlyOwner", "_checkAdmin"})
_NUMBERISH = re.compile(r"^(u?int\d*|bytes\d+|bool|string|bytes|byte|literal)$")


@dataclass(frozen=True)
class Finding:
    text: str
    line: Optional[int] = None
    span: Optional[Span] = None

    def render(self) -> str:
        return f"{self.text} (line {self.line})" if self.line else self.text


@dataclass
class RuleVerdict:
    rule: str
    passed: bool
    messages: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.passed == bool(self.messages):
            raise ValueError("a verdict carries messages exactly when it fails")

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "pass": self.passed,
            "messages": [m.render() for m in self.messages],
            "warnings": [w.render() for w in self.warnings],
        }


def _verdict(rule: str, failures: Iterable[Finding], warnings: Iterable[Finding] = ()) -> RuleVerdict:
    seen: dict[str, Finding] = {}
    for f in failures:
        seen.setdefault(f.render(), f)
    warned: dict[str, Finding] = {}
    for w in warnings:
        warned.setdefault(w.render(), w)
    return RuleVerdict(rule, not seen, list(seen.values()), list(warned.values()))


@dataclass
class ValidationReport:
    verdicts: list[RuleVerdict]

    @property
    def overall_pass(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, rule: str) -> RuleVerdict:
        for v in self.verdicts:
            if v.rule == rule:
                return v
        raise KeyError(rule)

    @property
    def failed_rules(self) -> list[str]:
        return [v.rule for v in self.verdicts if not v.passed]

    def feedback(self) -> str:
        """Failure messages formatted for injection into a regeneration prompt."""
        lines = []
        for v in self.verdicts:
            for m in v.messages:
                lines.append(f"- [{v.rule}] {m.render()}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"overallPass": self.overall_pass, "verdicts": [v.to_dict() for v in self.verdicts]}


# -- shared helpers -----------------------------------------------------------------


def _code_tokens(text: str) -> list[Token]:
    toks, _ = tokenize(text)
    return [t for t in toks if t.kind != COMMENT]


def _line(unit: SourceUnit, span: Optional[Span]) -> Optional[int]:
    return unit.line_of(span.start) if span is not None else None


def _statements(m: Member) -> list[Statement]:
    if isinstance(m, (FunctionDef, ModifierDef)):
        return list(m.statements())
    return []


def _callables(region: Sequence[tuple[str, Member]]) -> list[tuple[str, Union[FunctionDef, ModifierDef]]]:
    return [(c, m) for c, m in region if isinstance(m, (FunctionDef, ModifierDef))]


def _type_idents(type_name: str) -> list[str]:
    out = []
    for t in _code_tokens(type_name):
        if t.kind != IDENT or is_elementary_type(t.text) or is_keyword(t.text) or t.text == "payable":
            continue
        out.append(t.text)
    return out


def _sender_end(toks: list[Token], i: int) -> int:
    """Index after ``msg.sender`` or ``_msgSender()`` starting at ``i``, else -1."""
    if toks[i].is_("msg") and i + 2 < len(toks) and toks[i + 1].is_(".") and toks[i + 2].is_("sender"):
        return i + 3
    if toks[i].is_("_msgSender") and i + 2 < len(toks) and toks[i + 1].is_("(") and toks[i + 2].is_(")"):
        return i + 3
    return -1


def _lineage_names(program: Program, contract: str) -> list[str]:
    return [c for c in program.lineage(contract) if c in program.contracts]


def _unresolved_bases(program: Program, contract: str) -> list[str]:
    return [c for c in program.ancestors(contract) if c not in program.contracts]


# -- undefined tokens ---------------------------------------------------


@dataclass(frozen=True)
class TokenSets:
    t_current: frozenset[str]
    t_inherited: frozenset[str]
    t_repaired: frozenset[str]
    t_declared: frozenset[str]

    @property
    def undefined(self) -> frozenset[str]:
        return self.t_repaired - self.t_current - self.t_inherited - self.t_declared


def _defined_names(program: Program, contract: str) -> set[str]:
    c = program.contracts[contract]
    names = {c.name}
    names.update(f.name for f in c.functions)
    names.update(m.name for m in c.modifiers)
    names.update(v.name for v in c.state_vars)
    names.update(t.name for t in c.types)
    return names


def _known_external_types(program: Program) -> set[str]:
    """Type names the original already relies on without defining them (imports)."""
    out: set[str] = set()
    for c in program.contracts.values():
        out.update(c.inherits)
        for fn in c.functions:
            for p in [*fn.params, *fn.returns]:
                out.update(_type_idents(p.type_name))
            for stmt in fn.statements():
                for _, type_name in stmt.declared:
                    out.update(_type_idents(type_name))
            for op in fn.operations():
                for call in op.calls:
                    if call.qualifier in ("emit", "revert"):
                        out.add(call.name)
        for m in c.modifiers:
            for p in m.params:
                out.update(_type_idents(p.type_name))
        for v in c.state_vars:
            out.update(_type_idents(v.type_name))
        for t in c.types:
            for p in t.params:
                out.update(_type_idents(p.type_name))
    return out


def _referenced_tokens(s: PatchSubject) -> list[tuple[str, Optional[Span]]]:
    """(token, span) pairs for modifiers, types, events and errors named in the region."""
    refs: list[tuple[str, Optional[Span]]] = []
    known_functions = _function_table(s.patched, s.contract)
    for _, m in s.region:
        if isinstance(m, FunctionDef):
            refs.extend((inv.name, inv.span) for inv in m.modifiers)
            for p in [*m.params, *m.returns]:
                refs.extend((name, m.signature_span) for name in _type_idents(p.type_name))
        if isinstance(m, ModifierDef):
            for p in m.params:
                refs.extend((name, m.signature_span) for name in _type_idents(p.type_name))
        if isinstance(m, StateVarDef):
            refs.extend((name, m.span) for name in _type_idents(m.type_name))
        if isinstance(m, TypeDecl):
            for p in m.params:
                refs.extend((name, m.span) for name in _type_idents(p.type_name))
        for stmt in _statements(m):
            for _, type_name in stmt.declared:
                refs.extend((name, stmt.span) for name in _type_idents(type_name))
            for op in stmt.operations:
                for call in op.calls:
                    if call.qualifier in ("emit", "revert"):
                        refs.append((call.name, call.span))
                    elif (
                        call.qualifier is None
                        and call.name[:1].isupper()
                        and call.name not in known_functions
                        and not is_elementary_type(call.name)
                    ):
                        refs.append((call.name, call.span))  # conversion to a contract/interface type
    return refs


def token_sets(s: PatchSubject) -> TokenSets:
    t_current = _defined_names(s.original, s.contract)
    t_inherited: set[str] = set()
    for base in s.original.ancestors(s.contract):
        if base in s.original.contracts:
            t_inherited |= _defined_names(s.original, base)
    t_inherited |= s.original.type_names() | _known_external_types(s.original)
    t_declared = {m.name for _, m in s.added}
    t_declared |= {c.name for c in s.patched_unit.contracts}
    t_repaired = {name for name, _ in _referenced_tokens(s)}
    return TokenSets(frozenset(t_current), frozenset(t_inherited), frozenset(t_repaired), frozenset(t_declared))


def _new_diagnostics(s: PatchSubject, structural: bool) -> list[Finding]:
    def relevant(message: str) -> bool:
        is_structural = any(k in message for k in STRUCTURAL_DIAGNOSTICS)
        return is_structural == structural

    before: dict[str, int] = {}
    for d in s.original_unit.diagnostics:
        if d.severity == "error" and relevant(d.message):
            before[d.message] = before.get(d.message, 0) + 1
    out = []
    for d in s.patched_unit.diagnostics:
        if d.severity != "error" or not relevant(d.message):
            continue
        if before.get(d.message, 0) > 0:
            before[d.message] -= 1
            continue
        out.append(Finding(f"patched source does not parse: {d.message}", _line(s.patched_unit, d.span), d.span))
    return out


def _check_undefined_tokens(s: PatchSubject) -> RuleVerdict:
    failures = _new_diagnostics(s, structural=False)
    sets = token_sets(s)
    for name, span in _referenced_tokens(s):
        if name in sets.undefined:
            failures.append(Finding(f"undefined token '{name}'", _line(s.patched_unit, span), span))
    return _verdict(UNDEFINED_TOKENS, failures)


# -- infeasible invocations ---------------------------------------------


@dataclass(frozen=True)
class InvocationSets:
    f_builtin: frozenset[str]
    f_repaired: frozenset[tuple[str, int]]
    invok: frozenset[tuple[str, int]]


def _function_table(program: Program, contract: str, skip_self: bool = False) -> dict[str, set[int]]:
    chain = program.ancestors(contract) if skip_self else program.lineage(contract)
    table: dict[str, set[int]] = {}
    for cname in chain:
        c = program.contracts.get(cname)
        if c is None:
            continue
        for fn in c.functions:
            if fn.kind == "function":
                table.setdefault(fn.name, set()).add(len(fn.params))
    return table


def _is_type_name(s: PatchSubject, name: str) -> bool:
    return (
        is_elementary_type(name)
        or name == "payable"
        or name in s.patched.type_names()
        or name in s.original.type_names()
    )


def _invocations(s: PatchSubject) -> list[tuple[str, Optional[str], int, Span]]:
    """(name, scope contract or None for own lineage, arity, span) for each checkable call."""
    if s.patched_fn is None:
        return []
    out = []
    for op in s.patched_fn.operations():
        for call in op.calls:
            q = call.qualifier
            if q in ("emit", "revert") or call.name in BUILTIN_FUNCTIONS:
                continue
            if q is None or q == "this":
                if _is_type_name(s, call.name):
                    continue
                out.append((call.name, None, call.arity, call.span))
            elif q == "super":
                out.append((call.name, "super", call.arity, call.span))
            elif q in s.patched.contracts:
                out.append((call.name, q, call.arity, call.span))
    return out


def invocation_sets(s: PatchSubject) -> InvocationSets:
    table = _function_table(s.patched, s.contract)
    f_repaired = frozenset((name, a) for name, arities in table.items() for a in arities)
    invok = frozenset((name, arity) for name, _, arity, _ in _invocations(s))
    return InvocationSets(frozenset(BUILTIN_FUNCTIONS | BUILTIN_MEMBERS), f_repaired, invok)


def _check_infeasible_invocations(s: PatchSubject) -> RuleVerdict:
    failures = []
    for name, scope, arity, span in _invocations(s):
        if scope is None:
            table = _function_table(s.patched, s.contract)
        elif scope == "super":
            table = _function_table(s.patched, s.contract, skip_self=True)
        else:
            table = _function_table(s.patched, scope)
        line = _line(s.patched_unit, span)
        if name not in table:
            if scope is None and name[:1].isupper():
                continue  # an unknown type conversion is reported as an undefined token
            failures.append(Finding(f"call to undefined function {name}() with {arity} argument(s)", line, span))
        elif arity not in table[name]:
            want = ", ".join(str(a) for a in sorted(table[name]))
            failures.append(Finding(f"{name} called with {arity} argument(s); definitions take {want}", line, span))
    return _verdict(INFEASIBLE_INVOCATION, failures)


# -- misused types ------------------------------------------------------


def _scope_types(program: Program, contract: str, m: Union[FunctionDef, ModifierDef]) -> dict[str, str]:
    types = {name: norm_type(v.type_name) for name, v in program.visible_state_vars(contract).items()}
    params = [*m.params, *(m.returns if isinstance(m, FunctionDef) else [])]
    for p in params:
        if p.name:
            types[p.name] = norm_type(p.type_name)
    for stmt in m.statements():
        for name, type_name in stmt.declared:
            types[name] = norm_type(type_name)
    return types


def _mapping_value(type_name: str) -> Optional[str]:
    if type_name.startswith("mapping(") and "=>" in type_name and type_name.endswith(")"):
        inner = type_name[len("mapping(") : -1]
        return inner.split("=>", 1)[1].strip()
    if type_name.endswith("[]"):
        return type_name[:-2]
    return None


def _operand_fwd(toks: list[Token], i: int) -> Optional[tuple[int, int]]:
    n = len(toks)
    if i >= n:
        return None
    t = toks[i]
    if t.kind in (NUMBER, STRING):
        return (i, i + 1)
    if t.is_("("):
        return (i, match_close(toks, i) + 1)
    if t.kind != IDENT:
        return None
    j = i + 1
    if j < n and toks[j].is_("("):
        j = match_close(toks, j) + 1
    while j < n:
        if toks[j].is_(".") and j + 1 < n and toks[j + 1].kind == IDENT:
            j += 2
            if j < n and toks[j].is_("("):
                j = match_close(toks, j) + 1
        elif toks[j].is_("["):
            j = match_close(toks, j) + 1
        else:
            break
    return (i, j)


def _match_open(toks: list[Token], close: int) -> int:
    pairs = {")": "(", "]": "["}
    want = pairs[toks[close].text]
    depth = 0
    j = close
    while j >= 0:
        if toks[j].is_(toks[close].text):
            depth += 1
        elif toks[j].is_(want):
            depth -= 1
            if depth == 0:
                return j
        j -= 1
    return 0


def _operand_back(toks: list[Token], k: int) -> Optional[tuple[int, int]]:
    if k < 0:
        return None
    j = k
    while True:
        if toks[j].is_(")", "]"):
            j = _match_open(toks, j)
            if j > 0 and toks[j - 1].kind == IDENT and not is_keyword(toks[j - 1].text):
                j -= 1
            elif toks[j].is_("("):
                break
            else:
                j -= 1
                continue
        elif toks[j].kind not in (IDENT, NUMBER, STRING):
            return None
        if j >= 2 and toks[j - 1].is_(".") and toks[j - 2].kind == IDENT:
            j -= 2
            continue
        if j >= 2 and toks[j - 1].is_(".") and toks[j - 2].is_(")", "]"):
            j -= 2
            continue
        break
    return (j, k + 1)


def _operand_type(toks: list[Token], types: dict[str, str]) -> Optional[str]:
    if not toks:
        return None
    if len(toks) == 1:
        t = toks[0]
        if t.kind == NUMBER:
            digits = t.text.lower()
            if digits.startswith("0x") and len(digits) == 42:
                return "address"
            return "literal"
        if t.kind == STRING:
            return "string"
        if t.is_("true", "false"):
            return "bool"
        return types.get(t.text) if t.kind == IDENT else None
    text = "".join(t.text for t in toks)
    if text in ("msg.sender", "tx.origin", "_msgSender()") or text.startswith(("address(", "payable(")):
        return "address"
    if text.endswith(".length") and toks[0].kind == IDENT:
        return "uint256"
    if toks[0].kind == IDENT and len(toks) >= 2 and toks[1].is_("["):
        close = match_close(toks, 1)
        if close == len(toks) - 1:
            base = types.get(toks[0].text)
            return _mapping_value(base) if base else None
    return None


def _is_address(t: Optional[str]) -> bool:
    return t in ("address", "address payable")


def _clashes(a: Optional[str], b: Optional[str]) -> bool:
    if a is None or b is None:
        return False
    return (_is_address(a) and bool(_NUMBERISH.match(b))) or (_is_address(b) and bool(_NUMBERISH.match(a)))


def _check_misused_types(s: PatchSubject) -> RuleVerdict:
    failures = []
    # variables present in both versions keep their declared types
    for cname in s.original.contracts:
        if cname not in s.patched.contracts or s.patched.unit_of.get(cname) is not s.patched_unit:
            continue
        before = {v.name: v for v in s.original.contracts[cname].state_vars}
        for v in s.patched.contracts[cname].state_vars:
            old = before.get(v.name)
            if old is not None and norm_type(old.type_name) != norm_type(v.type_name):
                failures.append(
                    Finding(
                        f"state variable {cname}.{v.name} changes type from {old.type_name} to {v.type_name}",
                        _line(s.patched_unit, v.span),
                        v.span,
                    )
                )
    if s.patched_fn is not None:
        old_locals = {n: norm_type(t) for st in s.original_fn.statements() for n, t in st.declared}
        for st in s.patched_fn.statements():
            for name, type_name in st.declared:
                if name in old_locals and old_locals[name] != norm_type(type_name):
                    failures.append(
                        Finding(
                            f"local {name} changes type from {old_locals[name]} to {type_name}",
                            _line(s.patched_unit, st.span),
                            st.span,
                        )
                    )
    # address compared with or assigned from a non-address value
    for cname, m in _callables(s.region):
        types = _scope_types(s.patched, cname, m)
        for stmt in m.statements():
            for op in stmt.operations:
                toks = _code_tokens(op.text)
                for i, t in enumerate(toks):
                    if not t.is_("==", "!=", "="):
                        continue
                    left = _operand_back(toks, i - 1)
                    right = _operand_fwd(toks, i + 1)
                    if left is None or right is None:
                        continue
                    lt = _operand_type(toks[left[0] : left[1]], types)
                    rt = _operand_type(toks[right[0] : right[1]], types)
                    if _clashes(lt, rt):
                        lhs = " ".join(x.text for x in toks[left[0] : left[1]])
                        rhs = " ".join(x.text for x in toks[right[0] : right[1]])
                        verb = "assigns" if t.text == "=" else "compares"
                        failures.append(
                            Finding(
                                f"{verb} {lhs} ({lt}) with {rhs} ({rt})",
                                _line(s.patched_unit, op.span),
                                op.span,
                            )
                        )
    return _verdict(MISUSED_TYPES, failures)


# -- compiler version ---------------------------------------------------


def _check_solidity_version(s: PatchSubject) -> RuleVerdict:
    failures: list[Finding] = []
    warnings: list[Finding] = []
    original = s.original_unit.pragma
    patched = s.patched_unit.pragma
    effective = original
    if (original.raw_pragma if original else None) != (patched.raw_pragma if patched else None):
        if original is None:
            effective = patched
        elif patched is None:
            failures.append(Finding(f"patch removes the pragma {original.raw_pragma}"))
        elif patched.is_subset_of(original) and not patched.is_unconstrained:
            effective = patched
        else:
            failures.append(Finding(f"patch changes pragma from {original.raw_pragma} to {patched.raw_pragma}"))
    if effective is None or effective.is_unconstrained:
        why = "no pragma" if effective is None else f"unrecognized pragma {effective.raw_pragma!r}"
        warnings.append(Finding(f"{why}; compiler version unconstrained"))
    else:
        for _, m in s.region:
            fn = m if isinstance(m, FunctionDef) else None
            for feature in features_used(s.patched_unit.text(m.span), fn):
                reason = feature.unsupported_under(effective)
                if reason:
                    failures.append(
                        Finding(
                            f"{reason} but pragma is {effective.raw_pragma}",
                            _line(s.patched_unit, m.span),
                            m.span,
                        )
                    )
    return _verdict(SOLIDITY_VERSION, failures, warnings)


# -- msg.sender check ---------------------------------------------------


def _condition_tokens(stmt: Statement) -> Optional[list[Token]]:
    text = stmt.text.lstrip()
    if stmt.kind == "require" and text.startswith(("require", "assert")):
        return _code_tokens(stmt.text)
    if stmt.kind == "ifRevert" or (stmt.kind == "control" and text.startswith("if")):
        return _code_tokens("".join(op.text + " " for op in stmt.operations))
    return None


def _sender_checked(toks: list[Token]) -> bool:
    for i in range(len(toks)):
        end = _sender_end(toks, i)
        if end < 0:
            continue
        # msg.sender == role / role != msg.sender
        if end < len(toks) and toks[end].is_("==", "!="):
            return True
        if i > 0 and toks[i - 1].is_("==", "!="):
            return True
        # mapping lookup: roles[msg.sender]
        if i > 0 and toks[i - 1].is_("[") and end < len(toks) and toks[end].is_("]"):
            return True
        # role-check call: hasRole(ROLE, msg.sender), isAuthorized(msg.sender)
        depth = 0
        for j in range(i - 1, -1, -1):
            if toks[j].is_(")"):
                depth += 1
            elif toks[j].is_("("):
                if depth == 0:
                    if j > 0 and toks[j - 1].kind == IDENT and not is_keyword(toks[j - 1].text) and not toks[j - 1].is_(
                        "require", "assert", "if"
                    ):
                        return True
                    break
                depth -= 1
    return False


def _effective_guarded(program: Program, contract: str, item, seen: set[str], depth: int = 0) -> bool:
    if depth > 4 or item.qualname in seen:
        return False
    seen.add(item.qualname)
    for stmt in item.statements():
        cond = _condition_tokens(stmt)
        if cond is not None and _sender_checked(cond):
            return True
        for op in stmt.operations:
            if depth > 0 and op.is_return and _sender_checked(_code_tokens(op.text)):
                return True
            for call in op.calls:
                if call.qualifier not in (None, "this", "super"):
                    continue
                if call.name in ROLE_CHECK_FUNCTIONS and program.resolve_function(contract, call.name) is None:
                    return True  # library-provided check, e.g. an imported access-control base
                callee = program.resolve_function(contract, call.name, call.arity, skip_self=call.qualifier == "super")
                if callee is not None and callee is not item:
                    if _effective_guarded(program, callee.contract, callee, seen, depth + 1):
                        return True
    if isinstance(item, FunctionDef):
        for inv in item.modifiers:
            mod = program.resolve_modifier(item.contract, inv.name)
            if mod is not None and _effective_guarded(program, mod.contract, mod, seen, depth + 1):
                return True
    return False


def _check_msg_sender(s: PatchSubject) -> RuleVerdict:
    fn = s.patched_fn or s.original_fn
    program = s.patched if s.patched_fn is not None else s.original
    if _effective_guarded(program, s.contract, fn, set()):
        return _verdict(MSG_SENDER_CHECK, [])
    return _verdict(
        MSG_SENDER_CHECK,
        [
            Finding(
                f"no condition in {fn.contract}.{fn.name} or its modifiers compares msg.sender with a role",
                _line(s.patched_unit, fn.signature_span) if s.patched_fn is not None else None,
            )
        ],
    )


# -- def-use ------------------------------------------------------------


def _writes_anywhere(program: Program, var: StateVarDef) -> bool:
    if var.initializer:
        return True
    for c in program.contracts.values():
        if var.contract not in program.lineage(c.name):
            continue
        for fn in c.functions:
            for op in fn.operations():
                if var.name in op.writes:
                    return True
        for m in c.modifiers:
            for op in m.operations():
                if var.name in op.writes:
                    return True
    return False


def _check_def_use(s: PatchSubject) -> RuleVerdict:
    failures: list[Finding] = []
    warnings: list[Finding] = []
    unit = s.patched_unit
    type_names = s.patched.type_names() | s.original.type_names() | _known_external_types(s.original)
    new_vars = {m.name: m for _, m in s.added if isinstance(m, StateVarDef)}
    used_new: set[str] = set()
    for cname, m in _callables(s.region):
        state = s.patched.visible_state_vars(cname)
        functions = _function_table(s.patched, cname)
        lenient = bool(_unresolved_bases(s.patched, cname))
        defined: set[str] = set()
        for p in [*m.params, *(m.returns if isinstance(m, FunctionDef) else [])]:
            if p.name:
                defined.add(p.name)
                if p.name in state:
                    warnings.append(Finding(f"parameter {p.name} shadows state variable {cname}.{p.name}", _line(unit, m.signature_span)))
        for stmt in m.statements():
            for op in stmt.operations:
                declared = {n for n, _ in declared_in(_code_tokens(op.text), op.text)}
                for name in sorted((op.reads | op.writes) - declared):
                    root = name.split(".", 1)[0]
                    if name in defined or root in AMBIENT_NAMES or name in BUILTIN_FUNCTIONS:
                        continue
                    if name in state:
                        if name in new_vars:
                            used_new.add(name)
                        continue
                    if name in type_names or name in functions:
                        continue
                    finding = Finding(f"'{name}' is used but never defined", _line(unit, op.span), op.span)
                    (warnings if lenient else failures).append(finding)
                for name in sorted(declared):
                    if name in state:
                        warnings.append(Finding(f"local {name} shadows state variable {cname}.{name}", _line(unit, op.span)))
                    defined.add(name)
    for name in sorted(used_new):
        var = new_vars[name]
        if not _writes_anywhere(s.patched, var):
            failures.append(Finding(f"new state variable {name} is used but never assigned", _line(unit, var.span), var.span))
    return _verdict(DEF_USE, failures, warnings)


# -- structural compatibility -------------------------------------------


def _describe_key(contract: str, key: tuple) -> str:
    if key[0] == "contract":
        return f"contract {key[1]}"
    if key[0] == "function":
        return f"{key[1]} {contract}.{key[2]}({', '.join(key[3])})"
    if key[0] == "type":
        return f"{key[1]} {contract}.{key[2]}"
    return f"{key[0]} {contract}.{key[1]}"


def _check_structural_compat(s: PatchSubject) -> RuleVerdict:
    failures = _new_diagnostics(s, structural=True)
    orig = s.original_fn
    pf = s.patched_fn
    if pf is None:
        failures.append(Finding(f"function {orig.contract}.{orig.name} is missing from the patched contract"))
    else:
        line = _line(s.patched_unit, pf.signature_span)
        if pf.name != orig.name:
            failures.append(Finding(f"function {orig.name} was renamed to {pf.name}", line))
        if [norm_type(t) for t in pf.param_types] != [norm_type(t) for t in orig.param_types]:
            failures.append(
                Finding(f"parameter types changed from ({', '.join(orig.param_types)}) to ({', '.join(pf.param_types)})", line)
            )
        if [norm_type(p.type_name) for p in pf.returns] != [norm_type(p.type_name) for p in orig.returns]:
            failures.append(Finding(f"return types of {orig.name} changed", line))
        if pf.kind != orig.kind:
            failures.append(Finding(f"{orig.name} changed from {orig.kind} to {pf.kind}", line))
    for cname, key in s.removed:
        failures.append(Finding(f"patch removes {_describe_key(cname, key)}"))
    original_contracts = {c.name for c in s.original_unit.contracts}
    for cname, m in s.added:
        c = s.patched.contracts.get(cname)
        if cname not in original_contracts and (cname == TOPLEVEL or (c is not None and c.synthetic)):
            failures.append(Finding(f"declaration {m.name} outside any contract", _line(s.patched_unit, m.span), m.span))
    return _verdict(STRUCTURAL_COMPAT, failures)


# -- public API ----------------------------------------------------------------------

_RULE_FUNCS: dict[str, Callable[[PatchSubject], RuleVerdict]] = {
    UNDEFINED_TOKENS: _check_undefined_tokens,
    INFEASIBLE_INVOCATION: _check_infeasible_invocations,
    MISUSED_TYPES: _check_misused_types,
    SOLIDITY_VERSION: _check_solidity_version,
    MSG_SENDER_CHECK: _check_msg_sender,
    DEF_USE: _check_def_use,
    STRUCTURAL_COMPAT: _check_structural_compat,
}


def check_undefined_tokens(patch, original) -> RuleVerdict:
    return _check_undefined_tokens(build_subject(patch, original))


def check_infeasible_invocations(patch, original) -> RuleVerdict:
    return _check_infeasible_invocations(build_subject(patch, original))


def check_misused_types(patch, original) -> RuleVerdict:
    return _check_misused_types(build_subject(patch, original))


def check_solidity_version(patch, original) -> RuleVerdict:
    return _check_solidity_version(build_subject(patch, original))


def check_msg_sender(patch, original) -> RuleVerdict:
    return _check_msg_sender(build_subject(patch, original))


def check_def_use(patch, original) -> RuleVerdict:
    return _check_def_use(build_subject(patch, original))


def check_structural_compat(patch, original) -> RuleVerdict:
    return _check_structural_compat(build_subject(patch, original))


def validate(patch, original) -> ValidationReport:
    """Run all seven rules on one patch; pure and deterministic."""
    subject = build_subject(patch, original)
    return ValidationReport([_RULE_FUNCS[rule](subject) for rule in RULES])
