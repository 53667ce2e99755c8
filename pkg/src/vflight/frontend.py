"""Parser, printer and call graph for the mini SSA language.

The grammar has one statement per source line; the line number doubles as the
statement id, so it must be unique across the whole program::

    program   := func*
    func      := "func" NAME "(" params? ")" "{" stmt* "}"
    stmt      := NAME "=" "null"
               | NAME "=" NAME
               | NAME "=" "phi" "(" NAME "," NAME ")"
               | NAME "=" "call" NAME "(" args? ")"
               | "call" NAME "(" args? ")"
               | "if" "(" NAME op rhs ")" "{" stmt* "}" ("else" "{" stmt* "}")?
               | "deref" NAME
               | "return" NAME

Closing braces and ``else`` may share a line with the preceding statement.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

KEYWORDS = {"func", "null", "phi", "call", "if", "else", "deref", "return"}
NULL_OPS = ("==", "!=")
ALL_OPS = ("==", "!=", "<=", ">=", "<", ">")


class FrontendError(Exception):
    """Base class for everything the frontend rejects."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


class ParseError(FrontendError):
    pass


class SSAError(FrontendError):
    pass


class UnresolvedCallee(FrontendError):
    pass


class DuplicateFunction(FrontendError):
    pass


# --------------------------------------------------------------------------
# IR


@dataclass(frozen=True)
class Condition:
    var: str
    op: str
    rhs: str = "null"

    @property
    def is_null_test(self) -> bool:
        return self.rhs == "null" and self.op in NULL_OPS

    def negated(self) -> "Condition":
        flip = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}
        return Condition(self.var, flip[self.op], self.rhs)

    def __str__(self) -> str:
        return f"{self.var} {self.op} {self.rhs}"


@dataclass(frozen=True)
class NullConst:
    line: int
    target: str
    kind = "null-const"


@dataclass(frozen=True)
class Copy:
    line: int
    target: str
    source: str
    kind = "copy"


@dataclass(frozen=True)
class Phi:
    line: int
    target: str
    left: str
    right: str
    kind = "phi"


@dataclass(frozen=True)
class Call:
    line: int
    target: Optional[str]
    callee: str
    args: tuple[str, ...]
    kind = "call"


@dataclass(frozen=True)
class If:
    line: int
    cond: Condition
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] = ()
    kind = "if"


@dataclass(frozen=True)
class Deref:
    line: int
    var: str
    kind = "deref"


@dataclass(frozen=True)
class Return:
    line: int
    var: str
    kind = "return"


Stmt = Union[NullConst, Copy, Phi, Call, If, Deref, Return]


@dataclass(frozen=True)
class FunctionIR:
    name: str
    line: int
    params: tuple[str, ...]
    body: tuple[Stmt, ...]

    @property
    def ret(self) -> Optional[str]:
        for s in walk(self.body):
            if isinstance(s, Return):
                return s.var
        return None

    def calls(self) -> list[Call]:
        return [s for s in walk(self.body) if isinstance(s, Call)]


@dataclass(frozen=True)
class ProgramIR:
    functions: tuple[FunctionIR, ...] = ()

    def function(self, name: str) -> FunctionIR:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def roots(self) -> tuple[str, ...]:
        called = {c.callee for f in self.functions for c in f.calls()}
        return tuple(f.name for f in self.functions if f.name not in called)

    def digest(self) -> str:
        return hashlib.sha256(print_program(self).encode()).hexdigest()[:16]


def walk(body: tuple[Stmt, ...]) -> Iterator[Stmt]:
    """Pre-order traversal of a statement list, descending into if blocks."""
    for s in body:
        yield s
        if isinstance(s, If):
            yield from walk(s.then)
            yield from walk(s.orelse)


# --------------------------------------------------------------------------
# lexer / parser

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<num>-?\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>==|!=|<=|>=|[<>=(){},])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # name, num, op, kw, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "name":
            word = m.group()
            toks.append(_Tok("kw" if word in KEYWORDS else "name", word, line, col))
        elif kind in ("num", "op"):
            toks.append(_Tok(kind, m.group(), line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _fail(self, expected: str) -> ParseError:
        t = self.tok
        got = t.text or "end of input"
        return ParseError(f"expected {expected}, got {got!r}", t.line, t.col)

    def accept(self, text: str) -> Optional[_Tok]:
        if self.tok.text == text and self.tok.kind in ("op", "kw"):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> _Tok:
        t = self.accept(text)
        if t is None:
            raise self._fail(repr(text))
        return t

    def name(self) -> _Tok:
        if self.tok.kind != "name":
            raise self._fail("identifier")
        t = self.tok
        self.i += 1
        return t

    def names(self, close: str) -> tuple[str, ...]:
        out: list[str] = []
        if self.accept(close):
            return ()
        while True:
            out.append(self.name().text)
            if self.accept(close):
                return tuple(out)
            self.expect(",")

    def program(self) -> list[FunctionIR]:
        funcs = []
        while self.tok.kind != "eof":
            funcs.append(self.function())
        return funcs

    def function(self) -> FunctionIR:
        head = self.expect("func")
        name = self.name().text
        self.expect("(")
        params = self.names(")")
        self.expect("{")
        body = self.block()
        return FunctionIR(name, head.line, params, body)

    def block(self) -> tuple[Stmt, ...]:
        out: list[Stmt] = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                raise self._fail("'}'")
            out.append(self.statement())
        return tuple(out)

    def statement(self) -> Stmt:
        t = self.tok
        if self.accept("if"):
            self.expect("(")
            var = self.name().text
            if self.tok.text not in ALL_OPS or self.tok.kind != "op":
                raise self._fail("comparison operator")
            op = self.tok.text
            self.i += 1
            if self.accept("null"):
                rhs = "null"
            elif self.tok.kind in ("name", "num"):
                rhs = self.tok.text
                self.i += 1
            else:
                raise self._fail("'null', identifier or number")
            self.expect(")")
            self.expect("{")
            then = self.block()
            orelse: tuple[Stmt, ...] = ()
            if self.accept("else"):
                self.expect("{")
                orelse = self.block()
            return If(t.line, Condition(var, op, rhs), then, orelse)
        if self.accept("deref"):
            return Deref(t.line, self.name().text)
        if self.accept("return"):
            return Return(t.line, self.name().text)
        if self.accept("call"):
            callee = self.name().text
            self.expect("(")
            return Call(t.line, None, callee, self.names(")"))
        if t.kind != "name":
            raise self._fail("statement")
        target = self.name().text
        self.expect("=")
        if self.accept("null"):
            return NullConst(t.line, target)
        if self.accept("phi"):
            self.expect("(")
            left = self.name().text
            self.expect(",")
            right = self.name().text
            self.expect(")")
            return Phi(t.line, target, left, right)
        if self.accept("call"):
            callee = self.name().text
            self.expect("(")
            return Call(t.line, target, callee, self.names(")"))
        return Copy(t.line, target, self.name().text)


def parse_program(source: str) -> ProgramIR:
    """Parse and validate mini-IR source text."""
    program = ProgramIR(tuple(_Parser(source).program()))
    validate(program)
    return program


# --------------------------------------------------------------------------
# validation


def _defs(s: Stmt) -> Optional[str]:
    if isinstance(s, (NullConst, Copy, Phi)):
        return s.target
    if isinstance(s, Call):
        return s.target
    return None


def _uses(s: Stmt) -> tuple[str, ...]:
    if isinstance(s, Copy):
        return (s.source,)
    if isinstance(s, Phi):
        return (s.left, s.right)
    if isinstance(s, Call):
        return s.args
    if isinstance(s, If):
        return (s.cond.var,)
    if isinstance(s, (Deref, Return)):
        return (s.var,)
    return ()


def validate(p: ProgramIR) -> None:
    by_name: dict[str, FunctionIR] = {}
    for f in p.functions:
        if f.name in by_name:
            raise DuplicateFunction(f"function {f.name!r} defined twice", f.line)
        by_name[f.name] = f

    lines: dict[int, str] = {}

    def claim(line: int, what: str) -> None:
        if line in lines:
            raise ParseError(f"line {line} already holds {lines[line]}; one statement per line", line)
        lines[line] = what

    for f in p.functions:
        claim(f.line, f"function {f.name}")
        seen: set[str] = set()
        for prm in f.params:
            if prm in seen:
                raise SSAError(f"parameter {prm!r} repeated in {f.name}", f.line)
            seen.add(prm)
        for s in walk(f.body):
            claim(s.line, f"a statement of {f.name}")
        lines_in_order = [s.line for s in walk(f.body)]
        for a, b in zip([f.line] + lines_in_order, lines_in_order):
            if b <= a:
                raise ParseError("statement lines must increase within a function", b)
        returns = [s for s in walk(f.body) if isinstance(s, Return)]
        if len(returns) > 1:
            raise SSAError(f"function {f.name} has more than one return", returns[1].line)
        _check_block(f.body, set(f.params), seen, by_name)
        _check_phi_placement(f.body)


def _check_block(body: tuple[Stmt, ...], visible: set[str], seen: set[str], funcs: dict) -> set[str]:
    """Check scoping and SSA over one block; returns the names visible at its end.

    A name defined inside an if block is only visible there, and a phi right
    after the block is the one place that may read it.
    """
    visible = set(visible)
    arms: Optional[tuple[set[str], set[str]]] = None
    for s in body:
        if isinstance(s, Phi):
            left_scope, right_scope = arms if arms is not None else (visible, visible)
            if s.left not in left_scope:
                raise SSAError(f"phi arm {s.left!r} is not defined on the then path", s.line)
            if s.right not in right_scope:
                raise SSAError(f"phi arm {s.right!r} is not defined on the else path", s.line)
        else:
            for u in _uses(s):
                if u not in visible:
                    raise SSAError(f"variable {u!r} used before definition", s.line)
        if isinstance(s, If) and s.cond.rhs != "null" and not s.cond.rhs.lstrip("-").isdigit():
            if s.cond.rhs not in visible:
                raise SSAError(f"variable {s.cond.rhs!r} used before definition", s.line)
        if isinstance(s, Call):
            callee = funcs.get(s.callee)
            if callee is None:
                raise UnresolvedCallee(f"call to undefined function {s.callee!r}", s.line)
            if len(callee.params) != len(s.args):
                raise ParseError(f"{s.callee} expects {len(callee.params)} arguments, got {len(s.args)}", s.line)
            if s.target is not None and callee.ret is None:
                raise ParseError(f"{s.callee} returns no value", s.line)
        d = _defs(s)
        if d is not None:
            if d in seen:
                raise SSAError(f"variable {d!r} redefined", s.line)
            seen.add(d)
            visible.add(d)
        if isinstance(s, If):
            arms = (_check_block(s.then, visible, seen, funcs), _check_block(s.orelse, visible, seen, funcs))
        elif not isinstance(s, Phi):
            arms = None
    return visible


def _check_phi_placement(body: tuple[Stmt, ...]) -> None:
    after_if = False
    for s in body:
        if isinstance(s, Phi):
            if not after_if:
                raise SSAError("phi must directly follow an if/else merge", s.line)
            continue
        after_if = isinstance(s, If)
        if isinstance(s, If):
            _check_phi_placement(s.then)
            _check_phi_placement(s.orelse)


def merge_if(body: tuple[Stmt, ...], phi: Phi) -> Optional[If]:
    """The if statement whose join point ``phi`` sits at."""
    prev_if = None
    for s in body:
        if s is phi:
            return prev_if
        if isinstance(s, If):
            prev_if = s
        elif not isinstance(s, Phi):
            prev_if = None
    return None


# --------------------------------------------------------------------------
# canonical printer


def print_program(p: ProgramIR) -> str:
    """Render ``p`` so that every statement lands on its original line."""
    rows: dict[int, list[str]] = {}
    cur = [0]

    def emit(line: int, text: str) -> None:
        rows.setdefault(line, []).append(text)
        cur[0] = line

    def tail(text: str) -> None:
        rows.setdefault(cur[0], []).append(text)

    def block(body: tuple[Stmt, ...], indent: int) -> None:
        pad = "  " * indent
        for s in body:
            if isinstance(s, NullConst):
                emit(s.line, f"{pad}{s.target} = null")
            elif isinstance(s, Copy):
                emit(s.line, f"{pad}{s.target} = {s.source}")
            elif isinstance(s, Phi):
                emit(s.line, f"{pad}{s.target} = phi({s.left}, {s.right})")
            elif isinstance(s, Call):
                lhs = f"{s.target} = " if s.target else ""
                emit(s.line, f"{pad}{lhs}call {s.callee}({', '.join(s.args)})")
            elif isinstance(s, Deref):
                emit(s.line, f"{pad}deref {s.var}")
            elif isinstance(s, Return):
                emit(s.line, f"{pad}return {s.var}")
            elif isinstance(s, If):
                emit(s.line, f"{pad}if ({s.cond}) {{")
                block(s.then, indent + 1)
                tail("}")
                if s.orelse:
                    tail("else {")
                    block(s.orelse, indent + 1)
                    tail("}")

    for f in p.functions:
        emit(f.line, f"func {f.name}({', '.join(f.params)}) {{")
        block(f.body, 1)
        tail("}")
    if not rows:
        return ""
    return "\n".join(" ".join(rows.get(i, [])) for i in range(1, max(rows) + 1)) + "\n"


# --------------------------------------------------------------------------
# call graph


def tarjan_scc(nodes: list[str], succ: dict[str, list[str]]) -> list[tuple[str, ...]]:
    """Iterative Tarjan; components come out in reverse topological order."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[tuple[str, ...]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            pushed = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    pushed = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if pushed:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(tuple(sorted(comp)))
    return out


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    line: int


@dataclass(frozen=True)
class CallGraph:
    functions: tuple[str, ...]
    edges: tuple[CallEdge, ...]
    sccs: tuple[tuple[str, ...], ...]
    layers: tuple[tuple[tuple[str, ...], ...], ...]
    _scc_of: dict = field(default_factory=dict, compare=False, repr=False)

    def scc_of(self, fn: str) -> tuple[str, ...]:
        return self._scc_of[fn]

    def callees(self, fn: str) -> list[str]:
        return sorted({e.callee for e in self.edges if e.caller == fn})

    def is_recursive(self, scc: tuple[str, ...]) -> bool:
        members = set(scc)
        return len(scc) > 1 or any(e.caller in members and e.callee in members for e in self.edges)

    def layer_of(self, fn: str) -> int:
        comp = self._scc_of[fn]
        for i, layer in enumerate(self.layers):
            if comp in layer:
                return i
        raise KeyError(fn)

    def bottom_up(self) -> list[str]:
        return [fn for layer in self.layers for comp in layer for fn in comp]


def build_call_graph(p: ProgramIR) -> CallGraph:
    names = [f.name for f in p.functions]
    edges = tuple(CallEdge(f.name, c.callee, c.line) for f in p.functions for c in f.calls())
    succ: dict[str, list[str]] = {n: [] for n in names}
    for e in edges:
        if e.callee not in succ[e.caller]:
            succ[e.caller].append(e.callee)
    sccs = tarjan_scc(sorted(names), {k: sorted(v) for k, v in succ.items()})
    scc_of = {fn: comp for comp in sccs for fn in comp}
    level: dict[tuple[str, ...], int] = {}
    # Tarjan emits callees before callers.
    for comp in sccs:
        below = [level[scc_of[c]] for fn in comp for c in succ[fn] if scc_of[c] != comp]
        level[comp] = 1 + max(below) if below else 0
    depth = max(level.values(), default=-1) + 1
    layers = tuple(
        tuple(sorted((c for c in sccs if level[c] == i), key=lambda c: c[0])) for i in range(depth)
    )
    return CallGraph(tuple(names), edges, tuple(sccs), layers, scc_of)
