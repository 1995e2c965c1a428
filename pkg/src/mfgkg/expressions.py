"""Arithmetic formula parsing and backward-chaining evaluation over the graph.

Formulas come from note points like ``stress = force / area``; the right-hand
side is stored on the entity as a ``hasExpression`` literal.  ``solve`` walks
those definitions depth-first, converts all inputs to SI base units, and
returns the target quantity together with the derivation trace.

Grammar: ``+ - * / ^`` (also ``**``) with the usual precedence
(power above multiplication above addition), left-associative, parentheses,
decimal/scientific constants, and variables that may span several words
("cutting speed").  A minus sign always parses as the operator, so variable
names cannot contain hyphens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .graph import Direction, KnowledgeGraph, Literal, LiteralKind
from .normalize import collapse_ws, normalize_label
from .units import (
    DIMENSIONLESS, Dims, Quantity, si_quantity,
)


class FormulaSyntaxError(ValueError):
    """Formula text does not parse; ``position`` is a 0-based character index."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class SolverError(Exception):
    """Base class for evaluation failures."""


class UnsolvableError(SolverError):
    def __init__(self, missing: list[str]):
        super().__init__("missing values for: " + ", ".join(missing))
        self.missing = list(missing)


class CyclicDefinitionError(SolverError):
    def __init__(self, cycle: list[str]):
        super().__init__("cyclic definition: " + " -> ".join(cycle))
        self.cycle = list(cycle)


class DepthExceededError(SolverError):
    def __init__(self, depth: int):
        super().__init__(f"definition chain deeper than {depth}")
        self.depth = depth


class UnitMismatchError(SolverError):
    pass


class EvaluationError(SolverError):
    pass


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # normalized label


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


Expr = Num | Var | Neg | BinOp


def free_vars(expr: Expr) -> list[str]:
    """Variable names in first-appearance order."""
    seen: list[str] = []

    def walk(node: Expr):
        if isinstance(node, Var):
            if node.name not in seen:
                seen.append(node.name)
        elif isinstance(node, Neg):
            walk(node.operand)
        elif isinstance(node, BinOp):
            walk(node.left)
            walk(node.right)

    walk(expr)
    return seen


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<power>\*\*|\^)
  | (?P<op>[+\-*/])
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<word>[^\s()+\-*/^=]+)
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    position: int


def _tokenize(raw: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(raw):
        m = _TOKEN_RE.match(raw, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {raw[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            text = "^" if kind == "power" else m.group()
            tokens.append(_Token(kind, text, pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, raw: str):
        self.raw = raw
        self.tokens = _tokenize(raw)
        self.i = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise FormulaSyntaxError("unexpected end of formula", len(self.raw))
        self.i += 1
        return tok

    def parse(self) -> Expr:
        if not self.tokens:
            raise FormulaSyntaxError("empty formula", 0)
        node = self.expr()
        trailing = self.peek()
        if trailing is not None:
            raise FormulaSyntaxError(f"unexpected {trailing.text!r}", trailing.position)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while (tok := self.peek()) is not None and tok.text in "+-" and tok.kind == "op":
            self.next()
            node = BinOp(tok.text, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.signed()
        while (tok := self.peek()) is not None and tok.text in "*/" and tok.kind == "op":
            self.next()
            node = BinOp(tok.text, node, self.signed())
        return node

    def signed(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text in "+-":
            self.next()
            operand = self.signed()
            return Neg(operand) if tok.text == "-" else operand
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        while (tok := self.peek()) is not None and tok.kind == "power":
            self.next()
            node = BinOp("^", node, self.exponent())
        return node

    def exponent(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text in "+-":
            self.next()
            operand = self.exponent()
            return Neg(operand) if tok.text == "-" else operand
        return self.atom()

    def atom(self) -> Expr:
        tok = self.next()
        if tok.kind == "number":
            return Num(float(tok.text))
        if tok.kind == "lparen":
            node = self.expr()
            closing = self.peek()
            if closing is None or closing.kind != "rparen":
                raise FormulaSyntaxError("missing closing parenthesis",
                                         closing.position if closing else len(self.raw))
            self.next()
            return node
        if tok.kind == "word":
            words = [tok.text]
            while (nxt := self.peek()) is not None and nxt.kind == "word":
                words.append(self.next().text)
            return Var(normalize_label(" ".join(words)))
        raise FormulaSyntaxError(f"unexpected {tok.text!r}", tok.position)


def parse_expr(raw: str) -> Expr:
    """Parse a formula string into an AST; raises FormulaSyntaxError."""
    return _Parser(raw).parse()


# -- solving -----------------------------------------------------------------

@dataclass(frozen=True)
class TraceStep:
    label: str
    formula: str
    quantity: Quantity


@dataclass
class SolveResult:
    quantity: Quantity
    trace: list[TraceStep] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class _Formula:
    raw: str
    ast: Expr
    triple_id: int


def parse_bindings(spec: str) -> dict[str, Quantity]:
    """Parse "label=value unit,label=value" into named quantities."""
    from .units import parse_quantity

    out: dict[str, Quantity] = {}
    if not spec.strip():
        return out
    for part in spec.split(","):
        label, sep, value = part.partition("=")
        label = collapse_ws(label)
        if not sep or not label:
            raise ValueError(f"binding {part!r} is not label=value")
        q = parse_quantity(value)
        if q is None:
            raise ValueError(f"binding {part!r} has no parsable value/unit")
        out[label] = q
    return out


class _Solver:
    def __init__(self, graph: KnowledgeGraph | None, env: dict[str, tuple[float, Dims]],
                 max_depth: int):
        self.graph = graph
        self.env = env
        self.max_depth = max_depth
        self.warnings: list[str] = []
        self.trace: list[TraceStep] = []
        self._formula_cache: dict[str, _Formula | None] = {}
        self._parse_cache: dict[int, Expr | None] = {}
        self._memo: dict[str, tuple[float, Dims]] = {}

    # formula selection ------------------------------------------------

    def _expression_edges(self, label: str):
        if self.graph is None:
            return []
        edges = []
        for eid in self.graph.lookup(label):
            for t in self.graph.neighbors(eid, Direction.FORWARD, {"hasExpression"}):
                if isinstance(t.object, Literal) and t.object.kind in (
                        LiteralKind.EXPRESSION_REF, LiteralKind.TEXT):
                    edges.append(t)
        edges.sort(key=lambda t: t.id)
        return edges

    def _parsed(self, triple) -> Expr | None:
        if triple.id not in self._parse_cache:
            try:
                self._parse_cache[triple.id] = parse_expr(str(triple.object.value))
            except FormulaSyntaxError as exc:
                self.warnings.append(
                    f"skipping unparsable formula for triple {triple.id}: {exc}")
                self._parse_cache[triple.id] = None
        return self._parse_cache[triple.id]

    def _available(self, name: str) -> bool:
        return name in self.env or bool(self._expression_edges(name))

    def formula_for(self, label: str) -> _Formula | None:
        if label in self._formula_cache:
            return self._formula_cache[label]
        candidates: list[_Formula] = []
        for t in self._expression_edges(label):
            ast = self._parsed(t)
            if ast is not None:
                candidates.append(_Formula(str(t.object.value), ast, t.id))
        chosen: _Formula | None = None
        if len(candidates) == 1:
            chosen = candidates[0]
        elif candidates:
            solvable = [f for f in candidates
                        if all(self._available(v) for v in free_vars(f.ast))]
            chosen = solvable[0] if solvable else candidates[0]
            self.warnings.append(
                f"{label} has {len(candidates)} formulas; using {chosen.raw!r}")
        self._formula_cache[label] = chosen
        return chosen

    # planning -----------------------------------------------------------

    def plan(self, target: str):
        missing: set[str] = set()
        done: set[str] = set()
        stack: list[str] = []

        def visit(label: str):
            if label in done or label in self.env:
                return
            if label in stack:
                raise CyclicDefinitionError(stack[stack.index(label):] + [label])
            if len(stack) >= self.max_depth:
                raise DepthExceededError(self.max_depth)
            f = self.formula_for(label)
            if f is None:
                missing.add(label)
                return
            stack.append(label)
            for v in free_vars(f.ast):
                visit(v)
            stack.pop()
            done.add(label)

        visit(target)
        if missing:
            raise UnsolvableError(sorted(missing))

    # evaluation ---------------------------------------------------------

    def value_of(self, label: str) -> tuple[float, Dims]:
        if label in self._memo:
            return self._memo[label]
        if label in self.env:
            self._memo[label] = self.env[label]
            return self._memo[label]
        f = self.formula_for(label)
        assert f is not None, "planning guarantees a formula"
        result = self.eval_node(f.ast)
        self._memo[label] = result
        self.trace.append(TraceStep(label, f.raw, si_quantity(*result)))
        return result

    def eval_node(self, node: Expr) -> tuple[float, Dims]:
        if isinstance(node, Num):
            return node.value, DIMENSIONLESS
        if isinstance(node, Var):
            return self.value_of(node.name)
        if isinstance(node, Neg):
            v, d = self.eval_node(node.operand)
            return -v, d
        lv, ld = self.eval_node(node.left)
        rv, rd = self.eval_node(node.right)
        op = node.op
        if op in "+-":
            if ld != rd:
                raise UnitMismatchError(
                    f"cannot {'add' if op == '+' else 'subtract'} "
                    f"{_dims_name(ld)} and {_dims_name(rd)}")
            return (lv + rv if op == "+" else lv - rv), ld
        if op == "*":
            return lv * rv, _dims_combine(ld, rd, 1)
        if op == "/":
            if rv == 0:
                raise EvaluationError("division by zero")
            return lv / rv, _dims_combine(ld, rd, -1)
        if op == "^":
            if rd != DIMENSIONLESS:
                raise UnitMismatchError("exponent must be dimensionless")
            if ld == DIMENSIONLESS:
                try:
                    value = lv ** rv
                except (OverflowError, ZeroDivisionError) as exc:
                    raise EvaluationError(str(exc)) from None
                if isinstance(value, complex):
                    raise EvaluationError("complex result from power")
                return value, DIMENSIONLESS
            if abs(rv - round(rv)) > 1e-9:
                raise UnitMismatchError("dimensional base needs an integer exponent")
            n = int(round(rv))
            try:
                value = lv ** n
            except (OverflowError, ZeroDivisionError) as exc:
                raise EvaluationError(str(exc)) from None
            return value, tuple(e * n for e in ld)  # type: ignore[return-value]
        raise AssertionError(f"unknown operator {op!r}")


def _dims_combine(a: Dims, b: Dims, sign: int) -> Dims:
    return tuple(x + sign * y for x, y in zip(a, b))  # type: ignore[return-value]


def _dims_name(d: Dims) -> str:
    from .units import display_unit

    return display_unit(d) or "dimensionless"


def solve(target: str, bindings: dict[str, Quantity],
          graph: KnowledgeGraph | None = None, *, max_depth: int = 32) -> SolveResult:
    """Evaluate an entity's value from bindings and ``hasExpression`` chains.

    All arithmetic happens in SI base units; the result and every trace entry
    carry SI values.  Raises UnsolvableError (with the full list of missing
    leaves), CyclicDefinitionError, DepthExceededError or UnitMismatchError.
    """
    tgt = normalize_label(target)
    if not tgt:
        raise ValueError("target label is empty")
    env: dict[str, tuple[float, Dims]] = {}
    for k, q in bindings.items():
        norm = normalize_label(k)
        if not norm:
            raise ValueError(f"binding label {k!r} is empty")
        env[norm] = q.to_si()
    solver = _Solver(graph, env, max_depth)
    solver.plan(tgt)
    value, dims = solver.value_of(tgt)
    return SolveResult(si_quantity(value, dims), solver.trace, solver.warnings)
