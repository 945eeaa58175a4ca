"""A small formula language for branch families and the ``.map`` file format.

Grammar (``^`` binds tightest and is right associative; unary minus binds
looser than ``^`` so ``-2^2 == -4``)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

Variables are ``x`` (branch argument), ``y`` (image point, for inverse
rules) and ``i`` (branch index).  ``**``, ``×``, ``÷`` and ``−`` are accepted
as spellings of ``^``, ``*``, ``/`` and ``-``.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DomainError, DSLSyntaxError, MapDefinitionError
from .map_model import Branch, BranchFamily, MapClass, MapSpec, finite_difference

VARIABLES = ("x", "y", "i")
FUNCTIONS = {"sqrt": np.sqrt, "abs": np.abs}


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

class Expr:
    __slots__ = ()

    def __str__(self):
        return to_source(self)

    def __call__(self, x=0.0, i=0, y=0.0):
        return eval_expr(self, x, i, y)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


# ---------------------------------------------------------------------------
# lexer / parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^()×÷−])
""", re.VERBOSE)

_OP_ALIASES = {"**": "^", "×": "*", "÷": "/", "−": "-"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", text, _byte(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            t = m.group()
            if kind == "op":
                t = _OP_ALIASES.get(t, t)
            toks.append(_Tok(kind, t, pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


def _byte(text, pos):
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.k = 0

    @property
    def tok(self):
        return self.toks[self.k]

    def fail(self, expected):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise DSLSyntaxError(f"expected {expected}, found {found}", self.text, _byte(self.text, t.pos))

    def eat(self, text):
        if self.tok.text == text and self.tok.kind == "op":
            self.k += 1
            return True
        return False

    def parse(self):
        e = self.expr()
        if self.tok.kind != "end":
            self.fail("operator or end of input")
        return e

    def expr(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.k += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.k += 1
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.eat("-"):
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.eat("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.k += 1
            return Num(float(t.text))
        if t.kind == "name":
            self.k += 1
            if t.text in FUNCTIONS:
                if not self.eat("("):
                    self.fail(f"'(' after {t.text}")
                arg = self.expr()
                if not self.eat(")"):
                    self.fail("')'")
                return Call(t.text, arg)
            if t.text in VARIABLES:
                return Var(t.text)
            raise DSLSyntaxError(f"unknown name {t.text!r}", self.text, _byte(self.text, t.pos))
        if self.eat("("):
            e = self.expr()
            if not self.eat(")"):
                self.fail("')'")
            return e
        self.fail("number, variable, function or '('")


def parse_expr(text: str) -> Expr:
    if not text or not text.strip():
        raise DSLSyntaxError("empty expression", text or "", 0)
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


def _prec(e):
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _NEG_PREC
    if isinstance(e, Num) and (e.value < 0 or str(e.value).startswith("-")):
        return 0
    return _ATOM_PREC


def _wrap(e, need):
    s = to_source(e)
    return f"({s})" if need else s


def to_source(e: Expr) -> str:
    """Print with the fewest parentheses that still parse back to ``e``."""
    if isinstance(e, Num):
        if not np.isfinite(e.value):
            raise ValueError("cannot print a non-finite literal")
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _prec(e.operand) < _NEG_PREC)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        if e.op == "^":
            left = _wrap(e.left, _prec(e.left) <= p)
            right = _wrap(e.right, _prec(e.right) < _NEG_PREC)
        else:
            left = _wrap(e.left, _prec(e.left) < p)
            right = _wrap(e.right, _prec(e.right) <= p)
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def eval_expr(e: Expr, x=0.0, i=0, y=0.0):
    """Evaluate in IEEE double; arrays broadcast.  Raises :class:`DomainError`
    instead of producing NaN or infinities."""
    env = {"x": x, "y": y, "i": i}
    scalar = all(np.ndim(v) == 0 for v in env.values())
    env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    with np.errstate(all="ignore"):
        out = _ev(e, env)
    return float(out) if scalar else out


def _ev(e, env):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_ev(e.operand, env)
    if isinstance(e, Call):
        a = _ev(e.arg, env)
        if e.func == "sqrt" and np.any(a < 0):
            raise DomainError("sqrt-negative", to_source(e))
        return FUNCTIONS[e.func](a)
    a = _ev(e.left, env)
    b = _ev(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        if np.any(b == 0):
            raise DomainError("div-zero", to_source(e))
        return a / b
    r = np.power(a, b)
    bad = ~np.isfinite(r) & np.isfinite(a) & np.isfinite(b)
    if np.any(bad):
        kind = "div-zero" if np.any(np.broadcast_to(a, np.shape(bad))[bad] == 0) else "pow-domain"
        raise DomainError(kind, to_source(e))
    return r


def free_variables(e: Expr) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return free_variables(e.operand if isinstance(e, Neg) else e.arg)
    return free_variables(e.left) | free_variables(e.right)


# ---------------------------------------------------------------------------
# map definitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExplicitBranch:
    left: float
    right: float
    forward: Expr
    derivative: Optional[Expr] = None
    inverse: Optional[Expr] = None


@dataclass(frozen=True)
class MapDefinition:
    name: str
    class_tag: MapClass
    partition_rule: Optional[Expr] = None
    branch_rule: Optional[Expr] = None
    explicit_branches: tuple = field(default=())
    derivative_rule: Optional[Expr] = None
    inverse_rule: Optional[Expr] = None
    n_branches: Optional[int] = None
    floor: Optional[float] = None

    def __post_init__(self):
        rules = self.partition_rule is not None and self.branch_rule is not None
        partial = (self.partition_rule is None) != (self.branch_rule is None)
        if partial or rules == bool(self.explicit_branches):
            raise MapDefinitionError(
                "give either partition+branch rules or an explicit branch list, not both")
        if rules and self.class_tag is not MapClass.COUNTABLE:
            raise MapDefinitionError("rule-based definitions describe countable maps")
        if self.explicit_branches and self.class_tag is not MapClass.FINITE:
            raise MapDefinitionError("explicit branch lists describe finite maps")
        checks = [("partition", self.partition_rule, {"i"}),
                  ("branch", self.branch_rule, {"x", "i"}),
                  ("derivative", self.derivative_rule, {"x", "i"}),
                  ("inverse", self.inverse_rule, {"y", "i"})]
        for b in self.explicit_branches:
            checks += [("forward", b.forward, {"x"}), ("derivative", b.derivative, {"x"}),
                       ("inverse", b.inverse, {"y"})]
        for label, e, allowed in checks:
            if e is not None and not free_variables(e) <= allowed:
                extra = sorted(free_variables(e) - allowed)
                raise MapDefinitionError(f"{label} rule uses {extra}; allowed {sorted(allowed)}")


def _with_branch(fn, i):
    def wrapped(*args):
        try:
            return fn(*args)
        except DomainError as exc:
            raise DomainError(exc.kind, exc.subexpr, branch=i) from None
    return wrapped


def compile_map(defn: MapDefinition, n_branches: Optional[int] = None,
                floor: Optional[float] = None) -> MapSpec:
    """Build a :class:`MapSpec` from a definition.

    Missing derivative rules fall back to central differences with step
    ``1e-7 * width``.  For countable maps ``n_branches`` (or else ``floor``)
    fixes how many branches are materialised; both default to the values
    stored in the definition.
    """
    if defn.explicit_branches:
        branches = []
        for idx, eb in enumerate(sorted(defn.explicit_branches, key=lambda b: -b.left), start=1):
            fwd = _with_branch(lambda x, e=eb.forward: eval_expr(e, x=x), idx)
            if eb.derivative is not None:
                der = _with_branch(lambda x, e=eb.derivative: _broadcast(eval_expr(e, x=x), x), idx)
            else:
                der = lambda x, f=fwd, l=eb.left, r=eb.right: finite_difference(f, x, l, r)
            inv = None
            if eb.inverse is not None:
                inv = _with_branch(lambda y, e=eb.inverse: _broadcast(eval_expr(e, y=y), y), idx)
            branches.append(Branch(eb.left, eb.right, fwd, der, inv, index=idx))
        return MapSpec.finite(branches, name=defn.name)

    part = defn.partition_rule
    fwd_rule = defn.branch_rule
    der_rule = defn.derivative_rule
    inv_rule = defn.inverse_rule
    family = BranchFamily(
        partition=_in_branch(lambda i: _broadcast(eval_expr(part, i=i), i)),
        forward=_in_branch(lambda x, i: eval_expr(fwd_rule, x=x, i=i)),
        derivative=_in_branch(lambda x, i: _broadcast(eval_expr(der_rule, x=x, i=i), x))
        if der_rule is not None else None,
        inverse=_in_branch(lambda y, i: _broadcast(eval_expr(inv_rule, y=y, i=i), y))
        if inv_rule is not None else None,
    )
    if n_branches is None and floor is None:
        n_branches, floor = defn.n_branches, defn.floor
    kwargs = {}
    if floor is not None:
        kwargs["a_min"] = floor
    return MapSpec.countable(family, n_branches=n_branches, name=defn.name, **kwargs)


def _broadcast(value, like):
    if np.ndim(value) == 0 and np.ndim(like) > 0:
        return np.full(np.shape(like), float(value))
    return value


def _in_branch(fn):
    """Tag DomainErrors with the branch index when ``i`` is a scalar (last argument)."""
    def call(*args):
        try:
            return fn(*args)
        except DomainError as exc:
            i = args[-1]
            branch = int(i) if np.ndim(i) == 0 else None
            raise DomainError(exc.kind, exc.subexpr, branch=branch) from None
    return call


# ---------------------------------------------------------------------------
# .map files
# ---------------------------------------------------------------------------

def _opt_expr(section, key):
    text = section.get(key)
    return parse_expr(text) if text is not None and text.strip() else None


def parse_definition(text: str) -> MapDefinition:
    """Parse the INI-style ``.map`` format (see README for the schema)."""
    cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=None, interpolation=None)
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise MapDefinitionError(f"malformed map file: {exc}") from None
    if "map" not in cp:
        raise MapDefinitionError("missing [map] section")
    head = cp["map"]
    name = head.get("name", "unnamed").strip()
    branch_sections = [s for s in cp.sections() if s.lower().startswith("branch")]
    default_class = "finite" if branch_sections else "countable"
    class_tag = MapClass.parse(head.get("class", default_class))
    explicit = []
    for s in branch_sections:
        sec = cp[s]
        try:
            left, right = float(sec["left"]), float(sec["right"])
        except KeyError as exc:
            raise MapDefinitionError(f"[{s}] needs left and right") from exc
        if "forward" not in sec:
            raise MapDefinitionError(f"[{s}] needs a forward expression")
        explicit.append(ExplicitBranch(left, right, parse_expr(sec["forward"]),
                                       _opt_expr(sec, "derivative"), _opt_expr(sec, "inverse")))
    n_br = head.get("branches")
    fl = head.get("floor")
    return MapDefinition(
        name=name,
        class_tag=class_tag,
        partition_rule=_opt_expr(head, "partition"),
        branch_rule=_opt_expr(head, "branch"),
        explicit_branches=tuple(explicit),
        derivative_rule=_opt_expr(head, "derivative"),
        inverse_rule=_opt_expr(head, "inverse"),
        n_branches=int(n_br) if n_br else None,
        floor=float(fl) if fl else None,
    )


def load_definition(path: Union[str, Path]) -> MapDefinition:
    return parse_definition(Path(path).read_text(encoding="utf-8"))


def dump_definition(defn: MapDefinition) -> str:
    """Serialise a definition back to the ``.map`` format."""
    lines = ["[map]", f"name = {defn.name}", f"class = {defn.class_tag.value}"]
    for key, e in (("partition", defn.partition_rule), ("branch", defn.branch_rule),
                   ("derivative", defn.derivative_rule), ("inverse", defn.inverse_rule)):
        if e is not None:
            lines.append(f"{key} = {to_source(e)}")
    if defn.n_branches is not None:
        lines.append(f"branches = {defn.n_branches}")
    if defn.floor is not None:
        lines.append(f"floor = {defn.floor!r}")
    for idx, b in enumerate(defn.explicit_branches, start=1):
        lines += ["", f"[branch {idx}]", f"left = {b.left!r}", f"right = {b.right!r}",
                  f"forward = {to_source(b.forward)}"]
        if b.derivative is not None:
            lines.append(f"derivative = {to_source(b.derivative)}")
        if b.inverse is not None:
            lines.append(f"inverse = {to_source(b.inverse)}")
    return "\n".join(lines) + "\n"


def shipped_map_path(name: str) -> Path:
    return Path(__file__).with_name("maps") / f"{name}.map"
