"""
Scalar Expression Language
Parses the expressions used for moment maps, objectives, events, cumulants and
crossing boundaries, and evaluates them at points, over boxes (natural
interval extension) and by central differences.

Grammar (EBNF):

    expr   = term { ("+" | "-") term } ;
    term   = unary { ("*" | "/") unary } ;
    unary  = "-" unary | power ;
    power  = atom [ "^" [ "-" ] integer ] ;
    atom   = number | variable | call | "(" expr ")" ;
    call   = ( "min" | "max" | "abs" | "exp" | "ln" ) "(" expr { "," expr } ")" ;
"""

import math
import re
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from config.settings import FD_RELATIVE_STEP
from services.errors import (ArityError, DomainError, ExprSyntaxError,
                             UnknownIdentifierError)
from services.interval import Interval, interval_max, interval_min

FUNCTIONS = {
    "abs": (1, 1),
    "exp": (1, 1),
    "ln": (1, 1),
    "min": (1, None),
    "max": (1, None),
}

_ATOM, _POWER, _UNARY, _PRODUCT, _SUM = 5, 4, 3, 2, 1


# --------- AST ---------

class Expr:
    """Base class of expression nodes"""

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def _point(self, x):
        return self.value

    def _interval(self, box):
        return Interval.point(self.value)


@dataclass(frozen=True)
class Var(Expr):
    index: int
    name: str

    def _point(self, x):
        return x[..., self.index]

    def _interval(self, box):
        return box[self.index]


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def _point(self, x):
        return -self.arg._point(x)

    def _interval(self, box):
        return -self.arg._interval(box)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def _point(self, x):
        a = self.left._point(x)
        b = self.right._point(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0.0):
            raise DomainError(f"division by zero in {render(self)}", self)
        return a / b

    def _interval(self, box):
        a = self.left._interval(box)
        b = self.right._interval(box)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def _point(self, x):
        value = self.base._point(x)
        if self.exponent < 0 and np.any(np.asarray(value) == 0.0):
            raise DomainError(f"division by zero in {render(self)}", self)
        if isinstance(value, np.ndarray):
            return np.power(value, float(self.exponent))
        try:
            return float(value) ** self.exponent
        except OverflowError as error:
            raise DomainError(f"overflow in {render(self)}", self) from error

    def _interval(self, box):
        return self.base._interval(box) ** self.exponent


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: Tuple[Expr, ...]

    def _point(self, x):
        values = [arg._point(x) for arg in self.args]
        if self.func == "min":
            return _reduce(np.minimum, values)
        if self.func == "max":
            return _reduce(np.maximum, values)
        value = values[0]
        if self.func == "abs":
            return np.abs(value)
        if self.func == "exp":
            return np.exp(value)
        if np.any(np.asarray(value) <= 0.0):
            raise DomainError(f"ln of a nonpositive value in {render(self)}", self)
        return np.log(value)

    def _interval(self, box):
        values = [arg._interval(box) for arg in self.args]
        if self.func == "min":
            return interval_min(values)
        if self.func == "max":
            return interval_max(values)
        value = values[0]
        if self.func == "abs":
            return abs(value)
        if self.func == "exp":
            return value.exp()
        return value.log()


def _reduce(ufunc, values):
    result = values[0]
    for value in values[1:]:
        result = ufunc(result, value)
    return result


# --------- Parsing ---------

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def default_names(dimension):
    return tuple(f"x{i + 1}" for i in range(dimension))


def _tokenize(text):
    tokens = []
    position = 0
    while position < len(text):
        if text[position:].strip() == "":
            position = len(text)
            break
        match = _TOKEN.match(text, position)
        if not match or match.end() == position:
            offset = position + len(text[position:]) - len(text[position:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[offset]!r}", _bytes(text, offset))
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(_Token(kind, match.group(kind), _bytes(text, start)))
        position = match.end()
    tokens.append(_Token("end", "", _bytes(text, len(text))))
    return tokens


def _bytes(text, offset):
    return len(text[:offset].encode("utf-8"))


class _Parser:
    def __init__(self, text, names):
        self.tokens = _tokenize(text)
        self.position = 0
        self.names = {name: index for index, name in enumerate(names)}

    @property
    def current(self):
        return self.tokens[self.position]

    def peek(self, ahead=1):
        index = min(self.position + ahead, len(self.tokens) - 1)
        return self.tokens[index]

    def advance(self):
        token = self.current
        self.position += 1
        return token

    def accept(self, text):
        if self.current.kind == "op" and self.current.text == text:
            return self.advance()
        return None

    def expect(self, text):
        token = self.accept(text)
        if token is None:
            self.fail(f"expected {text!r}")
        return token

    def literal(self):
        token = self.advance()
        value = float(token.text)
        if not math.isfinite(value):
            raise ExprSyntaxError(f"numeric literal {token.text!r} is not finite", token.offset)
        return value

    def fail(self, message):
        token = self.current
        if token.kind == "end":
            raise ExprSyntaxError(f"{message}, found end of input", token.offset)
        raise ExprSyntaxError(f"{message}, found {token.text!r}", token.offset)

    def parse(self):
        node = self.expr()
        if self.current.kind != "end":
            self.fail("unexpected trailing input")
        return node

    def expr(self):
        node = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            following = self.peek()
            if self.current.kind == "number" and not (following.kind == "op" and following.text == "^"):
                return Num(-self.literal())
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        if self.accept("^"):
            sign = -1 if self.accept("-") else 1
            token = self.current
            if token.kind != "number" or not token.text.isdigit():
                self.fail("integer exponent expected")
            self.advance()
            node = Pow(node, sign * int(token.text))
        return node

    def atom(self):
        token = self.current
        if token.kind == "number":
            return Num(self.literal())
        if token.kind == "ident":
            self.advance()
            if token.text in FUNCTIONS:
                return self.call(token)
            if token.text not in self.names:
                raise UnknownIdentifierError(f"unknown identifier {token.text!r} at offset {token.offset}")
            return Var(self.names[token.text], token.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.fail("expression expected")

    def call(self, name_token):
        self.expect("(")
        args = [self.expr()]
        while self.accept(","):
            args.append(self.expr())
        self.expect(")")
        low, high = FUNCTIONS[name_token.text]
        if len(args) < low or (high is not None and len(args) > high):
            raise ArityError(
                f"{name_token.text} takes {low if high == low else f'at least {low}'} "
                f"argument(s), got {len(args)}"
            )
        return Call(name_token.text, tuple(args))


def parse(text, dimension=None, names=None):
    """
    Parse `text` into an Expr.
    Variables are x1..x<dimension> unless explicit `names` are given
    (e.g. ("s",) for cumulants, ("n",) for crossing boundaries).
    """
    if names is None:
        if dimension is None:
            raise ValueError("either dimension or names is required")
        names = default_names(dimension)
    return _Parser(text, tuple(names)).parse()


# --------- Rendering ---------

def _precedence(node):
    if isinstance(node, Num):
        return _UNARY if node.value < 0 else _ATOM
    if isinstance(node, (Var, Call)):
        return _ATOM
    if isinstance(node, Pow):
        return _POWER
    if isinstance(node, Neg):
        return _UNARY
    return _SUM if node.op in "+-" else _PRODUCT


def _wrapped(node, needs_parens):
    text = render(node)
    return f"({text})" if needs_parens else text


def render(node):
    """Canonical text form; parse(render(e)) == e"""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        if isinstance(node.arg, Num):
            return f"-({render(node.arg)})"
        return "-" + _wrapped(node.arg, _precedence(node.arg) < _UNARY)
    if isinstance(node, Pow):
        return f"{_wrapped(node.base, _precedence(node.base) < _ATOM)}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(render(arg) for arg in node.args)})"
    level = _SUM if node.op in "+-" else _PRODUCT
    left = _wrapped(node.left, _precedence(node.left) < level)
    right = _wrapped(node.right, _precedence(node.right) <= level)
    return f"{left} {node.op} {right}"


# --------- Evaluation ---------

def variables_used(node):
    """Indices of the variables referenced by `node`"""
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Pow)):
        return variables_used(node.arg if isinstance(node, Neg) else node.base)
    if isinstance(node, BinOp):
        return variables_used(node.left) | variables_used(node.right)
    used = set()
    for arg in node.args:
        used |= variables_used(arg)
    return used


def max_variable_index(node):
    used = variables_used(node)
    return max(used) if used else -1


def eval_point(node, x):
    """
    Evaluate at one point (1-D `x`, returns float) or at many points
    (2-D `x` with one point per row, returns an array).
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        value = node._point(x)
    if x.ndim <= 1:
        return float(value)
    return np.broadcast_to(np.asarray(value, dtype=float), x.shape[:-1]).copy()


def eval_interval(node, box):
    """
    Natural interval extension over `box` (a BoxRegion or a sequence of
    Intervals); contains every point value of `node` on the box.
    """
    if hasattr(box, "lower"):
        box = [Interval(lo, hi) for lo, hi in zip(box.lower, box.upper)]
    try:
        return node._interval(box)
    except DomainError as error:
        if error.subtree is None:
            error.subtree = node
        raise


_ZERO = Interval(0.0, 0.0)
_SIGNS = Interval(-1.0, 1.0)


def _interval_gradient(node, box):
    """(value, gradient) enclosures by forward-mode differentiation over `box`"""
    d = len(box)
    if isinstance(node, Num):
        return Interval.point(node.value), [_ZERO] * d
    if isinstance(node, Var):
        grad = [_ZERO] * d
        grad[node.index] = Interval(1.0, 1.0)
        return box[node.index], grad
    if isinstance(node, Neg):
        value, grad = _interval_gradient(node.arg, box)
        return -value, [-g for g in grad]
    if isinstance(node, BinOp):
        u, du = _interval_gradient(node.left, box)
        v, dv = _interval_gradient(node.right, box)
        if node.op == "+":
            return u + v, [a + b for a, b in zip(du, dv)]
        if node.op == "-":
            return u - v, [a - b for a, b in zip(du, dv)]
        if node.op == "*":
            return u * v, [a * v + u * b for a, b in zip(du, dv)]
        quotient = u / v
        return quotient, [(a - quotient * b) / v for a, b in zip(du, dv)]
    if isinstance(node, Pow):
        u, du = _interval_gradient(node.base, box)
        if node.exponent == 0:
            return Interval(1.0, 1.0), [_ZERO] * d
        slope = node.exponent * u ** (node.exponent - 1)
        return u ** node.exponent, [slope * a for a in du]
    results = [_interval_gradient(arg, box) for arg in node.args]
    values = [value for value, _ in results]
    if node.func in ("min", "max"):
        if node.func == "min":
            value = interval_min(values)
            active = [grad for v, grad in results if v.lo <= value.hi]
        else:
            value = interval_max(values)
            active = [grad for v, grad in results if v.hi >= value.lo]
        grad = list(active[0])
        for other in active[1:]:
            grad = [a.hull(b) for a, b in zip(grad, other)]
        return value, grad
    u, du = results[0]
    if node.func == "abs":
        if u.lo >= 0.0:
            return u, du
        if u.hi <= 0.0:
            return -u, [-a for a in du]
        return abs(u), [_SIGNS * a for a in du]
    if node.func == "exp":
        value = u.exp()
        return value, [value * a for a in du]
    value = u.log()
    return value, [a / u for a in du]


def eval_centered(node, box):
    """
    Mean-value form f(c) + grad f(box) . (box - c) intersected with the natural
    extension; much tighter on small boxes and on cancelling terms.
    """
    if hasattr(box, "lower"):
        box = [Interval(lo, hi) for lo, hi in zip(box.lower, box.upper)]
    natural, grad = _interval_gradient(node, box)
    try:
        center = [Interval.point(b.midpoint) for b in box]
        value = node._interval(center)
    except DomainError:
        return natural
    for g, b, c in zip(grad, box, center):
        value = value + g * (b - c)
    return natural.intersect(value)


def grad_fd(node, x, h=None):
    """Central-difference gradient; default step is FD_RELATIVE_STEP * max(1, |x_i|)"""
    x = np.asarray(x, dtype=float)
    gradient = np.empty_like(x)
    for i in range(x.size):
        step = h if h is not None else FD_RELATIVE_STEP * max(1.0, abs(x[i]))
        forward = x.copy()
        backward = x.copy()
        forward[i] += step
        backward[i] -= step
        gradient[i] = (eval_point(node, forward) - eval_point(node, backward)) / (2.0 * step)
    return gradient
