"""
Scalar expression language over the state variables x1..xn.

Expressions are parsed once into an immutable AST and evaluated either with
plain floats or with DualNumber inputs. One forward-mode pass per seed
direction gives an exact directional derivative, so a gradient costs n passes.

Grammar (precedence high to low, ``^`` right-associative)::

    atom     : NUMBER | x<k> | func '(' expr ')' | '(' expr ')'
    power    : atom ['^' unary]
    unary    : '-' unary | power
    term     : unary (('*' | '/') unary)*
    expr     : term (('+' | '-') term)*

Supported functions: sin, cos, tanh, exp, ln, sqrt, abs. The derivative of
``abs`` and ``sqrt`` at 0 is defined as 0.
"""

import math
import re
from dataclasses import dataclass
from typing import FrozenSet, List, Sequence, Tuple, Union

import numpy as np

from .exceptions import DimensionError, ExpressionSyntaxError, NonFiniteError, UnknownIdentifierError


class DualNumber:
    """Number of the form value + derivative·ε with ε² = 0."""

    __slots__ = ("value", "derivative")

    def __init__(self, value: float, derivative: float = 0.0):
        self.value = value
        self.derivative = derivative

    def __repr__(self):
        return f"DualNumber({self.value!r}, {self.derivative!r})"

    @staticmethod
    def _lift(other) -> "DualNumber":
        if isinstance(other, DualNumber):
            return other
        return DualNumber(float(other), 0.0)

    def __neg__(self):
        return DualNumber(-self.value, -self.derivative)

    def __add__(self, other):
        other = self._lift(other)
        return DualNumber(self.value + other.value, self.derivative + other.derivative)

    def __radd__(self, other):
        return self._lift(other) + self

    def __sub__(self, other):
        other = self._lift(other)
        return DualNumber(self.value - other.value, self.derivative - other.derivative)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        return DualNumber(
            self.value * other.value,
            self.derivative * other.value + self.value * other.derivative,
        )

    def __rmul__(self, other):
        return self._lift(other) * self

    def __truediv__(self, other):
        other = self._lift(other)
        value = self.value / other.value
        derivative = (self.derivative * other.value - self.value * other.derivative) / (other.value * other.value)
        return DualNumber(value, derivative)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, other):
        other = self._lift(other)
        value = _real_power(self.value, other.value)
        derivative = 0.0
        if self.derivative != 0.0 and other.value != 0.0:
            derivative += other.value * _real_power(self.value, other.value - 1.0) * self.derivative
        if other.derivative != 0.0:
            derivative += value * math.log(self.value) * other.derivative
        return DualNumber(value, derivative)

    def __rpow__(self, other):
        return self._lift(other) ** self

    def sin(self):
        return DualNumber(math.sin(self.value), math.cos(self.value) * self.derivative)

    def cos(self):
        return DualNumber(math.cos(self.value), -math.sin(self.value) * self.derivative)

    def tanh(self):
        t = math.tanh(self.value)
        return DualNumber(t, (1.0 - t * t) * self.derivative)

    def exp(self):
        e = math.exp(self.value)
        return DualNumber(e, e * self.derivative)

    def ln(self):
        return DualNumber(math.log(self.value), self.derivative / self.value)

    def sqrt(self):
        s = math.sqrt(self.value)
        return DualNumber(s, self.derivative / (2.0 * s) if s > 0.0 else 0.0)

    def abs(self):
        sign = (self.value > 0.0) - (self.value < 0.0)
        return DualNumber(abs(self.value), sign * self.derivative)


def _real_power(base: float, exponent: float) -> float:
    result = base ** exponent
    if isinstance(result, complex):
        raise ValueError(f"{base!r}^{exponent!r} is not real")
    return result


_FLOAT_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tanh": math.tanh,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
}

FUNCTIONS: FrozenSet[str] = frozenset(_FLOAT_FUNCTIONS)


# AST ==================================================================================

@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Variable:
    index: int  # 1-based


@dataclass(frozen=True)
class Negate:
    operand: "Node"


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    argument: "Node"


Node = Union[Number, Variable, Negate, BinaryOp, Call]


def constant(value: float) -> Node:
    """Literal node; negative values become a negated literal so they print and re-parse identically."""
    value = float(value)
    if value < 0.0:
        return Negate(Number(-value))
    return Number(value)


def variable(index: int) -> Variable:
    return Variable(index)


def sum_of(terms: Sequence[Node]) -> Node:
    """Left-folded sum; a leading negated term is kept, later ones become subtractions."""
    if not terms:
        return Number(0.0)
    total = terms[0]
    for term in terms[1:]:
        if isinstance(term, Negate):
            total = BinaryOp("-", total, term.operand)
        else:
            total = BinaryOp("+", total, term)
    return total


# Tokenizer / parser ===================================================================

_TOKEN_RE = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^(),])"
)
_VARIABLE_RE = re.compile(r"x(\d+)")

_BINARY_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}

Token = Tuple[str, str, int]


def _tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(source):
        if source[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise ExpressionSyntaxError(f"Unexpected character '{source[pos]}'", pos)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), pos))
        pos = match.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    """Recursive descent with precedence climbing for the binary operators."""

    def __init__(self, source: str, n: int):
        self.source = source
        self.n = n
        self.tokens = _tokenize(source)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _error(self, message: str):
        kind, text, pos = self.current
        if kind == "end":
            raise ExpressionSyntaxError(f"{message}: unexpected end of input", pos)
        raise ExpressionSyntaxError(f"{message}: unexpected token '{text}'", pos)

    def _expect(self, text: str):
        if self.current[0] == "op" and self.current[1] == text:
            self._advance()
        else:
            self._error(f"Expected '{text}'")

    def parse(self) -> Node:
        if self.current[0] == "end":
            raise ExpressionSyntaxError("Empty expression", 0)
        node = self._expression(1)
        if self.current[0] != "end":
            self._error("Trailing input")
        return node

    def _expression(self, min_precedence: int) -> Node:
        left = self._unary()
        while True:
            kind, text, _ = self.current
            precedence = _BINARY_PRECEDENCE.get(text) if kind == "op" else None
            if precedence is None or precedence < min_precedence:
                return left
            self._advance()
            right = self._expression(precedence + 1)
            left = BinaryOp(text, left, right)

    def _unary(self) -> Node:
        if self.current[0] == "op" and self.current[1] == "-":
            self._advance()
            return Negate(self._unary())
        return self._power()

    def _power(self) -> Node:
        base = self._atom()
        if self.current[0] == "op" and self.current[1] == "^":
            self._advance()
            return BinaryOp("^", base, self._unary())
        return base

    def _atom(self) -> Node:
        kind, text, pos = self.current
        if kind == "number":
            self._advance()
            return Number(float(text))
        if kind == "name":
            self._advance()
            if text in FUNCTIONS:
                self._expect("(")
                argument = self._expression(1)
                self._expect(")")
                return Call(text, argument)
            match = _VARIABLE_RE.fullmatch(text)
            if match is None:
                raise UnknownIdentifierError(text, pos)
            index = int(match.group(1))
            if not 1 <= index <= self.n:
                raise DimensionError(f"Variable '{text}' at position {pos} is outside x1..x{self.n}")
            return Variable(index)
        if kind == "op" and text == "(":
            self._advance()
            node = self._expression(1)
            self._expect(")")
            return node
        self._error("Expected a number, variable, function call or '('")


# Printing =============================================================================

def _precedence(node: Node) -> int:
    if isinstance(node, BinaryOp):
        return 4 if node.op == "^" else _BINARY_PRECEDENCE[node.op]
    if isinstance(node, Negate):
        return 3
    return 5


def _format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _wrap(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


def to_text(node: Node) -> str:
    """Canonical text form; parsing it reproduces the same AST."""
    if isinstance(node, Number):
        return _format_number(node.value)
    if isinstance(node, Variable):
        return f"x{node.index}"
    if isinstance(node, Call):
        return f"{node.name}({to_text(node.argument)})"
    if isinstance(node, Negate):
        return "-" + _wrap(to_text(node.operand), _precedence(node.operand) < 3)
    if node.op == "^":
        left = _wrap(to_text(node.left), _precedence(node.left) <= 4)
        right = _wrap(to_text(node.right), _precedence(node.right) < 3)
        return f"{left}^{right}"
    own = _BINARY_PRECEDENCE[node.op]
    left = _wrap(to_text(node.left), _precedence(node.left) < own)
    right = _wrap(to_text(node.right), _precedence(node.right) <= own)
    if node.op in "+-":
        return f"{left} {node.op} {right}"
    return f"{left}{node.op}{right}"


# Evaluation ===========================================================================

def _apply(name: str, argument):
    if isinstance(argument, DualNumber):
        return getattr(argument, name)()
    return _FLOAT_FUNCTIONS[name](argument)


def _eval(node: Node, point: Sequence):
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Variable):
        return point[node.index - 1]
    if isinstance(node, Negate):
        return -_eval(node.operand, point)
    if isinstance(node, Call):
        return _apply(node.name, _eval(node.argument, point))
    left = _eval(node.left, point)
    right = _eval(node.right, point)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        return left / right
    if isinstance(left, DualNumber) or isinstance(right, DualNumber):
        return DualNumber._lift(left) ** right
    return _real_power(left, right)


def _variables(node: Node) -> FrozenSet[int]:
    if isinstance(node, Variable):
        return frozenset({node.index})
    if isinstance(node, Number):
        return frozenset()
    if isinstance(node, Negate):
        return _variables(node.operand)
    if isinstance(node, Call):
        return _variables(node.argument)
    return _variables(node.left) | _variables(node.right)


@dataclass(frozen=True)
class Expression:
    """Parsed scalar expression over x1..xn. Immutable and safe to share."""

    root: Node
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"Dimension must be positive, got {self.n}")
        used = _variables(self.root)
        if used and max(used) > self.n:
            raise DimensionError(f"Expression references x{max(used)} but dimension is {self.n}")

    def __str__(self) -> str:
        return to_text(self.root)

    @property
    def variables(self) -> FrozenSet[int]:
        return _variables(self.root)

    def _check_point(self, point: Sequence) -> None:
        if len(point) != self.n:
            raise DimensionError(f"Expression over {self.n} variables evaluated at a point of length {len(point)}")

    def evaluate_dual(self, point: Sequence[DualNumber]) -> DualNumber:
        self._check_point(point)
        try:
            result = _eval(self.root, point)
        except (ZeroDivisionError, ValueError, OverflowError) as e:
            raise NonFiniteError(f"Evaluation of '{self}' failed: {e}") from e
        return DualNumber._lift(result)

    def evaluate(self, point: Sequence[float]) -> float:
        self._check_point(point)
        values = [float(v) for v in point]
        try:
            result = float(_eval(self.root, values))
        except (ZeroDivisionError, ValueError, OverflowError) as e:
            raise NonFiniteError(f"Evaluation of '{self}' failed: {e}") from e
        if not math.isfinite(result):
            raise NonFiniteError(f"Evaluation of '{self}' at {values} is not finite")
        return result

    def gradient(self, point: Sequence[float]) -> np.ndarray:
        self._check_point(point)
        values = [float(v) for v in point]
        if not self.variables:
            return np.zeros(self.n)
        grad = np.zeros(self.n)
        for i in sorted(self.variables):
            seeded = [DualNumber(v, 1.0 if j == i - 1 else 0.0) for j, v in enumerate(values)]
            result = self.evaluate_dual(seeded)
            if not (math.isfinite(result.value) and math.isfinite(result.derivative)):
                raise NonFiniteError(f"Derivative of '{self}' w.r.t. x{i} at {values} is not finite")
            grad[i - 1] = result.derivative
        return grad


def parse(source: str, n: int) -> Expression:
    """Parses source into an Expression over x1..xn."""
    if not isinstance(source, str):
        raise ExpressionSyntaxError(f"Expression must be text, got {type(source).__name__}", 0)
    return Expression(_Parser(source, n).parse(), n)


def evaluate(expr: Expression, point: Sequence[float]) -> float:
    return expr.evaluate(point)


def gradient(expr: Expression, point: Sequence[float]) -> np.ndarray:
    return expr.gradient(point)
