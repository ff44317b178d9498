#!/usr/bin/env python3
"""
表达式解析模块
解析关于 r 的闭式表达式（带命名参数），支持符号求导与数组求值
"""

import logging
import re
from dataclasses import dataclass
from functools import singledispatch
from typing import Dict, FrozenSet, List, Mapping, Optional, Set, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

FUNCTIONS = ("sqrt", "exp", "log", "sin", "cos", "tanh")
RADIUS = "r"

# 运算符优先级：数值越大越先结合（^ 单独处理为右结合）
BINARY_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
NEGATE_PRECEDENCE = 3
ATOM_PRECEDENCE = 5

_OPERAND_START = frozenset({"number", "identifier", "'('", "'-'"})
_OPERATOR_OR_END = frozenset({"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})

_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class ExpressionError(ValueError):
    """表达式相关错误的基类"""


class ParseError(ExpressionError):
    """语法错误，携带 0 起始的字节偏移和期望的记号集合"""

    def __init__(self, message: str, offset: int, expected: FrozenSet[str] = frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class EvaluationError(ExpressionError, ArithmeticError):
    """求值错误：除零、非正数取对数/开方、参数未绑定等"""


class DifferentiationError(ExpressionError):
    """求导错误：指数依赖 r 且底数不能保证为正"""


# ---------------------------------------------------------------------------
# 语法树节点（不可变，可跨线程共享）
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str = RADIUS


@dataclass(frozen=True)
class Parameter:
    name: str


@dataclass(frozen=True)
class Negate:
    operand: "Expression"


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class FunctionCall:
    name: str
    argument: "Expression"


Expression = Union[Constant, Variable, Parameter, Negate, BinaryOp, FunctionCall]


# ---------------------------------------------------------------------------
# 词法分析
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str      # number / identifier / op / end
    text: str
    offset: int


def _tokenize(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    while pos < len(text):
        char = text[pos]
        if not char.isascii():
            raise ParseError(f"non-ASCII character {char!r}", len(text[:pos].encode("utf-8")))
        if char.isspace():
            pos += 1
            continue
        if char.isdigit() or (char == "." and pos + 1 < len(text) and text[pos + 1].isdigit()):
            match = _NUMBER_RE.match(text, pos)
            tokens.append(_Token("number", match.group(0), pos))
            pos = match.end()
            continue
        if char.isalpha() or char == "_":
            match = _IDENT_RE.match(text, pos)
            tokens.append(_Token("identifier", match.group(0), pos))
            pos = match.end()
            continue
        if char in "+-*/^()":
            tokens.append(_Token("op", char, pos))
            pos += 1
            continue
        raise ParseError(f"unexpected character {char!r}", pos, _OPERAND_START)
    tokens.append(_Token("end", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# 递归下降语法分析
#   expr  := term (('+'|'-') term)*
#   term  := unary (('*'|'/') unary)*
#   unary := '-' unary | power
#   power := atom ('^' unary)?
#   atom  := number | identifier | function '(' expr ')' | '(' expr ')'
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _is_op(self, symbol: str) -> bool:
        return self.current.kind == "op" and self.current.text == symbol

    def parse(self) -> Expression:
        if self.current.kind == "end":
            raise ParseError("empty input", 0, _OPERAND_START)
        tree = self._expr()
        if self.current.kind != "end":
            raise ParseError(f"unexpected token {self.current.text!r}", self.current.offset, _OPERATOR_OR_END)
        return tree

    def _expr(self) -> Expression:
        left = self._term()
        while self._is_op("+") or self._is_op("-"):
            op = self._advance().text
            left = BinaryOp(op, left, self._term())
        return left

    def _term(self) -> Expression:
        left = self._unary()
        while self._is_op("*") or self._is_op("/"):
            op = self._advance().text
            left = BinaryOp(op, left, self._unary())
        return left

    def _unary(self) -> Expression:
        if self._is_op("-"):
            self._advance()
            return Negate(self._unary())
        return self._power()

    def _power(self) -> Expression:
        base = self._atom()
        if self._is_op("^"):
            self._advance()
            return BinaryOp("^", base, self._unary())
        return base

    def _atom(self) -> Expression:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Constant(float(token.text))
        if token.kind == "identifier":
            self._advance()
            followed_by_paren = self._is_op("(")
            if token.text in FUNCTIONS:
                if not followed_by_paren:
                    raise ParseError(f"function {token.text!r} needs an argument",
                                     self.current.offset, frozenset({"'('"}))
                self._advance()
                argument = self._expr()
                self._expect_close(token.offset)
                return FunctionCall(token.text, argument)
            if followed_by_paren:
                raise ParseError(f"unknown function {token.text!r}", token.offset,
                                 frozenset(f"'{name}'" for name in FUNCTIONS))
            if token.text == RADIUS:
                return Variable()
            return Parameter(token.text)
        if token.kind == "op" and token.text == "(":
            self._advance()
            inner = self._expr()
            self._expect_close(token.offset)
            return inner
        if token.kind == "end":
            raise ParseError("unexpected end of input", token.offset, _OPERAND_START)
        raise ParseError(f"unexpected token {token.text!r}", token.offset, _OPERAND_START)

    def _expect_close(self, open_offset: int) -> None:
        if not self._is_op(")"):
            logger.debug("未闭合的括号，起始偏移 %d", open_offset)
            raise ParseError("unbalanced parentheses", self.current.offset,
                             frozenset({"')'"}) | _OPERATOR_OR_END - {"end of input"})
        self._advance()


def parse(text: str) -> Expression:
    """解析表达式字符串，返回唯一的语法树"""
    if not isinstance(text, str):
        raise ParseError("expression must be a string", 0, _OPERAND_START)
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# 打印（parse(to_text(e)) 与 e 结构相同）
# ---------------------------------------------------------------------------

def _format_number(value: float) -> str:
    if value < 0:
        return f"(-{_format_number(-value)})"
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _precedence(node: Expression) -> int:
    if isinstance(node, BinaryOp):
        return BINARY_PRECEDENCE[node.op]
    if isinstance(node, Negate):
        return NEGATE_PRECEDENCE
    return ATOM_PRECEDENCE


def to_text(node: Expression) -> str:
    """把语法树打印为可再次解析的文本"""
    if isinstance(node, Constant):
        return _format_number(node.value)
    if isinstance(node, (Variable, Parameter)):
        return node.name
    if isinstance(node, FunctionCall):
        return f"{node.name}({to_text(node.argument)})"
    if isinstance(node, Negate):
        inner = to_text(node.operand)
        if isinstance(node.operand, BinaryOp) and node.operand.op != "^":
            inner = f"({inner})"
        return f"-{inner}"
    if node.op == "^":
        base = to_text(node.left)
        if isinstance(node.left, (BinaryOp, Negate)) or (
                isinstance(node.left, Constant) and node.left.value < 0):
            base = f"({base})"
        exponent = to_text(node.right)
        if isinstance(node.right, BinaryOp) and node.right.op != "^":
            exponent = f"({exponent})"
        return f"{base}^{exponent}"
    own = BINARY_PRECEDENCE[node.op]
    left = to_text(node.left)
    if isinstance(node.left, BinaryOp) and _precedence(node.left) < own:
        left = f"({left})"
    right = to_text(node.right)
    if isinstance(node.right, BinaryOp) and _precedence(node.right) <= own:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# ---------------------------------------------------------------------------
# 结构查询
# ---------------------------------------------------------------------------

def parameters(node: Expression) -> Set[str]:
    """表达式中出现的全部参数名"""
    if isinstance(node, Parameter):
        return {node.name}
    if isinstance(node, Negate):
        return parameters(node.operand)
    if isinstance(node, FunctionCall):
        return parameters(node.argument)
    if isinstance(node, BinaryOp):
        return parameters(node.left) | parameters(node.right)
    return set()


def depends_on_radius(node: Expression) -> bool:
    if isinstance(node, Variable):
        return True
    if isinstance(node, Negate):
        return depends_on_radius(node.operand)
    if isinstance(node, FunctionCall):
        return depends_on_radius(node.argument)
    if isinstance(node, BinaryOp):
        return depends_on_radius(node.left) or depends_on_radius(node.right)
    return False


def _provably_positive(node: Expression) -> bool:
    if isinstance(node, Constant):
        return node.value > 0
    if isinstance(node, FunctionCall):
        return node.name == "exp" or (node.name == "sqrt" and _provably_positive(node.argument))
    if isinstance(node, BinaryOp) and node.op in "+*/":
        return _provably_positive(node.left) and _provably_positive(node.right)
    if isinstance(node, BinaryOp) and node.op == "^":
        return _provably_positive(node.left)
    return False


# ---------------------------------------------------------------------------
# 常量折叠构造器（只折叠全常量子树）
# ---------------------------------------------------------------------------

def _fold(node: Expression) -> Expression:
    children = []
    if isinstance(node, Negate):
        children = [node.operand]
    elif isinstance(node, BinaryOp):
        children = [node.left, node.right]
    elif isinstance(node, FunctionCall):
        children = [node.argument]
    if not children or not all(isinstance(child, Constant) for child in children):
        return node
    try:
        value = float(evaluate(node, 1.0, {}))
    except EvaluationError:
        return node
    return Constant(value)


def _neg(a: Expression) -> Expression:
    return _fold(Negate(a))


def _bin(op: str, a: Expression, b: Expression) -> Expression:
    return _fold(BinaryOp(op, a, b))


def _call(name: str, a: Expression) -> Expression:
    return _fold(FunctionCall(name, a))


# ---------------------------------------------------------------------------
# 符号求导
# ---------------------------------------------------------------------------

@singledispatch
def differentiate(node) -> Expression:
    """对 r 求导，返回新的语法树（不做常量折叠以外的化简）"""
    raise DifferentiationError(f"cannot differentiate {type(node).__name__}")


@differentiate.register(Constant)
@differentiate.register(Parameter)
def _(node) -> Expression:
    return Constant(0.0)


@differentiate.register(Variable)
def _(node) -> Expression:
    return Constant(1.0)


@differentiate.register(Negate)
def _(node) -> Expression:
    return _neg(differentiate(node.operand))


@differentiate.register(BinaryOp)
def _(node) -> Expression:
    u, v = node.left, node.right
    du, dv = differentiate(u), differentiate(v)
    if node.op in "+-":
        return _bin(node.op, du, dv)
    if node.op == "*":
        return _bin("+", _bin("*", du, v), _bin("*", u, dv))
    if node.op == "/":
        numerator = _bin("-", _bin("*", du, v), _bin("*", u, dv))
        return _bin("/", numerator, _bin("^", v, Constant(2.0)))
    # 幂：指数与 r 无关时用幂法则
    if not depends_on_radius(v):
        return _bin("*", _bin("*", v, _bin("^", u, _bin("-", v, Constant(1.0)))), du)
    if not _provably_positive(u):
        raise DifferentiationError(
            f"'^' with r-dependent exponent needs a provably positive base: {to_text(node)}")
    inner = _bin("+", _bin("*", dv, _call("log", u)), _bin("/", _bin("*", v, du), u))
    return _bin("*", node, inner)


@differentiate.register(FunctionCall)
def _(node) -> Expression:
    u = node.argument
    du = differentiate(u)
    if node.name == "sqrt":
        outer = _bin("/", Constant(1.0), _bin("*", Constant(2.0), node))
    elif node.name == "exp":
        outer = node
    elif node.name == "log":
        outer = _bin("/", Constant(1.0), u)
    elif node.name == "sin":
        outer = _call("cos", u)
    elif node.name == "cos":
        outer = _neg(_call("sin", u))
    else:  # tanh
        outer = _bin("-", Constant(1.0), _bin("^", node, Constant(2.0)))
    return _bin("*", outer, du)


# ---------------------------------------------------------------------------
# 数值求值（标量或 numpy 数组，逐元素确定性）
# ---------------------------------------------------------------------------

Number = Union[float, np.ndarray]


@singledispatch
def _eval(node, r: np.ndarray, bindings: Mapping[str, float]) -> np.ndarray:
    raise EvaluationError(f"unknown node {type(node).__name__}")


@_eval.register(Constant)
def _(node, r, bindings):
    return np.asarray(node.value, dtype=float)


@_eval.register(Variable)
def _(node, r, bindings):
    return r


@_eval.register(Parameter)
def _(node, r, bindings):
    if node.name not in bindings:
        raise EvaluationError(f"unbound parameter {node.name!r}")
    return np.asarray(float(bindings[node.name]), dtype=float)


@_eval.register(Negate)
def _(node, r, bindings):
    return -_eval(node.operand, r, bindings)


@_eval.register(BinaryOp)
def _(node, r, bindings):
    left = _eval(node.left, r, bindings)
    right = _eval(node.right, r, bindings)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if np.any(right == 0.0):
            raise EvaluationError(f"division by zero in {to_text(node)}")
        return left / right
    exponent_is_constant = not depends_on_radius(node.right)
    if not exponent_is_constant and np.any(left <= 0.0):
        raise EvaluationError(f"'^' with r-dependent exponent needs a positive base: {to_text(node)}")
    if np.any((left == 0.0) & (right < 0.0)):
        raise EvaluationError(f"division by zero in {to_text(node)}")
    if np.any((left < 0.0) & (right != np.round(right))):
        raise EvaluationError(f"negative base with non-integer exponent in {to_text(node)}")
    return np.power(left, right)


@_eval.register(FunctionCall)
def _(node, r, bindings):
    argument = _eval(node.argument, r, bindings)
    if node.name == "sqrt":
        if np.any(argument <= 0.0):
            raise EvaluationError(f"sqrt of non-positive argument in {to_text(node)}")
        return np.sqrt(argument)
    if node.name == "log":
        if np.any(argument <= 0.0):
            raise EvaluationError(f"log of non-positive argument in {to_text(node)}")
        return np.log(argument)
    return getattr(np, node.name)(argument)


def evaluate(node: Expression, r: Number, bindings: Optional[Mapping[str, float]] = None) -> Number:
    """在半径 r（标量或数组）处求值；结果必须有限"""
    bindings = bindings or {}
    radius = np.asarray(r, dtype=float)
    with np.errstate(all="ignore"):
        value = _eval(node, radius, bindings)
    value = np.broadcast_to(value, radius.shape).astype(float)
    if not np.all(np.isfinite(value)):
        raise EvaluationError(f"non-finite value of {to_text(node)}")
    if value.ndim == 0:
        return float(value)
    return value


def bind_check(node: Expression, bindings: Mapping[str, float]) -> None:
    """确认所有参数都已绑定"""
    missing = sorted(parameters(node) - set(bindings))
    if missing:
        raise EvaluationError(f"unbound parameter(s): {', '.join(missing)}")


def parse_bindings(pairs: List[str]) -> Dict[str, float]:
    """解析 NAME=VALUE 形式的参数绑定"""
    bindings: Dict[str, float] = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        name = name.strip()
        if not sep or not _IDENT_RE.fullmatch(name) or name == RADIUS:
            raise ExpressionError(f"invalid parameter binding {pair!r}")
        try:
            bindings[name] = float(value)
        except ValueError as exc:
            raise ExpressionError(f"invalid value in binding {pair!r}") from exc
    return bindings


__all__: Tuple[str, ...] = (
    "Expression", "Constant", "Variable", "Parameter", "Negate", "BinaryOp", "FunctionCall",
    "ExpressionError", "ParseError", "EvaluationError", "DifferentiationError",
    "parse", "to_text", "differentiate", "evaluate", "parameters", "depends_on_radius",
    "bind_check", "parse_bindings", "FUNCTIONS",
)
