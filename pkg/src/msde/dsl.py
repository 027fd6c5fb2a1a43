"""A small arithmetic expression language for model coefficients.

Grammar (precedence loosest to tightest, '^' binds tighter than unary minus):

    sum     := term (('+' | '-') term)*          left-associative
    term    := unary (('*' | '/') unary)*        left-associative
    unary   := '-' unary | power
    power   := atom ('^' unary)?                 right-associative
    atom    := number | name | name '(' sum ')' | '(' sum ')'

Exponents must fold to nonnegative integer constants.  Every node carries
its source span; errors point at line:column and say what was expected.
Parsing folds constant subtrees, compilation resolves names against the
model dimensions (t, x1..xd1, y1..yd2) and emits a postfix program whose
scalar evaluator reuses one preallocated stack: no per-call allocation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

MAX_DEPTH = 64
MAX_INT_EXPONENT = 1000

FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "tanh": math.tanh,
    "abs": abs,
    "sqrt": math.sqrt,
    "log": math.log,
}

_BATCH_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "log": np.log,
}

CONSTANTS = {"pi": math.pi}


class DslError(ValueError):
    """Parse, compile or evaluation error with source position."""

    def __init__(self, message: str, source: str, span: tuple[int, int]):
        self.span = span
        self.line, self.col = _line_col(source, span[0])
        self.bare_message = message
        super().__init__(f"{self.line}:{self.col}: {message}")


def _line_col(source: str, offset: int) -> tuple[int, int]:
    line = source.count("\n", 0, offset) + 1
    last_nl = source.rfind("\n", 0, offset)
    col = offset - last_nl
    return line, col


# ---------------------------------------------------------------------------
# tokens
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, lparen, rparen, eof
    text: str
    start: int
    end: int


def _tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == ".":
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            tokens.append(Token("num", source[i:j], i, j))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token("name", source[i:j], i, j))
            i = j
            continue
        if ch in "+-*/^":
            tokens.append(Token("op", ch, i, i + 1))
            i += 1
            continue
        if ch == "(":
            tokens.append(Token("lparen", ch, i, i + 1))
            i += 1
            continue
        if ch == ")":
            tokens.append(Token("rparen", ch, i, i + 1))
            i += 1
            continue
        raise DslError(f"unexpected character {ch!r}", source, (i, i + 1))
    tokens.append(Token("eof", "", n, n))
    return tokens


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    span: tuple[int, int]


@dataclass(frozen=True)
class Name:
    ident: str
    span: tuple[int, int]


@dataclass(frozen=True)
class Neg:
    operand: object
    span: tuple[int, int]


@dataclass(frozen=True)
class Bin:
    op: str  # + - * / ^
    left: object
    right: object
    span: tuple[int, int]


@dataclass(frozen=True)
class Call:
    func: str
    arg: object
    span: tuple[int, int]


def _depth(node) -> int:
    if isinstance(node, (Num, Name)):
        return 1
    if isinstance(node, Neg):
        return 1 + _depth(node.operand)
    if isinstance(node, Call):
        return 1 + _depth(node.arg)
    return 1 + max(_depth(node.left), _depth(node.right))


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0
        self.paren_depth = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _enter_paren(self, tok: Token) -> None:
        # Guards the parser's own recursion; the structural depth of the
        # finished tree is checked again after folding.
        self.paren_depth += 1
        if self.paren_depth > MAX_DEPTH:
            raise DslError(
                f"expression nesting exceeds the depth limit {MAX_DEPTH}",
                self.source,
                (tok.start, max(tok.end, tok.start + 1)),
            )

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.text if tok.kind != "eof" else "end of input"
            raise DslError(
                f"unexpected {shown!r}; expected {what}",
                self.source,
                (tok.start, max(tok.end, tok.start + 1)),
            )
        return self.advance()

    def parse(self):
        node = self.sum()
        tok = self.peek()
        if tok.kind != "eof":
            raise DslError(
                f"unexpected {tok.text!r} after a complete expression; expected "
                "one of: '+', '-', '*', '/', '^', end of input",
                self.source,
                (tok.start, tok.end),
            )
        if _depth(node) > MAX_DEPTH:
            raise DslError(
                f"expression nesting exceeds the depth limit {MAX_DEPTH}",
                self.source,
                (0, len(self.source)),
            )
        return node

    def sum(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance()
            right = self.term()
            node = Bin(op.text, node, right, (node.span[0], right.span[1]))
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance()
            right = self.unary()
            node = Bin(op.text, node, right, (node.span[0], right.span[1]))
        return node

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            operand = self.unary()
            return Neg(operand, (tok.start, operand.span[1]))
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            exponent = self.unary()  # recurses through power: right-associative
            return Bin("^", base, exponent, (base.span[0], exponent.span[1]))
        return base

    def atom(self):
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text), (tok.start, tok.end))
        if tok.kind == "name":
            self.advance()
            if self.peek().kind == "lparen":
                self._enter_paren(tok)
                self.advance()
                arg = self.sum()
                close = self.expect("rparen", "')'")
                self.paren_depth -= 1
                return Call(tok.text, arg, (tok.start, close.end))
            return Name(tok.text, (tok.start, tok.end))
        if tok.kind == "lparen":
            self._enter_paren(tok)
            self.advance()
            node = self.sum()
            self.expect("rparen", "')'")
            self.paren_depth -= 1
            return node
        shown = tok.text if tok.kind != "eof" else "end of input"
        raise DslError(
            f"unexpected {shown!r}; expected one of: number, name, '(', '-'",
            self.source,
            (tok.start, max(tok.end, tok.start + 1)),
        )


def _fold(node, source: str):
    """Bottom-up constant folding; also validates '^' exponents."""
    if isinstance(node, (Num, Name)):
        return node
    if isinstance(node, Neg):
        inner = _fold(node.operand, source)
        if isinstance(inner, Num):
            return Num(-inner.value, node.span)
        return Neg(inner, node.span)
    if isinstance(node, Call):
        arg = _fold(node.arg, source)
        if node.func in FUNCTIONS and isinstance(arg, Num):
            try:
                return Num(float(FUNCTIONS[node.func](arg.value)), node.span)
            except ValueError:
                raise DslError(
                    f"domain error evaluating constant {node.func}()",
                    source,
                    node.span,
                ) from None
        return Call(node.func, arg, node.span)
    left = _fold(node.left, source)
    right = _fold(node.right, source)
    if node.op == "^":
        if not isinstance(right, Num):
            raise DslError(
                "exponent must be a constant; only nonnegative integer powers "
                "are supported",
                source,
                node.right.span if hasattr(node.right, "span") else node.span,
            )
        k = right.value
        if abs(k - round(k)) > 1e-9 or k < 0:
            raise DslError(
                f"exponent must be a nonnegative integer, got {k!r}",
                source,
                right.span,
            )
        if k > MAX_INT_EXPONENT:
            raise DslError(
                f"exponent {int(k)} exceeds the limit {MAX_INT_EXPONENT}",
                source,
                right.span,
            )
        k = int(round(k))
        if isinstance(left, Num):
            return Num(float(left.value**k), node.span)
        return Bin("^", left, Num(float(k), right.span), node.span)
    if isinstance(left, Num) and isinstance(right, Num):
        if node.op == "+":
            return Num(left.value + right.value, node.span)
        if node.op == "-":
            return Num(left.value - right.value, node.span)
        if node.op == "*":
            return Num(left.value * right.value, node.span)
        if right.value == 0.0:
            raise DslError("division by zero in constant expression", source, node.span)
        return Num(left.value / right.value, node.span)
    return Bin(node.op, left, right, node.span)


def parse(source: str):
    """Parse and constant-fold an expression, returning its AST."""
    return _fold(_Parser(source).parse(), source)


# ---------------------------------------------------------------------------
# printer
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _print_node(node, parent_prec: int, tie_parens: bool) -> str:
    if isinstance(node, Num):
        if node.value == int(node.value) and abs(node.value) < 1e15:
            text = repr(int(node.value))
        else:
            text = repr(node.value)
        if node.value < 0:
            return f"({text})" if parent_prec > 0 else text
        return text
    if isinstance(node, Name):
        return node.ident
    if isinstance(node, Call):
        return f"{node.func}({_print_node(node.arg, 0, False)})"
    if isinstance(node, Neg):
        inner = _print_node(node.operand, _PREC["neg"], False)
        text = f"-{inner}"
        return f"({text})" if parent_prec > _PREC["neg"] else text
    prec = _PREC[node.op]
    # Parens are forced at equal precedence on the side the operator does
    # not associate to: the right child for the left-associative operators,
    # the left child for right-associative '^'.
    if node.op == "^":
        left = _print_node(node.left, prec, True)
        right = _print_node(node.right, prec, False)
        text = f"{left}^{right}"
    else:
        left = _print_node(node.left, prec, False)
        right = _print_node(node.right, prec, True)
        text = f"{left} {node.op} {right}"
    needs = prec < parent_prec or (prec == parent_prec and tie_parens)
    return f"({text})" if needs else text


def to_source(node) -> str:
    """Canonical source form; parsing it reproduces the same AST."""
    return _print_node(node, 0, False)


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------

_OP_CONST = 0
_OP_VAR = 1
_OP_ADD = 2
_OP_SUB = 3
_OP_MUL = 4
_OP_DIV = 5
_OP_NEG = 6
_OP_POW = 7
_OP_CALL = 8


class CompiledExpr:
    """Postfix program over variables (t, x1..xd1, y1..yd2).

    ``__call__`` evaluates on scalars reusing one preallocated stack;
    ``eval_batch`` evaluates on numpy arrays (t scalar, x of shape (n, d1),
    y of shape (n, d2)).
    """

    __slots__ = ("source", "program", "var_names", "d1", "d2", "_stack", "_nvars")

    def __init__(self, source: str, program, var_names, d1: int, d2: int, n_stack: int):
        self.source = source
        self.program = program
        self.var_names = var_names
        self.d1 = d1
        self.d2 = d2
        self._stack = [0.0] * max(n_stack, 1)
        self._nvars = len(var_names)

    def uses(self, name: str) -> bool:
        """True when the compiled program reads the named variable."""
        return any(
            op == _OP_VAR and self.var_names[arg] == name
            for op, arg, _ in self.program
        )

    @property
    def is_constant(self) -> bool:
        return not any(op == _OP_VAR for op, _, _ in self.program)

    def variable_values(self, t: float, x, y) -> list[float]:
        vals = []
        for name in self.var_names:
            if name == "t":
                vals.append(float(t))
            elif name[0] == "x":
                vals.append(float(x[int(name[1:]) - 1]))
            else:
                vals.append(float(y[int(name[1:]) - 1]))
        return vals

    def __call__(self, t: float, x=(), y=()) -> float:
        values = self.variable_values(t, x, y)
        stack = self._stack
        sp = 0
        for op, arg, span in self.program:
            if op == _OP_CONST:
                stack[sp] = arg
                sp += 1
            elif op == _OP_VAR:
                stack[sp] = values[arg]
                sp += 1
            elif op == _OP_ADD:
                sp -= 1
                stack[sp - 1] = stack[sp - 1] + stack[sp]
            elif op == _OP_SUB:
                sp -= 1
                stack[sp - 1] = stack[sp - 1] - stack[sp]
            elif op == _OP_MUL:
                sp -= 1
                stack[sp - 1] = stack[sp - 1] * stack[sp]
            elif op == _OP_DIV:
                sp -= 1
                if stack[sp] == 0.0:
                    raise DslError("division by zero", self.source, span)
                stack[sp - 1] = stack[sp - 1] / stack[sp]
            elif op == _OP_NEG:
                stack[sp - 1] = -stack[sp - 1]
            elif op == _OP_POW:
                stack[sp - 1] = stack[sp - 1] ** arg
            else:
                stack[sp - 1] = arg(stack[sp - 1])
        return stack[0]

    def eval_batch(self, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        n = x.shape[0] if x is not None and np.ndim(x) == 2 else y.shape[0]
        values = []
        for name in self.var_names:
            if name == "t":
                values.append(np.full(n, float(t)))
            elif name[0] == "x":
                values.append(np.asarray(x)[:, int(name[1:]) - 1])
            else:
                values.append(np.asarray(y)[:, int(name[1:]) - 1])
        stack: list[np.ndarray] = []
        for op, arg, span in self.program:
            if op == _OP_CONST:
                stack.append(np.full(n, arg))
            elif op == _OP_VAR:
                stack.append(values[arg])
            elif op in (_OP_ADD, _OP_SUB, _OP_MUL, _OP_DIV):
                b = stack.pop()
                a = stack.pop()
                if op == _OP_ADD:
                    stack.append(a + b)
                elif op == _OP_SUB:
                    stack.append(a - b)
                elif op == _OP_MUL:
                    stack.append(a * b)
                else:
                    if np.any(b == 0.0):
                        raise DslError("division by zero", self.source, span)
                    stack.append(a / b)
            elif op == _OP_NEG:
                stack.append(-stack.pop())
            elif op == _OP_POW:
                stack.append(stack.pop() ** arg)
            else:
                fn = _BATCH_FUNCTIONS[arg.__name__] if arg.__name__ in _BATCH_FUNCTIONS else arg
                stack.append(fn(stack.pop()))
        return stack[0]


def compile_expression(
    source: str, d1: int, d2: int, allow_time: bool = True
) -> CompiledExpr:
    """Compile against a model signature: variables t, x1..xd1, y1..yd2.

    ``allow_time=False`` removes t from scope, for coefficients whose
    calling convention has no time argument.
    """
    ast = parse(source) if isinstance(source, str) else source
    src_text = source if isinstance(source, str) else to_source(source)
    valid = ["t"] if allow_time else []
    valid += [f"x{i + 1}" for i in range(d1)] + [f"y{j + 1}" for j in range(d2)]
    var_index = {name: i for i, name in enumerate(valid)}
    program: list[tuple[int, object, tuple[int, int]]] = []

    def emit(node) -> int:
        if isinstance(node, Num):
            program.append((_OP_CONST, float(node.value), node.span))
            return 1
        if isinstance(node, Name):
            if node.ident in CONSTANTS:
                program.append((_OP_CONST, CONSTANTS[node.ident], node.span))
                return 1
            if node.ident not in var_index:
                raise DslError(
                    f"unknown name '{node.ident}'; valid names here: "
                    f"{', '.join(valid + sorted(CONSTANTS))}",
                    src_text,
                    node.span,
                )
            program.append((_OP_VAR, var_index[node.ident], node.span))
            return 1
        if isinstance(node, Neg):
            d = emit(node.operand)
            program.append((_OP_NEG, None, node.span))
            return d
        if isinstance(node, Call):
            if node.func not in FUNCTIONS:
                raise DslError(
                    f"unknown function '{node.func}'; valid functions: "
                    f"{', '.join(sorted(FUNCTIONS))}",
                    src_text,
                    node.span,
                )
            d = emit(node.arg)
            program.append((_OP_CALL, FUNCTIONS[node.func], node.span))
            return d
        if node.op == "^":
            d = emit(node.left)
            program.append((_OP_POW, int(node.right.value), node.span))
            return d
        dl = emit(node.left)
        dr = emit(node.right)
        opcode = {"+": _OP_ADD, "-": _OP_SUB, "*": _OP_MUL, "/": _OP_DIV}[node.op]
        program.append((opcode, None, node.span))
        return max(dl, dr + 1)

    n_stack = emit(ast)
    return CompiledExpr(src_text, tuple(program), tuple(valid), d1, d2, n_stack)
