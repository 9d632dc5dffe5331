"""Recursive-descent parser and compile-time checks for the policy language.

Grammar:

    program  := fndef*
    fndef    := "def" NAME "(" params? ")" block
    block    := "{" stmt* "}"
    stmt     := assign | if | for | return | exprstmt
    assign   := target "=" expr            (target: NAME or index access)
    if       := "if" expr block ("elif" expr block)* ("else" block)?
    for      := "for" NAME "in" expr block
    return   := "return" expr?
    expr     := or-expr with and/not, comparisons, + - * / %, unary -,
                calls (positional and keyword args), attribute ".", index
                "[]", literals, lists "[...]", maps "{k: v}"

Parsing is total: any input yields either a program or a PolicySyntaxError
with line/column. After parsing, every free name is resolved against the
binding surface, the program's own functions, and function-local
assignments; unresolved names fail compilation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import MissingFunctionError, PolicySyntaxError, UnknownIdentifierError
from .lexer import Token, tokenize
from .surface import LIFECYCLE_FUNCTIONS, SURFACE_NAMES

MAX_NESTING_DEPTH = 100


# --- AST ------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    line: int
    col: int


@dataclass(frozen=True)
class Literal(Node):
    value: object


@dataclass(frozen=True)
class Name(Node):
    name: str


@dataclass(frozen=True)
class ListLit(Node):
    items: tuple


@dataclass(frozen=True)
class MapLit(Node):
    pairs: tuple  # of (key_expr, value_expr)


@dataclass(frozen=True)
class Unary(Node):
    op: str
    operand: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class BoolOp(Node):
    op: str  # "and" | "or"
    left: Node
    right: Node


@dataclass(frozen=True)
class Compare(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Attr(Node):
    obj: Node
    name: str


@dataclass(frozen=True)
class Index(Node):
    obj: Node
    index: Node


@dataclass(frozen=True)
class Call(Node):
    func: Node
    args: tuple
    kwargs: tuple  # of (name, expr)


@dataclass(frozen=True)
class Assign(Node):
    target: Node  # Name or Index
    value: Node


@dataclass(frozen=True)
class If(Node):
    clauses: tuple  # of (cond_expr, tuple[stmts])
    orelse: tuple


@dataclass(frozen=True)
class For(Node):
    var: str
    iterable: Node
    body: tuple


@dataclass(frozen=True)
class Return(Node):
    value: Node | None


@dataclass(frozen=True)
class ExprStmt(Node):
    expr: Node


@dataclass(frozen=True)
class FuncDef(Node):
    name: str
    params: tuple
    body: tuple


@dataclass
class PolicyProgram:
    source: str
    functions: dict[str, FuncDef]
    order: list[str] = field(default_factory=list)
    description: str = ""

    @property
    def helpers(self) -> list[str]:
        return [n for n in self.order if n not in LIFECYCLE_FUNCTIONS]

    def body_is_empty(self, name: str) -> bool:
        fn = self.functions.get(name)
        return fn is not None and len(fn.body) == 0

    @property
    def is_trial(self) -> bool:
        return self.body_is_empty("pass") and self.body_is_empty("fail")


# --- Parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.depth = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.cur
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, expected: str) -> PolicySyntaxError:
        tok = self.cur
        return PolicySyntaxError(f"expected {expected}, found {tok.describe()}", tok.line, tok.col)

    def expect_op(self, op: str) -> Token:
        if self.cur.kind == "OP" and self.cur.value == op:
            return self.advance()
        raise self.error(f"`{op}`")

    def expect_kw(self, word: str) -> Token:
        if self.cur.kind == "KW" and self.cur.value == word:
            return self.advance()
        raise self.error(f"`{word}`")

    def expect_name(self, what: str = "a name") -> Token:
        if self.cur.kind == "NAME":
            return self.advance()
        raise self.error(what)

    def at_op(self, op: str) -> bool:
        return self.cur.kind == "OP" and self.cur.value == op

    def at_kw(self, word: str) -> bool:
        return self.cur.kind == "KW" and self.cur.value == word

    def _enter(self) -> None:
        self.depth += 1
        if self.depth > MAX_NESTING_DEPTH:
            raise PolicySyntaxError("nesting too deep", self.cur.line, self.cur.col)

    def _exit(self) -> None:
        self.depth -= 1

    # program

    def parse_program(self) -> tuple[dict[str, FuncDef], list[str]]:
        functions: dict[str, FuncDef] = {}
        order: list[str] = []
        while self.cur.kind != "EOF":
            fn = self.parse_fndef()
            if fn.name in functions:
                raise PolicySyntaxError(f"duplicate function `{fn.name}`", fn.line, fn.col)
            functions[fn.name] = fn
            order.append(fn.name)
        return functions, order

    def parse_fndef(self) -> FuncDef:
        if not self.at_kw("def"):
            raise self.error("`def`")
        start = self.advance()
        name_tok = self.cur
        if name_tok.kind == "NAME":
            self.advance()
        elif name_tok.kind == "KW" and name_tok.value in LIFECYCLE_FUNCTIONS:
            # `pass` style names are not keywords here, but guard anyway
            self.advance()
        else:
            raise self.error("a function name")
        self.expect_op("(")
        params: list[str] = []
        if not self.at_op(")"):
            params.append(self.expect_name("a parameter name").value)
            while self.at_op(","):
                self.advance()
                params.append(self.expect_name("a parameter name").value)
        self.expect_op(")")
        if len(set(params)) != len(params):
            raise PolicySyntaxError("duplicate parameter name", start.line, start.col)
        body = self.parse_block()
        return FuncDef(start.line, start.col, str(name_tok.value), tuple(params), body)

    def parse_block(self) -> tuple:
        self._enter()
        self.expect_op("{")
        stmts: list[Node] = []
        while not self.at_op("}"):
            if self.cur.kind == "EOF":
                raise self.error("`}`")
            stmts.append(self.parse_stmt())
        self.expect_op("}")
        self._exit()
        return tuple(stmts)

    # statements

    def parse_stmt(self) -> Node:
        if self.at_kw("if"):
            return self.parse_if()
        if self.at_kw("for"):
            return self.parse_for()
        if self.at_kw("return"):
            tok = self.advance()
            if self.at_op("}") or self.cur.kind == "EOF":
                return Return(tok.line, tok.col, None)
            return Return(tok.line, tok.col, self.parse_expr())
        expr = self.parse_expr()
        if self.at_op("="):
            eq = self.advance()
            if not isinstance(expr, (Name, Index)):
                if isinstance(expr, Attr):
                    raise PolicySyntaxError(
                        "cannot assign to an attribute; use data.set(...)", eq.line, eq.col
                    )
                raise PolicySyntaxError("invalid assignment target", eq.line, eq.col)
            value = self.parse_expr()
            return Assign(expr.line, expr.col, expr, value)
        return ExprStmt(expr.line, expr.col, expr)

    def parse_if(self) -> Node:
        tok = self.expect_kw("if")
        clauses = [(self.parse_expr(), self.parse_block())]
        orelse: tuple = ()
        while self.at_kw("elif"):
            self.advance()
            clauses.append((self.parse_expr(), self.parse_block()))
        if self.at_kw("else"):
            self.advance()
            orelse = self.parse_block()
        return If(tok.line, tok.col, tuple(clauses), orelse)

    def parse_for(self) -> Node:
        tok = self.expect_kw("for")
        var = self.expect_name("a loop variable").value
        self.expect_kw("in")
        iterable = self.parse_expr()
        body = self.parse_block()
        return For(tok.line, tok.col, var, iterable, body)

    # expressions (precedence tower)

    def parse_expr(self) -> Node:
        self._enter()
        try:
            return self.parse_or()
        finally:
            self._exit()

    def parse_or(self) -> Node:
        left = self.parse_and()
        while self.at_kw("or"):
            tok = self.advance()
            left = BoolOp(tok.line, tok.col, "or", left, self.parse_and())
        return left

    def parse_and(self) -> Node:
        left = self.parse_not()
        while self.at_kw("and"):
            tok = self.advance()
            left = BoolOp(tok.line, tok.col, "and", left, self.parse_not())
        return left

    def parse_not(self) -> Node:
        if self.at_kw("not"):
            tok = self.advance()
            return Unary(tok.line, tok.col, "not", self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Node:
        left = self.parse_add()
        while self.cur.kind == "OP" and self.cur.value in ("==", "!=", "<", "<=", ">", ">="):
            tok = self.advance()
            left = Compare(tok.line, tok.col, str(tok.value), left, self.parse_add())
        return left

    def parse_add(self) -> Node:
        left = self.parse_mul()
        while self.cur.kind == "OP" and self.cur.value in ("+", "-"):
            tok = self.advance()
            left = Binary(tok.line, tok.col, str(tok.value), left, self.parse_mul())
        return left

    def parse_mul(self) -> Node:
        left = self.parse_unary()
        while self.cur.kind == "OP" and self.cur.value in ("*", "/", "%"):
            tok = self.advance()
            left = Binary(tok.line, tok.col, str(tok.value), left, self.parse_unary())
        return left

    def parse_unary(self) -> Node:
        if self.at_op("-"):
            tok = self.advance()
            return Unary(tok.line, tok.col, "-", self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> Node:
        self._enter()
        try:
            node = self.parse_primary()
            while True:
                if self.at_op("."):
                    self.advance()
                    name_tok = self.expect_name("an attribute name")
                    node = Attr(name_tok.line, name_tok.col, node, str(name_tok.value))
                elif self.at_op("("):
                    tok = self.advance()
                    args, kwargs = self.parse_call_args()
                    node = Call(tok.line, tok.col, node, args, kwargs)
                elif self.at_op("["):
                    tok = self.advance()
                    index = self.parse_expr()
                    self.expect_op("]")
                    node = Index(tok.line, tok.col, node, index)
                else:
                    return node
        finally:
            self._exit()

    def parse_call_args(self) -> tuple[tuple, tuple]:
        args: list[Node] = []
        kwargs: list[tuple[str, Node]] = []
        while not self.at_op(")"):
            if self.cur.kind == "EOF":
                raise self.error("a parameter name or `)`")
            if (
                self.cur.kind == "NAME"
                and self.tokens[self.pos + 1].kind == "OP"
                and self.tokens[self.pos + 1].value == "="
            ):
                key = self.advance().value
                self.advance()  # "="
                kwargs.append((str(key), self.parse_expr()))
            else:
                if kwargs:
                    raise self.error("a keyword argument")
                args.append(self.parse_expr())
            if self.at_op(","):
                self.advance()
            elif not self.at_op(")"):
                raise self.error("`,` or `)`")
        self.advance()  # ")"
        return tuple(args), tuple(kwargs)

    def parse_primary(self) -> Node:
        tok = self.cur
        if tok.kind in ("INT", "FLOAT", "STRING"):
            self.advance()
            return Literal(tok.line, tok.col, tok.value)
        if tok.kind == "KW":
            if tok.value == "true":
                self.advance()
                return Literal(tok.line, tok.col, True)
            if tok.value == "false":
                self.advance()
                return Literal(tok.line, tok.col, False)
            if tok.value == "none":
                self.advance()
                return Literal(tok.line, tok.col, None)
            raise self.error("an expression")
        if tok.kind == "NAME":
            self.advance()
            return Name(tok.line, tok.col, str(tok.value))
        if self.at_op("("):
            self.advance()
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        if self.at_op("["):
            self.advance()
            items: list[Node] = []
            while not self.at_op("]"):
                if self.cur.kind == "EOF":
                    raise self.error("`]`")
                items.append(self.parse_expr())
                if self.at_op(","):
                    self.advance()
                elif not self.at_op("]"):
                    raise self.error("`,` or `]`")
            self.advance()
            return ListLit(tok.line, tok.col, tuple(items))
        if self.at_op("{"):
            self.advance()
            pairs: list[tuple[Node, Node]] = []
            while not self.at_op("}"):
                if self.cur.kind == "EOF":
                    raise self.error("`}`")
                key = self.parse_expr()
                self.expect_op(":")
                pairs.append((key, self.parse_expr()))
                if self.at_op(","):
                    self.advance()
                elif not self.at_op("}"):
                    raise self.error("`,` or `}`")
            self.advance()
            return MapLit(tok.line, tok.col, tuple(pairs))
        raise self.error("an expression")


# --- Compile-time identifier resolution -------------------------------------


def _assigned_names(stmts: tuple) -> set[str]:
    names: set[str] = set()
    for stmt in stmts:
        if isinstance(stmt, Assign) and isinstance(stmt.target, Name):
            names.add(stmt.target.name)
        elif isinstance(stmt, If):
            for _, body in stmt.clauses:
                names |= _assigned_names(body)
            names |= _assigned_names(stmt.orelse)
        elif isinstance(stmt, For):
            names.add(stmt.var)
            names |= _assigned_names(stmt.body)
    return names


def _walk_names(node, visit) -> None:
    if isinstance(node, Name):
        visit(node)
    elif isinstance(node, (Literal,)):
        pass
    elif isinstance(node, ListLit):
        for item in node.items:
            _walk_names(item, visit)
    elif isinstance(node, MapLit):
        for k, v in node.pairs:
            _walk_names(k, visit)
            _walk_names(v, visit)
    elif isinstance(node, Unary):
        _walk_names(node.operand, visit)
    elif isinstance(node, (Binary, BoolOp, Compare)):
        _walk_names(node.left, visit)
        _walk_names(node.right, visit)
    elif isinstance(node, Attr):
        _walk_names(node.obj, visit)
    elif isinstance(node, Index):
        _walk_names(node.obj, visit)
        _walk_names(node.index, visit)
    elif isinstance(node, Call):
        _walk_names(node.func, visit)
        for a in node.args:
            _walk_names(a, visit)
        for _, v in node.kwargs:
            _walk_names(v, visit)
    elif isinstance(node, Assign):
        if isinstance(node.target, Index):
            _walk_names(node.target, visit)
        _walk_names(node.value, visit)
    elif isinstance(node, If):
        for cond, body in node.clauses:
            _walk_names(cond, visit)
            for s in body:
                _walk_names(s, visit)
        for s in node.orelse:
            _walk_names(s, visit)
    elif isinstance(node, For):
        _walk_names(node.iterable, visit)
        for s in node.body:
            _walk_names(s, visit)
    elif isinstance(node, Return):
        if node.value is not None:
            _walk_names(node.value, visit)
    elif isinstance(node, ExprStmt):
        _walk_names(node.expr, visit)


def _check_identifiers(functions: dict[str, FuncDef]) -> None:
    defined = set(functions.keys())
    for fn in functions.values():
        known = set(fn.params) | _assigned_names(fn.body) | defined | SURFACE_NAMES

        def visit(name_node: Name) -> None:
            if name_node.name not in known:
                raise UnknownIdentifierError(name_node.name, name_node.line, name_node.col)

        for stmt in fn.body:
            _walk_names(stmt, visit)


_DESCRIPTION_RE = re.compile(r"^\s*#\s*description:\s*(.+?)\s*$")


def extract_description(source: str) -> str:
    for line in source.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if not stripped.startswith("#"):
            break
        match = _DESCRIPTION_RE.match(line)
        if match:
            return match.group(1)
    return ""


def parse_policy_source(source: str, *, require_lifecycle: bool = True) -> PolicyProgram:
    """Parse and compile policy source into a program of named functions.

    Raises PolicySyntaxError, MissingFunctionError, or UnknownIdentifierError.
    """
    if not isinstance(source, str):
        raise PolicySyntaxError("policy source must be text", 1, 1)
    tokens = tokenize(source)
    functions, order = _Parser(tokens).parse_program()
    if require_lifecycle:
        missing = [n for n in LIFECYCLE_FUNCTIONS if n not in functions]
        if missing:
            raise MissingFunctionError(missing)
    _check_identifiers(functions)
    return PolicyProgram(
        source=source,
        functions=functions,
        order=order,
        description=extract_description(source),
    )
