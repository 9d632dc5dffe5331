"""Tree-walking evaluator for policy programs.

Evaluation is reentrant and stateless between calls: all reads go through the
environment bindings, all writes are emitted as host effects, and every run
is metered by an ExecutionBudget. Given the same environment snapshot, seed,
and clock, an evaluation always produces the same value and effect list.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta

from ..errors import (
    BudgetExceededError,
    PolicyRuntimeError,
    PolicyTypeError,
)
from . import parser as ast
from .parser import PolicyProgram

DEFAULT_MAX_STEPS = 100_000
DEFAULT_MAX_HOST_CALLS = 50
DEFAULT_WALL_TIMEOUT = 2.0
MAX_CALL_DEPTH = 64

_WALL_CHECK_MASK = 0x7F  # check the wall clock every 128 steps


@dataclass
class ExecutionBudget:
    max_steps: int = DEFAULT_MAX_STEPS
    max_host_calls: int = DEFAULT_MAX_HOST_CALLS
    wall_timeout: float = DEFAULT_WALL_TIMEOUT
    steps: int = 0
    host_calls: int = 0
    depth: int = 0
    _deadline: float | None = None

    def start(self) -> None:
        self.steps = 0
        self.host_calls = 0
        self.depth = 0
        self._deadline = time.monotonic() + self.wall_timeout

    def step(self) -> None:
        self.steps += 1
        if self.steps > self.max_steps:
            raise BudgetExceededError(f"step budget of {self.max_steps} exhausted")
        if (self.steps & _WALL_CHECK_MASK) == 0:
            self.check_wall()

    def check_wall(self) -> None:
        if self._deadline is not None and time.monotonic() > self._deadline:
            raise BudgetExceededError(f"wall timeout of {self.wall_timeout}s exceeded")

    def host_call(self) -> None:
        self.host_calls += 1
        self.check_wall()
        if self.host_calls > self.max_host_calls:
            raise BudgetExceededError(f"host call budget of {self.max_host_calls} exhausted")

    def enter_call(self) -> None:
        self.depth += 1
        if self.depth > MAX_CALL_DEPTH:
            raise BudgetExceededError(f"call depth budget of {MAX_CALL_DEPTH} exhausted")

    def exit_call(self) -> None:
        self.depth -= 1


# --- Values -----------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Duration:
    seconds: float

    def __add__(self, other):
        if isinstance(other, Duration):
            return Duration(self.seconds + other.seconds)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Duration):
            return Duration(self.seconds - other.seconds)
        return NotImplemented

    def to_timedelta(self) -> timedelta:
        return timedelta(seconds=self.seconds)


@dataclass(frozen=True, order=True)
class Timestamp:
    at: datetime


class HostObject:
    """Base for objects the engine exposes to policies. Subclasses whitelist
    attributes and methods; anything else raises a runtime error."""

    kind = "object"

    def eq_key(self):
        return id(self)

    def dsl_attr(self, name: str):
        raise PolicyRuntimeError(f"{self.kind} has no attribute {name!r}")

    def dsl_call(self, name: str, args: list, kwargs: dict):
        raise PolicyRuntimeError(f"{self.kind} has no method {name!r}")

    def dsl_methods(self) -> frozenset:
        return frozenset()


class HostMethod:
    def __init__(self, obj: HostObject, name: str):
        self.obj = obj
        self.name = name

    def __call__(self, args: list, kwargs: dict):
        return self.obj.dsl_call(self.name, args, kwargs)


class BuiltinFn:
    def __init__(self, name: str, fn):
        self.name = name
        self.fn = fn

    def __call__(self, args: list, kwargs: dict):
        return self.fn(args, kwargs)


class HelperFn:
    def __init__(self, fndef: ast.FuncDef):
        self.fndef = fndef


@dataclass
class FunctionOutcome:
    value: object
    effects: list = field(default_factory=list)


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


def type_name(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "list"
    if isinstance(value, dict):
        return "map"
    if isinstance(value, Duration):
        return "duration"
    if isinstance(value, Timestamp):
        return "timestamp"
    if isinstance(value, HostObject):
        return value.kind
    if isinstance(value, (BuiltinFn, HostMethod, HelperFn)):
        return "function"
    return type(value).__name__


def truthy(value) -> bool:
    if value is None or value is False:
        return False
    if value is True:
        return True
    if isinstance(value, (int, float)):
        return value != 0
    if isinstance(value, (str, list, dict)):
        return len(value) > 0
    if isinstance(value, Duration):
        return value.seconds != 0
    return True


def values_equal(a, b) -> bool:
    if isinstance(a, HostObject) or isinstance(b, HostObject):
        if isinstance(a, HostObject) and isinstance(b, HostObject):
            return a.eq_key() == b.eq_key()
        return False
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    if isinstance(a, (Duration, Timestamp)) != isinstance(b, (Duration, Timestamp)):
        return False
    try:
        return a == b
    except Exception:
        return False


class Interpreter:
    def __init__(self, program: PolicyProgram, env):
        self.program = program
        self.env = env
        self.budget: ExecutionBudget = env.budget

    # -- entry point

    def call_function(self, name: str, args: list):
        fndef = self.program.functions.get(name)
        if fndef is None:
            raise PolicyRuntimeError(f"no function named {name!r}")
        return self._call_fndef(fndef, args, {})

    def _call_fndef(self, fndef: ast.FuncDef, args: list, kwargs: dict):
        if len(args) > len(fndef.params):
            raise PolicyRuntimeError(
                f"{fndef.name}() takes {len(fndef.params)} arguments, got {len(args)}"
            )
        scope: dict = {}
        for param, value in zip(fndef.params, args):
            scope[param] = value
        for key, value in kwargs.items():
            if key not in fndef.params:
                raise PolicyRuntimeError(f"{fndef.name}() has no parameter {key!r}")
            if key in scope:
                raise PolicyRuntimeError(f"{fndef.name}() got duplicate argument {key!r}")
            scope[key] = value
        for param in fndef.params:
            scope.setdefault(param, None)
        self.budget.enter_call()
        try:
            self._exec_block(fndef.body, scope)
        except _ReturnSignal as ret:
            return ret.value
        finally:
            self.budget.exit_call()
        return None

    # -- statements

    def _exec_block(self, stmts: tuple, scope: dict) -> None:
        for stmt in stmts:
            self._exec_stmt(stmt, scope)

    def _exec_stmt(self, stmt, scope: dict) -> None:
        self.budget.step()
        if isinstance(stmt, ast.ExprStmt):
            self._eval(stmt.expr, scope)
        elif isinstance(stmt, ast.Assign):
            value = self._eval(stmt.value, scope)
            target = stmt.target
            if isinstance(target, ast.Name):
                scope[target.name] = value
            else:  # Index target
                obj = self._eval(target.obj, scope)
                index = self._eval(target.index, scope)
                self._index_set(obj, index, value, target)
        elif isinstance(stmt, ast.If):
            for cond, body in stmt.clauses:
                if truthy(self._eval(cond, scope)):
                    self._exec_block(body, scope)
                    return
            self._exec_block(stmt.orelse, scope)
        elif isinstance(stmt, ast.For):
            iterable = self._eval(stmt.iterable, scope)
            for item in self._iterate(iterable, stmt):
                self.budget.step()
                scope[stmt.var] = item
                self._exec_block(stmt.body, scope)
        elif isinstance(stmt, ast.Return):
            value = self._eval(stmt.value, scope) if stmt.value is not None else None
            raise _ReturnSignal(value)
        else:  # pragma: no cover - parser emits only the above
            raise PolicyRuntimeError(f"unknown statement {type(stmt).__name__}")

    def _iterate(self, iterable, node):
        if isinstance(iterable, list):
            return list(iterable)
        if isinstance(iterable, dict):
            return list(iterable.keys())
        if isinstance(iterable, str):
            return list(iterable)
        if isinstance(iterable, HostObject) and hasattr(iterable, "dsl_iter"):
            return list(iterable.dsl_iter())
        raise PolicyRuntimeError(
            f"{node.line}:{node.col}: cannot iterate over {type_name(iterable)}"
        )

    def _index_set(self, obj, index, value, node) -> None:
        if isinstance(obj, list):
            if not isinstance(index, int) or isinstance(index, bool):
                raise PolicyRuntimeError("list index must be an integer")
            if not -len(obj) <= index < len(obj):
                raise PolicyRuntimeError(f"list index {index} out of range")
            obj[index] = value
        elif isinstance(obj, dict):
            if not isinstance(index, str):
                raise PolicyRuntimeError("map keys must be strings")
            obj[index] = value
        else:
            raise PolicyRuntimeError(f"cannot assign into {type_name(obj)}")

    # -- expressions

    def _eval(self, node, scope: dict):
        self.budget.step()
        if isinstance(node, ast.Literal):
            return node.value
        if isinstance(node, ast.Name):
            return self._resolve(node, scope)
        if isinstance(node, ast.ListLit):
            return [self._eval(item, scope) for item in node.items]
        if isinstance(node, ast.MapLit):
            out = {}
            for key_node, value_node in node.pairs:
                key = self._eval(key_node, scope)
                if not isinstance(key, str):
                    raise PolicyRuntimeError(
                        f"{key_node.line}:{key_node.col}: map keys must be strings"
                    )
                out[key] = self._eval(value_node, scope)
            return out
        if isinstance(node, ast.Unary):
            return self._unary(node, scope)
        if isinstance(node, ast.BoolOp):
            left = self._eval(node.left, scope)
            if node.op == "and":
                return self._eval(node.right, scope) if truthy(left) else left
            return left if truthy(left) else self._eval(node.right, scope)
        if isinstance(node, ast.Compare):
            return self._compare(node, scope)
        if isinstance(node, ast.Binary):
            return self._binary(node, scope)
        if isinstance(node, ast.Attr):
            obj = self._eval(node.obj, scope)
            return self._attr(obj, node)
        if isinstance(node, ast.Index):
            obj = self._eval(node.obj, scope)
            index = self._eval(node.index, scope)
            return self._index_get(obj, index, node)
        if isinstance(node, ast.Call):
            return self._call(node, scope)
        raise PolicyRuntimeError(f"unknown expression {type(node).__name__}")

    def _resolve(self, node: ast.Name, scope: dict):
        if node.name in scope:
            return scope[node.name]
        if node.name in self.program.functions:
            return HelperFn(self.program.functions[node.name])
        bindings = self.env.bindings
        if node.name in bindings:
            return bindings[node.name]
        raise PolicyRuntimeError(f"{node.line}:{node.col}: name {node.name!r} is not bound")

    def _unary(self, node: ast.Unary, scope: dict):
        operand = self._eval(node.operand, scope)
        if node.op == "not":
            return not truthy(operand)
        if node.op == "-":
            if isinstance(operand, bool) or not isinstance(operand, (int, float, Duration)):
                raise PolicyRuntimeError(f"cannot negate {type_name(operand)}")
            if isinstance(operand, Duration):
                return Duration(-operand.seconds)
            return -operand
        raise PolicyRuntimeError(f"unknown unary operator {node.op}")

    def _compare(self, node: ast.Compare, scope: dict):
        left = self._eval(node.left, scope)
        right = self._eval(node.right, scope)
        if node.op == "==":
            return values_equal(left, right)
        if node.op == "!=":
            return not values_equal(left, right)
        ok_pairs = (
            (isinstance(left, (int, float)) and not isinstance(left, bool))
            and (isinstance(right, (int, float)) and not isinstance(right, bool))
        ) or (isinstance(left, str) and isinstance(right, str)) \
            or (isinstance(left, Duration) and isinstance(right, Duration)) \
            or (isinstance(left, Timestamp) and isinstance(right, Timestamp))
        if not ok_pairs:
            raise PolicyTypeError(
                f"{node.line}:{node.col}: cannot order {type_name(left)} and {type_name(right)}"
            )
        if node.op == "<":
            return left < right
        if node.op == "<=":
            return left <= right
        if node.op == ">":
            return left > right
        if node.op == ">=":
            return left >= right
        raise PolicyRuntimeError(f"unknown comparison {node.op}")

    def _binary(self, node: ast.Binary, scope: dict):
        left = self._eval(node.left, scope)
        right = self._eval(node.right, scope)
        op = node.op
        is_num = lambda v: isinstance(v, (int, float)) and not isinstance(v, bool)  # noqa: E731
        try:
            if op == "+":
                if is_num(left) and is_num(right):
                    return left + right
                if isinstance(left, str) and isinstance(right, str):
                    return left + right
                if isinstance(left, list) and isinstance(right, list):
                    return left + right
                if isinstance(left, Duration) and isinstance(right, Duration):
                    return left + right
                if isinstance(left, Timestamp) and isinstance(right, Duration):
                    return Timestamp(left.at + right.to_timedelta())
            elif op == "-":
                if is_num(left) and is_num(right):
                    return left - right
                if isinstance(left, Duration) and isinstance(right, Duration):
                    return left - right
                if isinstance(left, Timestamp) and isinstance(right, Timestamp):
                    return Duration((left.at - right.at).total_seconds())
                if isinstance(left, Timestamp) and isinstance(right, Duration):
                    return Timestamp(left.at - right.to_timedelta())
            elif op == "*":
                if is_num(left) and is_num(right):
                    return left * right
                if isinstance(left, Duration) and is_num(right):
                    return Duration(left.seconds * right)
                if is_num(left) and isinstance(right, Duration):
                    return Duration(left * right.seconds)
            elif op == "/":
                if is_num(left) and is_num(right):
                    return left / right
                if isinstance(left, Duration) and is_num(right):
                    return Duration(left.seconds / right)
            elif op == "%":
                if is_num(left) and is_num(right):
                    return left % right
        except ZeroDivisionError:
            raise PolicyRuntimeError(f"{node.line}:{node.col}: division by zero") from None
        except OverflowError:
            raise PolicyRuntimeError(f"{node.line}:{node.col}: arithmetic overflow") from None
        raise PolicyTypeError(
            f"{node.line}:{node.col}: unsupported operands for {op}: "
            f"{type_name(left)} and {type_name(right)}"
        )

    def _attr(self, obj, node: ast.Attr):
        if isinstance(obj, HostObject):
            if node.name in obj.dsl_methods():
                return HostMethod(obj, node.name)
            try:
                return obj.dsl_attr(node.name)
            except PolicyRuntimeError as err:
                raise PolicyRuntimeError(f"{node.line}:{node.col}: {err.message}") from None
        raise PolicyRuntimeError(
            f"{node.line}:{node.col}: {type_name(obj)} has no attribute {node.name!r}"
        )

    def _index_get(self, obj, index, node: ast.Index):
        if isinstance(obj, list) or isinstance(obj, str):
            if not isinstance(index, int) or isinstance(index, bool):
                raise PolicyRuntimeError(f"{node.line}:{node.col}: index must be an integer")
            if not -len(obj) <= index < len(obj):
                raise PolicyRuntimeError(f"{node.line}:{node.col}: index {index} out of range")
            return obj[index]
        if isinstance(obj, dict):
            if not isinstance(index, str):
                raise PolicyRuntimeError(f"{node.line}:{node.col}: map keys must be strings")
            if index not in obj:
                raise PolicyRuntimeError(f"{node.line}:{node.col}: missing key {index!r}")
            return obj[index]
        raise PolicyRuntimeError(f"{node.line}:{node.col}: cannot index {type_name(obj)}")

    def _call(self, node: ast.Call, scope: dict):
        callee = self._eval(node.func, scope)
        args = [self._eval(a, scope) for a in node.args]
        kwargs = {k: self._eval(v, scope) for k, v in node.kwargs}
        try:
            if isinstance(callee, HelperFn):
                return self._call_fndef(callee.fndef, args, kwargs)
            if isinstance(callee, (BuiltinFn, HostMethod)):
                return callee(args, kwargs)
        except (_ReturnSignal,):
            raise
        except (BudgetExceededError, PolicyRuntimeError, PolicyTypeError):
            raise
        raise PolicyRuntimeError(
            f"{node.line}:{node.col}: {type_name(callee)} is not callable"
        )


def evaluate_policy_function(program: PolicyProgram, name: str, env) -> FunctionOutcome:
    """Run one lifecycle function and return its value plus emitted effects.

    Budget, capability, and runtime errors propagate as exceptions; callers
    decide how to neutralize them.
    """
    env.begin_evaluation()
    interp = Interpreter(program, env)
    fndef = program.functions[name]
    args = [env.bindings.get("action"), env.bindings.get("policy")][: len(fndef.params)]
    value = interp.call_function(name, args)
    return FunctionOutcome(value=value, effects=list(env.effects))
