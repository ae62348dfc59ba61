"""Interpreter executing parsed policy programs against an API registry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .policy import (
    Assign,
    BinOp,
    CacheGet,
    Call,
    ExprStmt,
    ListLit,
    MethodCall,
    Name,
    Num,
    Pi,
    PolicyProgram,
    Return,
    Str,
    Subscript,
)


class RuntimeApiError(Exception):
    """An API call failed; carries the failing statement index."""

    def __init__(self, message: str, statement_index: int, cause: Exception | None = None):
        super().__init__(f"statement {statement_index}: {message}")
        self.statement_index = statement_index
        self.cause = cause


class ReturnTypeError(Exception):
    pass


@dataclass
class ExecutionInfo:
    success: bool
    actions_executed: int = 0
    failure_image_path: str | None = None
    elapsed_ms: float = 0.0
    error: dict | None = None

    def __post_init__(self):
        if self.success and self.error is not None:
            raise ValueError("successful executions carry no error")

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "actions_executed": self.actions_executed,
            "failure_image_path": self.failure_image_path,
            "elapsed_ms": self.elapsed_ms,
            "error": self.error,
        }


@dataclass
class ApiRegistry:
    """Name -> callable bindings plus the runtime environment values."""

    apis: dict = field(default_factory=dict)
    cache_templates: dict = field(default_factory=dict)
    env: dict = field(default_factory=dict)  # obs, BOUNDS, ...
    failure_hook: object = None  # zero-arg callable fired on API errors

    def register(self, name: str, fn) -> None:
        self.apis[name] = fn

    def names(self) -> tuple:
        return tuple(self.apis)


def _eval(node, scope: dict, registry: ApiRegistry):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Str):
        return node.value
    if isinstance(node, Pi):
        return math.pi
    if isinstance(node, Name):
        if node.id in scope:
            return scope[node.id]
        if node.id in registry.env:
            return registry.env[node.id]
        raise NameError(f"identifier {node.id!r} is not bound")
    if isinstance(node, ListLit):
        return [_eval(e, scope, registry) for e in node.items]
    if isinstance(node, CacheGet):
        if node.key not in registry.cache_templates:
            raise KeyError(f"template {node.key!r} missing from the cache")
        return registry.cache_templates[node.key]
    if isinstance(node, Subscript):
        base = _eval(Name(node.base), scope, registry)
        key = _eval(node.key, scope, registry)
        if isinstance(key, float) and key.is_integer():
            key = int(key)
        return base[key]
    if isinstance(node, BinOp):
        left = _eval(node.left, scope, registry)
        right = _eval(node.right, scope, registry)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return left / right
    if isinstance(node, MethodCall):
        receiver = _eval(node.receiver, scope, registry)
        if node.method != "extend" or not isinstance(receiver, list):
            raise TypeError(f"unsupported method {node.method!r}")
        for arg in node.args:
            value = _eval(arg, scope, registry)
            if isinstance(value, list):
                receiver.extend(value)
            else:
                receiver.append(value)
        return receiver
    if isinstance(node, Call):
        if node.api not in registry.apis:
            raise NameError(f"unknown API {node.api!r}")
        fn = registry.apis[node.api]
        args = [_eval(a, scope, registry) for a in node.args]
        kwargs = {k: _eval(v, scope, registry) for k, v in node.kwargs}
        return fn(*args, **kwargs)
    raise TypeError(f"cannot evaluate {node!r}")


def execute_program(p: PolicyProgram, registry: ApiRegistry) -> ExecutionInfo:
    """Run statements in order; the returned value must be the
    ExecutionInfo produced by the robot-execution API."""
    scope: dict = {}
    for idx, stmt in enumerate(p.statements):
        try:
            value = _eval(stmt.expr, scope, registry)
        except Exception as exc:
            if registry.failure_hook is not None:
                registry.failure_hook()
            raise RuntimeApiError(f"{type(exc).__name__}: {exc}", idx, exc) from exc
        if isinstance(stmt, Assign):
            if len(stmt.targets) == 1:
                scope[stmt.targets[0]] = value
            else:
                if not isinstance(value, tuple) or len(value) != len(stmt.targets):
                    if registry.failure_hook is not None:
                        registry.failure_hook()
                    raise RuntimeApiError(
                        f"expected a {len(stmt.targets)}-tuple result", idx
                    )
                for name, item in zip(stmt.targets, value):
                    scope[name] = item
        elif isinstance(stmt, Return):
            if not isinstance(value, ExecutionInfo):
                raise ReturnTypeError(
                    f"program returned {type(value).__name__}, not an execution result"
                )
            return value
        # ExprStmt: evaluated for effect only
    raise AssertionError("parser guarantees a trailing return")
