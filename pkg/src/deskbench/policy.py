"""Grammar, parser, printer, and lint for generated policy programs.

The policy language is a straight-line subset of Python: one function,
assignments and calls only, a single trailing return. Host-language syntax
is tokenized by the stdlib compiler; everything outside the grammar
(branching, loops, imports, attribute calls) raises UnsupportedConstruct.
"""

from __future__ import annotations

import ast as _pyast
from dataclasses import dataclass, field

API_NAMES = (
    "GetObsImage",
    "SaveFailureImage",
    "SAM",
    "ImageCrop",
    "CLIPRetrieval",
    "get_objs_match",
    "Pixel2Loc",
    "PickPlace",
    "DistractorActions",
    "RearrangeActions",
    "RobotExecution",
)

RUNTIME_BUILTINS = ("obs", "BOUNDS")


class PolicyParseError(Exception):
    pass


class PolicySyntaxError(PolicyParseError):
    pass


class UnsupportedConstruct(PolicyParseError):
    pass


class MultipleReturns(PolicyParseError):
    pass


class MissingReturn(PolicyParseError):
    pass


class MultipleDefs(PolicyParseError):
    pass


# ------------------------------------------------------------------
# nodes
# ------------------------------------------------------------------


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class ListLit:
    items: tuple = ()


@dataclass(frozen=True)
class CacheGet:
    key: str


@dataclass(frozen=True)
class Subscript:
    base: str
    key: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    api: str
    args: tuple = ()
    kwargs: tuple = ()  # ((name, expr), ...)


@dataclass(frozen=True)
class MethodCall:
    receiver: object
    method: str
    args: tuple = ()


@dataclass(frozen=True)
class Assign:
    targets: tuple
    expr: object


@dataclass(frozen=True)
class ExprStmt:
    expr: object


@dataclass(frozen=True)
class Return:
    expr: object


@dataclass(frozen=True)
class PolicyProgram:
    name: str
    statements: tuple


_BINOPS = {_pyast.Add: "+", _pyast.Sub: "-", _pyast.Mult: "*", _pyast.Div: "/"}
_PI_MODULES = ("np", "numpy", "math")


def _convert_expr(node):
    if isinstance(node, _pyast.Call):
        return _convert_call(node)
    if isinstance(node, _pyast.Name):
        if node.id == "pi":
            return Pi()
        return Name(node.id)
    if isinstance(node, _pyast.Attribute):
        if (
            isinstance(node.value, _pyast.Name)
            and node.value.id in _PI_MODULES
            and node.attr == "pi"
        ):
            return Pi()
        raise UnsupportedConstruct(f"attribute access {_pyast.dump(node)}")
    if isinstance(node, _pyast.Constant):
        if isinstance(node.value, str):
            return Str(node.value)
        if isinstance(node.value, bool) or node.value is None:
            raise UnsupportedConstruct(f"literal {node.value!r}")
        if isinstance(node.value, (int, float)):
            return Num(node.value)
        raise UnsupportedConstruct(f"literal {node.value!r}")
    if isinstance(node, _pyast.UnaryOp) and isinstance(node.op, _pyast.USub):
        inner = _convert_expr(node.operand)
        if isinstance(inner, Num):
            return Num(-inner.value)
        raise UnsupportedConstruct("unary minus on non-number")
    if isinstance(node, _pyast.List):
        return ListLit(tuple(_convert_expr(e) for e in node.elts))
    if isinstance(node, _pyast.Subscript):
        return _convert_subscript(node)
    if isinstance(node, _pyast.BinOp):
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise UnsupportedConstruct(f"operator {type(node.op).__name__}")
        return BinOp(op, _convert_expr(node.left), _convert_expr(node.right))
    raise UnsupportedConstruct(type(node).__name__)


def _convert_call(node: _pyast.Call):
    func = node.func
    args = tuple(_convert_expr(a) for a in node.args)
    kwargs = []
    for kw in node.keywords:
        if kw.arg is None:
            raise UnsupportedConstruct("**kwargs")
        kwargs.append((kw.arg, _convert_expr(kw.value)))
    if isinstance(func, _pyast.Name):
        return Call(func.id, args, tuple(kwargs))
    if isinstance(func, _pyast.Attribute):
        if (
            isinstance(func.value, _pyast.Name)
            and func.value.id == "templates"
            and func.attr == "get"
        ):
            if len(args) == 1 and isinstance(args[0], Str) and not kwargs:
                return CacheGet(args[0].value)
            raise UnsupportedConstruct("templates.get expects one string key")
        if func.attr == "extend":
            if kwargs:
                raise UnsupportedConstruct("extend takes no keywords")
            return MethodCall(_convert_expr(func.value), "extend", args)
        raise UnsupportedConstruct(f"method call .{func.attr}")
    raise UnsupportedConstruct("call on non-name")


def _convert_subscript(node: _pyast.Subscript):
    sl = node.slice
    if isinstance(sl, _pyast.Slice):
        raise UnsupportedConstruct("slice subscript")
    key = _convert_expr(sl)
    if isinstance(node.value, _pyast.Name):
        base = node.value.id
        if base == "templates":
            if isinstance(key, Str):
                return CacheGet(key.value)
            raise UnsupportedConstruct("templates subscript needs a string key")
        if isinstance(key, (Str, Num, Name)):
            return Subscript(base, key)
        raise UnsupportedConstruct("subscript key")
    raise UnsupportedConstruct("subscript on non-name")


def _is_docstring(stmt) -> bool:
    return (
        isinstance(stmt, _pyast.Expr)
        and isinstance(stmt.value, _pyast.Constant)
        and isinstance(stmt.value.value, str)
    )


def parse_program(source: str) -> PolicyProgram:
    """Parse one generated function into the restricted AST."""
    try:
        tree = _pyast.parse(source)
    except SyntaxError as exc:
        raise PolicySyntaxError(str(exc)) from exc

    defs = [n for n in tree.body if isinstance(n, _pyast.FunctionDef)]
    others = [n for n in tree.body if not isinstance(n, _pyast.FunctionDef)]
    if not defs:
        raise PolicySyntaxError("no function definition found")
    if others:
        raise UnsupportedConstruct(
            f"top-level {type(others[0]).__name__} outside the function"
        )
    if len(defs) > 1:
        raise MultipleDefs(f"{len(defs)} function definitions")
    fn = defs[0]
    if fn.args.args or fn.args.kwonlyargs or fn.args.vararg or fn.args.kwarg:
        raise UnsupportedConstruct("function parameters")

    statements: list = []
    for i, stmt in enumerate(fn.body):
        if _is_docstring(stmt):
            continue
        if isinstance(stmt, _pyast.Assign):
            if len(stmt.targets) != 1:
                raise UnsupportedConstruct("chained assignment")
            tgt = stmt.targets[0]
            if isinstance(tgt, _pyast.Name):
                names = (tgt.id,)
            elif isinstance(tgt, _pyast.Tuple) and all(
                isinstance(e, _pyast.Name) for e in tgt.elts
            ):
                if len(tgt.elts) != 2:
                    raise UnsupportedConstruct("tuple assignment arity")
                names = tuple(e.id for e in tgt.elts)
            else:
                raise UnsupportedConstruct("assignment target")
            statements.append(Assign(names, _convert_expr(stmt.value)))
        elif isinstance(stmt, _pyast.Return):
            if stmt.value is None:
                raise UnsupportedConstruct("bare return")
            statements.append(Return(_convert_expr(stmt.value)))
        elif isinstance(stmt, _pyast.Expr):
            statements.append(ExprStmt(_convert_expr(stmt.value)))
        else:
            raise UnsupportedConstruct(type(stmt).__name__)

    returns = [s for s in statements if isinstance(s, Return)]
    if not returns:
        raise MissingReturn("program never returns")
    if len(returns) > 1:
        raise MultipleReturns(f"{len(returns)} return statements")
    if not isinstance(statements[-1], Return):
        raise UnsupportedConstruct("statements after return")
    return PolicyProgram(name=fn.name, statements=tuple(statements))


# ------------------------------------------------------------------
# printer
# ------------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_num(v) -> str:
    if isinstance(v, float) and v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _render(node, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(node, Name):
        return node.id
    if isinstance(node, Pi):
        return "pi"
    if isinstance(node, Str):
        return "'" + node.value.replace("\\", "\\\\").replace("'", "\\'") + "'"
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, ListLit):
        return "[" + ", ".join(_render(e) for e in node.items) + "]"
    if isinstance(node, CacheGet):
        return f'templates.get("{node.key}")'
    if isinstance(node, Subscript):
        return f"{node.base}[{_render(node.key)}]"
    if isinstance(node, Call):
        parts = [_render(a) for a in node.args]
        parts += [f"{k}={_render(v)}" for k, v in node.kwargs]
        return f"{node.api}({', '.join(parts)})"
    if isinstance(node, MethodCall):
        recv = _render(node.receiver)
        return f"{recv}.{node.method}({', '.join(_render(a) for a in node.args)})"
    if isinstance(node, BinOp):
        prec = _PRECEDENCE[node.op]
        left = _render(node.left, prec, False)
        right = _render(node.right, prec, True)
        text = f"{left} {node.op} {right}"
        needs = prec < parent_prec or (right_side and prec == parent_prec)
        return f"({text})" if needs else text
    raise TypeError(f"cannot render {node!r}")


def pretty_print(p: PolicyProgram) -> str:
    """Canonical source; parse(pretty_print(parse(s))) == parse(s)."""
    lines = [f"def {p.name}() -> dict:"]
    for stmt in p.statements:
        if isinstance(stmt, Assign):
            lines.append(f"    {', '.join(stmt.targets)} = {_render(stmt.expr)}")
        elif isinstance(stmt, ExprStmt):
            lines.append(f"    {_render(stmt.expr)}")
        elif isinstance(stmt, Return):
            lines.append(f"    return {_render(stmt.expr)}")
    return "\n".join(lines) + "\n"


def program_to_dict(p: PolicyProgram) -> dict:
    """JSON-friendly AST dump for golden fixtures."""

    def enc(node):
        if isinstance(node, PolicyProgram):
            return {
                "type": "Program",
                "name": node.name,
                "statements": [enc(s) for s in node.statements],
            }
        if isinstance(node, Assign):
            return {"type": "Assign", "targets": list(node.targets), "expr": enc(node.expr)}
        if isinstance(node, ExprStmt):
            return {"type": "ExprStmt", "expr": enc(node.expr)}
        if isinstance(node, Return):
            return {"type": "Return", "expr": enc(node.expr)}
        if isinstance(node, Call):
            return {
                "type": "Call",
                "api": node.api,
                "args": [enc(a) for a in node.args],
                "kwargs": [[k, enc(v)] for k, v in node.kwargs],
            }
        if isinstance(node, MethodCall):
            return {
                "type": "MethodCall",
                "receiver": enc(node.receiver),
                "method": node.method,
                "args": [enc(a) for a in node.args],
            }
        if isinstance(node, Name):
            return {"type": "Name", "id": node.id}
        if isinstance(node, Str):
            return {"type": "Str", "value": node.value}
        if isinstance(node, Num):
            return {"type": "Num", "value": node.value}
        if isinstance(node, Pi):
            return {"type": "Pi"}
        if isinstance(node, ListLit):
            return {"type": "List", "items": [enc(e) for e in node.items]}
        if isinstance(node, CacheGet):
            return {"type": "CacheGet", "key": node.key}
        if isinstance(node, Subscript):
            return {"type": "Subscript", "base": node.base, "key": enc(node.key)}
        if isinstance(node, BinOp):
            return {
                "type": "BinOp",
                "op": node.op,
                "left": enc(node.left),
                "right": enc(node.right),
            }
        raise TypeError(f"cannot encode {node!r}")

    return enc(p)


# ------------------------------------------------------------------
# lint
# ------------------------------------------------------------------


@dataclass
class LintReport:
    uses_cache_when_required: bool = True
    unknown_apis: list[str] = field(default_factory=list)
    unbound_identifiers: list[str] = field(default_factory=list)

    def passes(self) -> bool:
        return (
            self.uses_cache_when_required
            and not self.unknown_apis
            and not self.unbound_identifiers
        )


def _walk_expr(node, reads: list[str], calls: list[str], cache_gets: list[str]):
    if isinstance(node, Name):
        reads.append(node.id)
    elif isinstance(node, Call):
        calls.append(node.api)
        for a in node.args:
            _walk_expr(a, reads, calls, cache_gets)
        for _, v in node.kwargs:
            _walk_expr(v, reads, calls, cache_gets)
    elif isinstance(node, MethodCall):
        _walk_expr(node.receiver, reads, calls, cache_gets)
        for a in node.args:
            _walk_expr(a, reads, calls, cache_gets)
    elif isinstance(node, ListLit):
        for e in node.items:
            _walk_expr(e, reads, calls, cache_gets)
    elif isinstance(node, CacheGet):
        cache_gets.append(node.key)
    elif isinstance(node, Subscript):
        reads.append(node.base)
        _walk_expr(node.key, reads, calls, cache_gets)
    elif isinstance(node, BinOp):
        _walk_expr(node.left, reads, calls, cache_gets)
        _walk_expr(node.right, reads, calls, cache_gets)


def lint_program(p: PolicyProgram, instruction_kind: str = "pure_language",
                 api_names=API_NAMES) -> LintReport:
    """Static checks: unknown APIs, unbound identifiers, and (for multimodal
    instructions) that the program reads the template cache at all."""
    bound = set(RUNTIME_BUILTINS)
    unknown: list[str] = []
    unbound: list[str] = []
    cache_gets: list[str] = []

    for stmt in p.statements:
        reads: list[str] = []
        calls: list[str] = []
        expr = stmt.expr
        _walk_expr(expr, reads, calls, cache_gets)
        for api in calls:
            if api not in api_names and api not in unknown:
                unknown.append(api)
        for name in reads:
            if name not in bound and name not in unbound:
                unbound.append(name)
        if isinstance(stmt, Assign):
            bound.update(stmt.targets)

    uses_cache = True
    if instruction_kind == "multimodal":
        uses_cache = bool(cache_gets)
    return LintReport(
        uses_cache_when_required=uses_cache,
        unknown_apis=unknown,
        unbound_identifiers=unbound,
    )
