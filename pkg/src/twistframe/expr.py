"""Safe parsing of generator and multiplier expressions.

Generators::

    gaussian(cx, cy, w)         hermite(k, cx, cy)
    indicator(a, b, c, d)       modulated(base, px, py)
    twist(base, k, l)           parseval(base)

For n > 1 the coordinate lists grow to 2n entries.  Numeric arguments may be
arithmetic over literals and ``pi``.

Multipliers are expressions in the grid coordinates (``x``, ``y`` for n = 1,
``x1..xn``, ``y1..yn`` in general) using ``+ - * / **``, ``pi``, ``i`` (the
imaginary unit) and the functions exp, sin, cos, sqrt, abs.
"""

from __future__ import annotations

import ast
import math
import operator

import numpy as np

from .errors import ConfigError, ShiftOutOfBox, TruncationError
from .frames import parsevalize
from .grids import (GridSpec, SampledFunction, make_gaussian, make_hermite,
                    make_indicator, modulated)
from .twist import twisted_translate

_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt, "abs": np.abs}


def _parse(text: str) -> ast.AST:
    try:
        return ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None


def _eval(node: ast.AST, names: dict, funcs: dict, text: str):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        return node.value
    if isinstance(node, ast.Name):
        if node.id in names:
            return names[node.id]
        raise ConfigError(f"unknown name {node.id!r} in {text!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        try:
            return _BINOPS[type(node.op)](_eval(node.left, names, funcs, text),
                                          _eval(node.right, names, funcs, text))
        except (ZeroDivisionError, OverflowError) as exc:
            raise ConfigError(f"{text!r}: {exc}") from None
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval(node.operand, names, funcs, text))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = funcs.get(node.func.id)
        if fn is None:
            raise ConfigError(f"unknown function {node.func.id!r} in {text!r}")
        return fn(*[_eval(a, names, funcs, text) for a in node.args])
    raise ConfigError(f"unsupported syntax in {text!r}")


def number(text: str) -> float:
    """A real constant such as ``-1``, ``0.5`` or ``pi/4``."""
    v = _eval(_parse(text), {"pi": math.pi}, {}, text)
    if isinstance(v, complex):
        raise ConfigError(f"{text!r} is not real")
    return float(v)


def _coords(args, count: int, what: str, text: str) -> list[float]:
    if len(args) != count:
        raise ConfigError(f"{what} expects {count} arguments, got {len(args)} in {text!r}")
    return [float(a) for a in args]


def parse_generator(text: str, spec: GridSpec, label: str | None = None) -> SampledFunction:
    """Build a sampled generator from an expression; errors become ConfigError."""
    n2 = 2 * spec.n
    node = _parse(text)
    scalars = {"pi": math.pi}

    def ev(node):
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            name = node.func.id
            args = node.args
            if name == "gaussian":
                v = _coords([_eval(a, scalars, {}, text) for a in args], n2 + 1, name, text)
                return make_gaussian(spec, v[:n2], v[n2])
            if name == "hermite":
                v = _coords([_eval(a, scalars, {}, text) for a in args], n2 + 1, name, text)
                if v[0] != int(v[0]):
                    raise ConfigError(f"hermite order must be an integer in {text!r}")
                return make_hermite(spec, int(v[0]), v[1:])
            if name == "indicator":
                v = _coords([_eval(a, scalars, {}, text) for a in args], 4, name, text)
                return make_indicator(spec, *v)
            if name in ("modulated", "twist"):
                if len(args) != n2 + 1:
                    raise ConfigError(f"{name} expects a base and {n2} numbers in {text!r}")
                base = ev(args[0])
                v = [float(_eval(a, scalars, {}, text)) for a in args[1:]]
                if name == "modulated":
                    return modulated(base, v)
                if any(x != int(x) for x in v):
                    raise ConfigError(f"twist shifts must be integers in {text!r}")
                return twisted_translate(base, tuple(int(x) for x in v))
            if name == "parseval":
                if len(args) != 1:
                    raise ConfigError(f"parseval expects one base in {text!r}")
                return parsevalize(ev(args[0]))
        raise ConfigError(f"not a generator expression: {text!r}")

    try:
        f = ev(node)
    except (TruncationError, ShiftOutOfBox, ValueError) as exc:
        raise ConfigError(f"{text.strip()}: {exc}") from None
    return f.with_values(f.values, label if label is not None else text.strip())


def coordinate_names(spec: GridSpec) -> dict[str, np.ndarray]:
    mesh = spec.mesh()
    n = spec.n
    names = {}
    if n == 1:
        names["x"], names["y"] = mesh
    for i in range(n):
        names[f"x{i + 1}"] = mesh[i]
        names[f"y{i + 1}"] = mesh[n + i]
    return names


def parse_multiplier(text: str, spec: GridSpec) -> SampledFunction:
    """Sample a symbol such as ``exp(2*pi*i*y)`` on the grid."""
    names = {"pi": math.pi, "i": 1j, **coordinate_names(spec)}
    with np.errstate(all="ignore"):  # non-finite samples are reported below
        v = _eval(_parse(text), names, _FUNCS, text)
    vals = np.broadcast_to(np.asarray(v, dtype=np.complex128), spec.shape)
    if not np.all(np.isfinite(vals)):
        raise ConfigError(f"multiplier {text!r} is not finite on the grid")
    return SampledFunction(spec, vals, text.strip())


def free_names(text: str) -> set[str]:
    return {n.id for n in ast.walk(_parse(text)) if isinstance(n, ast.Name)}
