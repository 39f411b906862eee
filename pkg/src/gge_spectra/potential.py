"""Polynomial potentials and observables.

A :class:`Polynomial` stores coefficients in increasing degree order.  Strings
such as ``"x^4 + x^2/2"`` or ``"(1+2j)*z^3 - z"`` are parsed with :mod:`ast`;
``x`` and ``z`` are interchangeable names for the variable.
"""

from __future__ import annotations

import ast
import operator
from dataclasses import dataclass

import numpy as np

__all__ = ["Polynomial"]


def _trim(coeffs):
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(complex(c) for c in coeffs)


def _add(p, q):
    n = max(len(p), len(q))
    return [(p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)]


def _mul(p, q):
    if not p or not q:
        return []
    out = [0j] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


_BINOPS = {ast.Add: _add, ast.Sub: lambda p, q: _add(p, [-c for c in q]), ast.Mult: _mul}


@dataclass(frozen=True)
class Polynomial:
    coeffs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))

    @classmethod
    def monomial(cls, m: int, coeff=1.0) -> "Polynomial":
        return cls((0,) * m + (coeff,))

    @classmethod
    def parse(cls, text: str) -> "Polynomial":
        """Parse a polynomial in ``x`` (or ``z``) written with ``^`` or ``**``."""
        tree = ast.parse(text.replace("^", "**").strip() or "0", mode="eval")
        return cls(_trim(cls._eval(tree.body)))

    @classmethod
    def _eval(cls, node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return [complex(node.value)]
        if isinstance(node, ast.Name) and node.id in ("x", "z"):
            return [0j, 1 + 0j]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = cls._eval(node.operand)
            return [-c for c in inner] if isinstance(node.op, ast.USub) else inner
        if isinstance(node, ast.BinOp):
            left = cls._eval(node.left)
            if isinstance(node.op, ast.Pow):
                right = _trim(cls._eval(node.right))
                if len(right) > 1 or (right and (right[0].imag or right[0].real % 1)):
                    raise ValueError("exponents must be non-negative integer constants")
                power = int(right[0].real) if right else 0
                if power < 0:
                    raise ValueError("exponents must be non-negative integer constants")
                out = [1 + 0j]
                for _ in range(power):
                    out = _mul(out, left)
                return out
            right = cls._eval(node.right)
            if isinstance(node.op, ast.Div):
                right = _trim(right)
                if len(right) != 1:
                    raise ValueError("division only by constants")
                return [c / right[0] for c in left]
            if type(node.op) in _BINOPS:
                return _BINOPS[type(node.op)](left, right)
        raise ValueError(f"unsupported expression in polynomial: {ast.dump(node)}")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self.coeffs)

    @property
    def leading(self) -> complex:
        return self.coeffs[-1] if self.coeffs else 0j

    def terms(self):
        """Yield ``(power, coefficient)`` for the non-zero coefficients."""
        for m, c in enumerate(self.coeffs):
            if c != 0:
                yield m, c

    def __call__(self, x):
        x = np.asarray(x)
        out = np.zeros(x.shape, dtype=complex if not self.is_real or np.iscomplexobj(x) else float)
        for c in reversed(self.coeffs):
            out = out * x + (c if not self.is_real else c.real)
        return out

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(_add(self.coeffs, other.coeffs))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(_add(self.coeffs, [-c for c in other.coeffs]))

    def scale(self, factor) -> "Polynomial":
        return Polynomial([factor * c for c in self.coeffs])

    def to_json(self):
        """Coefficients as a list of numbers, or ``[re, im]`` pairs when complex."""
        if self.is_real:
            return [c.real for c in self.coeffs]
        return [[c.real, c.imag] for c in self.coeffs]

    @classmethod
    def from_json(cls, data) -> "Polynomial":
        if isinstance(data, str):
            return cls.parse(data)
        return cls([complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in data])

    def __str__(self):
        parts = []
        for m, c in self.terms():
            cs = f"{c.real:g}" if c.imag == 0 else f"({c.real:g}{c.imag:+g}j)"
            parts.append(cs if m == 0 else f"{cs}*x^{m}")
        return " + ".join(parts) or "0"
