"""Exact scalar functions of the two equilibrium multipliers (mu, lam).

A :class:`ScalarFn` is a finite sum of terms ``c * mu^a * lam^b * log(lam)^d``
with rational ``c``, ``a >= 0``, integer ``b`` and ``d >= 0``.  The set is
closed under addition, multiplication, differentiation and integration in
either variable, which is everything the closure generator needs.

The text form ``c * mu^a * lam^b * log^d`` round-trips through
:func:`parse_scalar`.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Dict, Iterable, Iterator, Tuple, Union

Key = Tuple[int, int, int]
Number = Union[int, Fraction]

MU = "mu"
LAM = "lam"


class DomainError(ValueError):
    """Raised when a logarithmic term is evaluated at lam <= 0."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floating-point coefficients are not supported")
    return Fraction(x)


class ScalarFn:
    """Immutable sparse sum of ``c * mu^a * lam^b * log(lam)^d`` terms."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Union[Dict[Key, Number], Iterable[Tuple[Key, Number]], None] = None):
        acc: Dict[Key, Fraction] = {}
        if terms is not None:
            items = terms.items() if isinstance(terms, dict) else terms
            for key, c in items:
                a, b, d = key
                if a < 0 or d < 0:
                    raise ValueError(f"invalid exponent triple {key}")
                c = _frac(c)
                if c:
                    v = acc.get(key, 0) + c
                    if v:
                        acc[key] = v
                    else:
                        acc.pop(key, None)
        self._terms = acc
        self._hash = None

    @classmethod
    def _raw(cls, terms: Dict[Key, Fraction]) -> "ScalarFn":
        # terms must already be canonical (no zeros)
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._hash = None
        return obj

    @classmethod
    def const(cls, c: Number) -> "ScalarFn":
        return cls({(0, 0, 0): c})

    @classmethod
    def monomial(cls, c: Number = 1, a: int = 0, b: int = 0, d: int = 0) -> "ScalarFn":
        return cls({(a, b, d): c})

    # -- inspection -------------------------------------------------------
    @property
    def terms(self) -> Dict[Key, Fraction]:
        return dict(self._terms)

    def items(self) -> Iterator[Tuple[Key, Fraction]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def has_log(self) -> bool:
        return any(d for (_, _, d) in self._terms)

    def mu_degree(self) -> int:
        """Highest power of mu present, -1 for the zero function."""
        return max((a for (a, _, _) in self._terms), default=-1)

    def is_lambda_only(self) -> bool:
        return all(a == 0 for (a, _, _) in self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get((0, 0, 0), Fraction(0))

    def __eq__(self, other) -> bool:
        if isinstance(other, ScalarFn):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self._terms == ScalarFn.const(other)._terms
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # -- ring operations --------------------------------------------------
    def __add__(self, other) -> "ScalarFn":
        other = _coerce(other)
        if other is None:
            return NotImplemented
        if not other._terms:
            return self
        if not self._terms:
            return other
        acc = dict(self._terms)
        for k, c in other._terms.items():
            v = acc.get(k, 0) + c
            if v:
                acc[k] = v
            else:
                del acc[k]
        return ScalarFn._raw(acc)

    __radd__ = __add__

    def __neg__(self) -> "ScalarFn":
        return ScalarFn._raw({k: -c for k, c in self._terms.items()})

    def __sub__(self, other) -> "ScalarFn":
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "ScalarFn":
        return (-self) + other

    def __mul__(self, other) -> "ScalarFn":
        if isinstance(other, (int, Fraction)):
            if not other:
                return ZERO
            return ScalarFn._raw({k: c * other for k, c in self._terms.items()})
        other = _coerce(other)
        if other is None:
            return NotImplemented
        acc: Dict[Key, Fraction] = {}
        for (a1, b1, d1), c1 in self._terms.items():
            for (a2, b2, d2), c2 in other._terms.items():
                k = (a1 + a2, b1 + b2, d1 + d2)
                acc[k] = acc.get(k, 0) + c1 * c2
        return ScalarFn._raw({k: c for k, c in acc.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ScalarFn":
        if isinstance(other, (int, Fraction)):
            return self * (1 / Fraction(other))
        return NotImplemented

    def __pow__(self, n: int) -> "ScalarFn":
        if n < 0:
            raise ValueError("negative powers are only available for lam monomials")
        out = ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def shift(self, da: int = 0, db: int = 0) -> "ScalarFn":
        """Multiply by ``mu^da * lam^db``."""
        return ScalarFn._raw({(a + da, b + db, d): c for (a, b, d), c in self._terms.items()})

    # -- calculus ---------------------------------------------------------
    def diff(self, var: str, n: int = 1) -> "ScalarFn":
        out = self
        for _ in range(n):
            out = out._diff_once(var)
        return out

    def _diff_once(self, var: str) -> "ScalarFn":
        acc: Dict[Key, Fraction] = {}
        if var == MU:
            for (a, b, d), c in self._terms.items():
                if a:
                    k = (a - 1, b, d)
                    acc[k] = acc.get(k, 0) + c * a
        elif var == LAM:
            for (a, b, d), c in self._terms.items():
                if b:
                    k = (a, b - 1, d)
                    acc[k] = acc.get(k, 0) + c * b
                if d:
                    k = (a, b - 1, d - 1)
                    acc[k] = acc.get(k, 0) + c * d
        else:
            raise ValueError(f"unknown variable {var!r}")
        return ScalarFn._raw({k: c for k, c in acc.items() if c})

    def integrate(self, var: str) -> "ScalarFn":
        """Antiderivative with zero integration constant."""
        if var == MU:
            return ScalarFn._raw(
                {(a + 1, b, d): c / (a + 1) for (a, b, d), c in self._terms.items()}
            )
        if var != LAM:
            raise ValueError(f"unknown variable {var!r}")
        out = ZERO
        for (a, b, d), c in self._terms.items():
            out = out + _int_lam_power_log(a, b, d) * c
        return out

    # -- evaluation -------------------------------------------------------
    def evaluate(self, mu, lam):
        """Exact value when there are no log terms, otherwise a float."""
        mu = _frac(mu) if not isinstance(mu, float) else mu
        lam = _frac(lam) if not isinstance(lam, float) else lam
        if not self._terms:
            return Fraction(0)
        if lam == 0 and any(b < 0 for (_, b, _) in self._terms):
            raise ZeroDivisionError("pole at lam = 0")
        if self.has_log:
            if lam <= 0:
                raise DomainError("log(lam) requires lam > 0")
            ln = math.log(lam)
            mu_f, lam_f = float(mu), float(lam)
            return math.fsum(
                float(c) * mu_f ** a * lam_f ** b * ln ** d for (a, b, d), c in self._terms.items()
            )
        if isinstance(mu, float) or isinstance(lam, float):
            return math.fsum(float(c) * mu ** a * lam ** b for (a, b, _), c in self._terms.items())
        return sum((c * mu ** a * lam ** b for (a, b, _), c in self._terms.items()), Fraction(0))

    def at_mu_zero(self) -> "ScalarFn":
        return ScalarFn._raw({k: c for k, c in self._terms.items() if k[0] == 0})

    def mu_coefficient(self, s: int) -> "ScalarFn":
        """Lambda function multiplying ``mu^s`` (without any factorial)."""
        return ScalarFn._raw({(0, b, d): c for (a, b, d), c in self._terms.items() if a == s})

    # -- text -------------------------------------------------------------
    def to_text(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for (a, b, d) in sorted(self._terms, key=lambda k: (-k[0], -k[1], -k[2])):
            s = str(self._terms[(a, b, d)])
            if a:
                s += f" * mu^{a}"
            if b:
                s += f" * lam^{b}"
            if d:
                s += f" * log^{d}"
            parts.append(s)
        return " + ".join(parts)

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"ScalarFn({self.to_text()!r})"


def _coerce(x):
    if isinstance(x, ScalarFn):
        return x
    if isinstance(x, (int, Fraction)):
        return ScalarFn.const(x)
    return None


def _int_lam_power_log(a: int, b: int, d: int) -> ScalarFn:
    # integral of mu^a lam^b log^d dlam
    if b == -1:
        return ScalarFn.monomial(Fraction(1, d + 1), a, 0, d + 1)
    # integration by parts, lowering d
    out: Dict[Key, Fraction] = {}
    factor = Fraction(1, b + 1)
    k = d
    sign_acc = Fraction(1)
    while k >= 0:
        out[(a, b + 1, k)] = out.get((a, b + 1, k), 0) + sign_acc * factor
        sign_acc = sign_acc * (-Fraction(k, b + 1))
        k -= 1
    return ScalarFn(out)


ZERO = ScalarFn()
ONE = ScalarFn.const(1)
MU_FN = ScalarFn.monomial(1, 1, 0, 0)
LAM_FN = ScalarFn.monomial(1, 0, 1, 0)


def neg_half_inv_lam_pow(k: int) -> ScalarFn:
    """``(-1/(2 lam))^k``."""
    return ScalarFn.monomial(Fraction(-1, 2) ** k, 0, -k, 0)


# -- functional aliases -----------------------------------------------------

def sf_combine(f: ScalarFn, g: ScalarFn, op: str) -> ScalarFn:
    if op == "add":
        return f + g
    if op == "mul":
        return f * g
    raise ValueError(f"unknown op {op!r}")


def sf_diff(f: ScalarFn, var: str) -> ScalarFn:
    return f.diff(var)


def sf_integrate(f: ScalarFn, var: str) -> ScalarFn:
    return f.integrate(var)


def sf_eval(f: ScalarFn, mu, lam):
    return f.evaluate(mu, lam)


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>mu|lam|log|ln)|(?P<op>\^-?|[-+*/()]))"
)


class ParseError(ValueError):
    pass


def _tokenize(text: str):
    pos = 0
    toks = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected input at {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        if m.group("num"):
            toks.append(("num", Fraction(m.group("num"))))
        elif m.group("name"):
            name = m.group("name")
            toks.append(("name", "log" if name == "ln" else name))
        else:
            toks.append(("op", m.group("op")))
    return toks


def parse_scalar(text: str) -> ScalarFn:
    """Parse a sum of monomials, e.g. ``"3/2 * lam^-2 * log^1 + mu^4*lam^-1"``.

    Accepted grammar: terms joined by ``+``/``-``; each term a ``*``-product of
    rationals and ``mu``, ``lam``, ``log`` (alias ``ln``) raised to integer
    powers; a trailing ``/ n`` divides the term.
    """
    toks = _tokenize(text)
    if not toks:
        raise ParseError("empty expression")
    i = 0
    total = ZERO

    def peek():
        return toks[i] if i < len(toks) else (None, None)

    while i < len(toks):
        sign = 1
        while peek() in (("op", "+"), ("op", "-")):
            if peek()[1] == "-":
                sign = -sign
            i += 1
        coef = Fraction(sign)
        a = b = d = 0
        expect_factor = True
        while i < len(toks):
            kind, val = toks[i]
            if expect_factor:
                if kind == "num":
                    coef *= val
                    i += 1
                elif kind == "name":
                    i += 1
                    power = 1
                    if peek()[0] == "op" and peek()[1].startswith("^"):
                        neg = peek()[1] == "^-"
                        i += 1
                        if peek()[0] != "num" or peek()[1].denominator != 1:
                            raise ParseError("exponent must be an integer")
                        power = int(peek()[1]) * (-1 if neg else 1)
                        i += 1
                    if val == "mu":
                        a += power
                    elif val == "lam":
                        b += power
                    else:
                        d += power
                else:
                    raise ParseError(f"unexpected token {val!r}")
                expect_factor = False
            else:
                if kind == "op" and val == "*":
                    i += 1
                    expect_factor = True
                elif kind == "op" and val == "/":
                    i += 1
                    if peek()[0] != "num":
                        raise ParseError("division only by a number")
                    coef /= peek()[1]
                    i += 1
                else:
                    break
        if expect_factor:
            raise ParseError("dangling operator")
        if a < 0 or d < 0:
            raise ParseError("mu and log exponents must be nonnegative")
        total = total + ScalarFn.monomial(coef, a, b, d)
        if i < len(toks) and toks[i] not in (("op", "+"), ("op", "-")):
            raise ParseError(f"unexpected token {toks[i][1]!r}")
    return total
