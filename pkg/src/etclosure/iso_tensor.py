"""Isotropic polynomials in the tensorial multipliers (mu_i, mu_ij, lam_i).

An isotropic scalar polynomial is a sum over keys ``(p, q, r)`` of

    1/(p! q! r!) * H_pqr(mu, lam) * delta^(a_1 ... a_2m) mu_a.. mu_bc.. lam_d..

where the fully symmetrized delta is normalised as the *average* over the
(2m-1)!! perfect matchings of its 2m slots.  The vector version carries one
extra free index k inside the symmetrization.

Two independent evaluation routes are kept on purpose:

* :func:`sym_delta_contract` contracts numerically, pairing by pairing, by
  walking the contraction graph (paths give v.M...M.w, cycles give traces);
* :func:`expand` produces an explicit polynomial in 12 components using the
  Gaussian moment identity E[X_a1 ... X_a2m] = (2m-1)!! delta^(a1...a2m).

Dimension is fixed at 3.  Symmetric matrices are stored through their six
independent components (i <= j); the off-diagonal variable stands for the
common value of M_ij = M_ji.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .scalar_field import LAM, MU, ONE, ZERO, ScalarFn

DIM = 3
PQR = Tuple[int, int, int]
Exp = Tuple[int, ...]

MAT_INDEX = {}
for _n, (_i, _j) in enumerate([(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]):
    MAT_INDEX[(_i, _j)] = 3 + _n
    MAT_INDEX[(_j, _i)] = 3 + _n
MAT_PAIRS = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
NVARS = 12
ZERO_EXP: Exp = (0,) * NVARS
VAR_NAMES = ["mu1", "mu2", "mu3", "mu11", "mu12", "mu13", "mu22", "mu23", "mu33",
             "lam1", "lam2", "lam3"]


def mu_vec_index(i: int) -> int:
    return i


def mat_index(i: int, j: int) -> int:
    return MAT_INDEX[(i, j)]


def lam_vec_index(i: int) -> int:
    return 9 + i


def dfact(n: int) -> int:
    """Double factorial with (-1)!! = 0!! = 1."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


class OddRank(ValueError):
    """A symmetrized delta needs an even number of slots."""


class ParityError(ValueError):
    """Key violates the isotropy parity rule."""


# ---------------------------------------------------------------------------
# state

Vec = Tuple[Fraction, Fraction, Fraction]
Mat = Tuple[Vec, Vec, Vec]


def _vec(v) -> Vec:
    if len(v) != 3:
        raise ValueError("expected a 3-vector")
    return tuple(Fraction(x) for x in v)  # type: ignore[return-value]


def _mat(m) -> Mat:
    rows = tuple(_vec(r) for r in m)
    if len(rows) != 3:
        raise ValueError("expected a 3x3 matrix")
    for i in range(3):
        for j in range(i):
            if rows[i][j] != rows[j][i]:
                raise ValueError("matrix must be symmetric")
    return rows  # type: ignore[return-value]


@dataclass(frozen=True)
class TensorState:
    """A point (mu, mu_i, mu_ij, lam, lam_i) of multiplier space."""

    mu: Fraction
    lam: Fraction
    mu_vec: Vec = (Fraction(0),) * 3
    mu_mat: Mat = ((Fraction(0),) * 3,) * 3
    lam_vec: Vec = (Fraction(0),) * 3

    def __post_init__(self):
        object.__setattr__(self, "mu", Fraction(self.mu))
        object.__setattr__(self, "lam", Fraction(self.lam))
        object.__setattr__(self, "mu_vec", _vec(self.mu_vec))
        object.__setattr__(self, "mu_mat", _mat(self.mu_mat))
        object.__setattr__(self, "lam_vec", _vec(self.lam_vec))

    @classmethod
    def equilibrium(cls, mu, lam) -> "TensorState":
        return cls(mu, lam)

    def components(self) -> List[Fraction]:
        """The 12 tensorial components in ConcretePoly variable order."""
        m = self.mu_mat
        return [*self.mu_vec, *(m[i][j] for i, j in MAT_PAIRS), *self.lam_vec]

    @classmethod
    def from_components(cls, mu, lam, comps: Sequence) -> "TensorState":
        c = [Fraction(x) for x in comps]
        mat = [[Fraction(0)] * 3 for _ in range(3)]
        for n, (i, j) in enumerate(MAT_PAIRS):
            mat[i][j] = mat[j][i] = c[3 + n]
        return cls(mu, lam, c[0:3], mat, c[9:12])

    def is_equilibrium(self) -> bool:
        return not any(self.components())


# ---------------------------------------------------------------------------
# pairings and numeric contraction

def pairings(m: int) -> List[Tuple[Tuple[int, int], ...]]:
    """All perfect matchings of the slots 0..2m-1, in a fixed order."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    return [tuple(p) for p in _pairings(tuple(range(2 * m)))]


@lru_cache(maxsize=None)
def _pairings(items: Tuple[int, ...]):
    if not items:
        return ((),)
    first, rest = items[0], items[1:]
    out = []
    for n, other in enumerate(rest):
        remaining = rest[:n] + rest[n + 1:]
        for tail in _pairings(remaining):
            out.append(((first, other),) + tail)
    return tuple(out)


def _vdot(v, w):
    return sum((a * b for a, b in zip(v, w)), Fraction(0))


def _vmat(v, m):
    return tuple(sum((v[i] * m[i][j] for i in range(3)), Fraction(0)) for j in range(3))


def _matmul(a, b):
    return tuple(
        tuple(sum((a[i][k] * b[k][j] for k in range(3)), Fraction(0)) for j in range(3))
        for i in range(3)
    )


Slot = Tuple[str, object]


def sym_delta_contract(slots: Sequence[Slot]) -> Fraction:
    """Fully contract delta^(a1...a2m) with vector and matrix slot objects.

    ``slots`` holds ``("v", vec)`` entries (one leg each) and ``("M", mat)``
    entries (two legs each, symmetric).  The result is the average over all
    perfect matchings of the legs.
    """
    legs: List[Tuple[int, int]] = []  # (slot index, leg number)
    for n, (kind, _) in enumerate(slots):
        if kind == "v":
            legs.append((n, 0))
        elif kind == "M":
            legs.append((n, 0))
            legs.append((n, 1))
        else:
            raise ValueError(f"unknown slot kind {kind!r}")
    if len(legs) % 2:
        raise OddRank("odd number of slots")
    if not legs:
        return Fraction(1)
    partner_leg = {}
    for n, (s, leg) in enumerate(legs):
        if slots[s][0] == "M":
            partner_leg[n] = n + 1 if leg == 0 else n - 1
    total = Fraction(0)
    matchings = pairings(len(legs) // 2)
    for matching in matchings:
        total += _contract_matching(slots, legs, partner_leg, matching)
    return total / len(matchings)


def _contract_matching(slots, legs, partner_leg, matching) -> Fraction:
    mate = {}
    for a, b in matching:
        mate[a] = b
        mate[b] = a
    seen = set()
    value = Fraction(1)
    # open chains start at vector legs
    for start, (s, _) in enumerate(legs):
        if start in seen or slots[s][0] != "v":
            continue
        seen.add(start)
        cur = slots[s][1]
        leg = mate[start]
        while True:
            seen.add(leg)
            ls = legs[leg][0]
            if slots[ls][0] == "v":
                value *= _vdot(cur, slots[ls][1])
                break
            cur = _vmat(cur, slots[ls][1])
            other = partner_leg[leg]
            seen.add(other)
            leg = mate[other]
    # closed loops through matrices only
    for start in range(len(legs)):
        if start in seen:
            continue
        prod = None
        leg = start
        while leg not in seen:
            seen.add(leg)
            other = partner_leg[leg]
            seen.add(other)
            m = slots[legs[leg][0]][1]
            prod = m if prod is None else _matmul(prod, m)
            leg = mate[other]
        value *= sum((prod[i][i] for i in range(3)), Fraction(0))
    return value


def _slots_for(p: int, q: int, r: int, state: TensorState, free: Optional[int] = None) -> List[Slot]:
    slots: List[Slot] = []
    if free is not None:
        e = [Fraction(0)] * 3
        e[free] = Fraction(1)
        slots.append(("v", tuple(e)))
    slots += [("v", state.mu_vec)] * p
    slots += [("M", state.mu_mat)] * q
    slots += [("v", state.lam_vec)] * r
    return slots


# ---------------------------------------------------------------------------
# concrete polynomials

Var = Union[str, Tuple]


def _var_index(var: Var) -> int:
    kind = var[0]
    if kind == "m":
        return mu_vec_index(var[1])
    if kind == "M":
        return mat_index(var[1], var[2])
    if kind == "l":
        return lam_vec_index(var[1])
    raise ValueError(f"unknown variable {var!r}")


def _add_into(acc: Dict[Exp, ScalarFn], key: Exp, val: ScalarFn) -> None:
    cur = acc.get(key)
    if cur is None:
        if val:
            acc[key] = val
    else:
        new = cur + val
        if new:
            acc[key] = new
        else:
            del acc[key]


class ConcretePoly:
    """Polynomial in the 12 tensorial components with ScalarFn coefficients.

    Variables (``var`` arguments): ``"mu"``, ``"lam"``, ``("m", i)``,
    ``("M", i, j)`` and ``("l", i)`` with 0-based indices.
    """

    __slots__ = ("_mono",)

    def __init__(self, monomials: Optional[Dict[Exp, ScalarFn]] = None):
        self._mono: Dict[Exp, ScalarFn] = {}
        if monomials:
            for k, v in monomials.items():
                if len(k) != NVARS or min(k) < 0:
                    raise ValueError(f"bad exponent vector {k}")
                _add_into(self._mono, tuple(k), v)

    @classmethod
    def _raw(cls, mono: Dict[Exp, ScalarFn]) -> "ConcretePoly":
        obj = cls.__new__(cls)
        obj._mono = mono
        return obj

    @classmethod
    def variable(cls, var: Var) -> "ConcretePoly":
        if var == MU:
            return cls._raw({ZERO_EXP: ScalarFn.monomial(1, 1, 0)})
        if var == LAM:
            return cls._raw({ZERO_EXP: ScalarFn.monomial(1, 0, 1)})
        e = [0] * NVARS
        e[_var_index(var)] = 1
        return cls._raw({tuple(e): ONE})

    @classmethod
    def constant(cls, c: Union[ScalarFn, int, Fraction]) -> "ConcretePoly":
        c = c if isinstance(c, ScalarFn) else ScalarFn.const(c)
        return cls._raw({ZERO_EXP: c} if c else {})

    @property
    def monomials(self) -> Dict[Exp, ScalarFn]:
        return dict(self._mono)

    def items(self):
        return self._mono.items()

    def __len__(self) -> int:
        return len(self._mono)

    def is_zero(self) -> bool:
        return not self._mono

    def __bool__(self) -> bool:
        return bool(self._mono)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConcretePoly):
            return NotImplemented
        return self._mono == other._mono

    def __add__(self, other: "ConcretePoly") -> "ConcretePoly":
        acc = dict(self._mono)
        for k, v in other._mono.items():
            _add_into(acc, k, v)
        return ConcretePoly._raw(acc)

    def __neg__(self) -> "ConcretePoly":
        return ConcretePoly._raw({k: -v for k, v in self._mono.items()})

    def __sub__(self, other: "ConcretePoly") -> "ConcretePoly":
        acc = dict(self._mono)
        for k, v in other._mono.items():
            _add_into(acc, k, -v)
        return ConcretePoly._raw(acc)

    def scale(self, c: Union[ScalarFn, int, Fraction]) -> "ConcretePoly":
        if isinstance(c, ScalarFn):
            out = {}
            for k, v in self._mono.items():
                w = v * c
                if w:
                    out[k] = w
            return ConcretePoly._raw(out)
        if not c:
            return ConcretePoly()
        return ConcretePoly._raw({k: v * c for k, v in self._mono.items()})

    def mul_var(self, var: Var) -> "ConcretePoly":
        """Multiply by a single variable (tensorial component, mu or lam)."""
        if var == MU:
            return ConcretePoly._raw({k: v.shift(da=1) for k, v in self._mono.items()})
        if var == LAM:
            return ConcretePoly._raw({k: v.shift(db=1) for k, v in self._mono.items()})
        n = _var_index(var)
        out = {}
        for k, v in self._mono.items():
            e = list(k)
            e[n] += 1
            out[tuple(e)] = v
        return ConcretePoly._raw(out)

    def diff(self, var: Var) -> "ConcretePoly":
        """Partial derivative; for off-diagonal ``("M", i, j)`` the symmetric
        tensor convention applies, i.e. half the derivative with respect to the
        stored independent component."""
        if var in (MU, LAM):
            out = {}
            for k, v in self._mono.items():
                w = v.diff(var)
                if w:
                    out[k] = w
            return ConcretePoly._raw(out)
        n = _var_index(var)
        factor = Fraction(1)
        if var[0] == "M" and var[1] != var[2]:
            factor = Fraction(1, 2)
        out = {}
        for k, v in self._mono.items():
            e = k[n]
            if e:
                kk = list(k)
                kk[n] -= 1
                _add_into(out, tuple(kk), v * (factor * e))
        return ConcretePoly._raw(out)

    def partial(self, n: int) -> "ConcretePoly":
        """Plain partial derivative with respect to stored component ``n``."""
        out = {}
        for k, v in self._mono.items():
            e = k[n]
            if e:
                kk = list(k)
                kk[n] -= 1
                _add_into(out, tuple(kk), v * e)
        return ConcretePoly._raw(out)

    def truncate(self, max_order: int) -> "ConcretePoly":
        return ConcretePoly._raw({k: v for k, v in self._mono.items() if sum(k) <= max_order})

    def homogeneous_part(self, order: int) -> "ConcretePoly":
        return ConcretePoly._raw({k: v for k, v in self._mono.items() if sum(k) == order})

    def max_order(self) -> int:
        return max((sum(k) for k in self._mono), default=-1)

    def mu_degree(self) -> int:
        return max((v.mu_degree() for v in self._mono.values()), default=-1)

    def evaluate(self, state: TensorState):
        comps = state.components()
        total = Fraction(0)
        is_float = False
        for k, v in self._mono.items():
            c = v.evaluate(state.mu, state.lam)
            if isinstance(c, float):
                is_float = True
            mono = Fraction(1)
            for x, e in zip(comps, k):
                if e:
                    mono *= x ** e
            total = total + c * (float(mono) if isinstance(c, float) else mono)
        return float(total) if is_float else total

    def first_monomial(self) -> Optional[Tuple[Exp, ScalarFn]]:
        """Lowest-order monomial (deterministic), or None when zero."""
        if not self._mono:
            return None
        k = min(self._mono, key=lambda e: (sum(e), e))
        return k, self._mono[k]

    def dump(self) -> List[str]:
        """Debug listing sorted by order then exponent vector."""
        return [
            f"{monomial_name(k)} : {v.to_text()}"
            for k, v in sorted(self._mono.items(), key=lambda kv: (sum(kv[0]), kv[0]))
        ]

    def __repr__(self) -> str:
        return f"ConcretePoly({len(self._mono)} monomials)"


def monomial_name(e: Exp) -> str:
    parts = [VAR_NAMES[n] + (f"^{x}" if x > 1 else "") for n, x in enumerate(e) if x]
    return "*".join(parts) if parts else "1"


def cp_diff(P: ConcretePoly, var: Var) -> ConcretePoly:
    return P.diff(var)


def cp_eval(P: ConcretePoly, state: TensorState):
    return P.evaluate(state)


# ---------------------------------------------------------------------------
# Gaussian-moment expansion of symmetrized delta contractions

def _mul_linear(poly: Dict[Exp, int], var_offset: int) -> Dict[Exp, int]:
    # multiply by sum_i v_i X_i; key = 3 X-exponents + 12 variable exponents
    out: Dict[Exp, int] = {}
    for k, c in poly.items():
        for i in range(3):
            kk = list(k)
            kk[i] += 1
            kk[3 + var_offset + i] += 1
            t = tuple(kk)
            out[t] = out.get(t, 0) + c
    return out


def _mul_quadratic(poly: Dict[Exp, int]) -> Dict[Exp, int]:
    # multiply by X^T M X = sum_i M_ii X_i^2 + 2 sum_{i<j} M_ij X_i X_j
    out: Dict[Exp, int] = {}
    for k, c in poly.items():
        for (i, j) in MAT_PAIRS:
            kk = list(k)
            kk[i] += 1
            kk[j] += 1
            kk[3 + mat_index(i, j)] += 1
            t = tuple(kk)
            out[t] = out.get(t, 0) + (c if i == j else 2 * c)
    return out


@lru_cache(maxsize=None)
def tensor_invariant(p: int, q: int, r: int, free: Optional[int] = None) -> Dict[Exp, Fraction]:
    """delta^(...) contracted with p mu_i, q mu_ij, r lam_i (and optionally the
    free index ``free``) as an explicit rational polynomial in 12 components."""
    rank = p + 2 * q + r + (0 if free is None else 1)
    if rank % 2:
        raise OddRank(f"rank {rank} is odd")
    start = [0] * (3 + NVARS)
    if free is not None:
        start[free] += 1
    poly: Dict[Exp, int] = {tuple(start): 1}
    for _ in range(p):
        poly = _mul_linear(poly, 0)
    for _ in range(r):
        poly = _mul_linear(poly, 9)
    for _ in range(q):
        poly = _mul_quadratic(poly)
    norm = dfact(rank - 1)
    out: Dict[Exp, Fraction] = {}
    for k, c in poly.items():
        x = k[:3]
        if any(e % 2 for e in x):
            continue
        moment = dfact(x[0] - 1) * dfact(x[1] - 1) * dfact(x[2] - 1)
        key = k[3:]
        out[key] = out.get(key, 0) + Fraction(c * moment, norm)
    return {k: v for k, v in out.items() if v}


# ---------------------------------------------------------------------------
# isotropic polynomials

def _check_pqr(key: PQR) -> PQR:
    p, q, r = key
    if min(p, q, r) < 0:
        raise ValueError(f"negative index in {key}")
    return (int(p), int(q), int(r))


class _IsoBase:
    _parity = 0  # required parity of p + r

    __slots__ = ("_terms",)

    def __init__(self, terms: Optional[Dict[PQR, ScalarFn]] = None):
        self._terms: Dict[PQR, ScalarFn] = {}
        for key, v in (terms or {}).items():
            key = _check_pqr(key)
            if (key[0] + key[2]) % 2 != self._parity:
                raise ParityError(f"key {key} violates the parity rule")
            if not isinstance(v, ScalarFn):
                v = ScalarFn.const(v)
            if v:
                self._terms[key] = self._terms.get(key, ZERO) + v
                if not self._terms[key]:
                    del self._terms[key]

    @property
    def terms(self) -> Dict[PQR, ScalarFn]:
        return dict(self._terms)

    def __getitem__(self, key: PQR) -> ScalarFn:
        return self._terms.get(tuple(key), ZERO)

    def keys(self):
        return sorted(self._terms)

    def items(self):
        return sorted(self._terms.items())

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return self._terms == other._terms

    def __add__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out.get(k, ZERO) + v
        return type(self)(out)

    def __sub__(self, other):
        return self + other.map(lambda f: -f)

    def map(self, fn):
        return type(self)({k: fn(v) for k, v in self._terms.items()})

    def diff_mu(self):
        """Coefficient-wise derivative in the scalar mu."""
        return self.map(lambda f: f.diff(MU))

    def truncate(self, max_order: int):
        return type(self)({k: v for k, v in self._terms.items() if sum(k) <= max_order})

    def is_zero(self) -> bool:
        return not self._terms

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: {v.to_text()}" for k, v in self.items())
        return f"{type(self).__name__}({{{inner}}})"


class IsoScalarPoly(_IsoBase):
    """Isotropic scalar polynomial; keys need p + r even."""

    _parity = 0

    def expand(self) -> ConcretePoly:
        acc: Dict[Exp, ScalarFn] = {}
        for (p, q, r), coef in self._terms.items():
            pref = Fraction(1, math.factorial(p) * math.factorial(q) * math.factorial(r))
            c = coef * pref
            for e, val in tensor_invariant(p, q, r).items():
                _add_into(acc, e, c * val)
        return ConcretePoly._raw(acc)

    def evaluate(self, state: TensorState):
        """Direct evaluation through pairing contraction (no expansion)."""
        total = Fraction(0)
        for (p, q, r), coef in self._terms.items():
            pref = Fraction(1, math.factorial(p) * math.factorial(q) * math.factorial(r))
            val = sym_delta_contract(_slots_for(p, q, r, state)) * pref
            c = coef.evaluate(state.mu, state.lam)
            total = total + (c * float(val) if isinstance(c, float) else c * val)
        return total

    def dmu_k(self) -> "IsoVectorPoly":
        return iso_dmu_k(self)


class IsoVectorPoly(_IsoBase):
    """Isotropic vector polynomial with one free index; keys need p + r odd."""

    _parity = 1

    def expand(self) -> List[ConcretePoly]:
        out = []
        for k in range(DIM):
            acc: Dict[Exp, ScalarFn] = {}
            for (p, q, r), coef in self._terms.items():
                pref = Fraction(1, math.factorial(p) * math.factorial(q) * math.factorial(r))
                c = coef * pref
                for e, val in tensor_invariant(p, q, r, k).items():
                    _add_into(acc, e, c * val)
            out.append(ConcretePoly._raw(acc))
        return out

    def evaluate(self, state: TensorState):
        vals = []
        for k in range(DIM):
            total = Fraction(0)
            for (p, q, r), coef in self._terms.items():
                pref = Fraction(1, math.factorial(p) * math.factorial(q) * math.factorial(r))
                val = sym_delta_contract(_slots_for(p, q, r, state, free=k)) * pref
                c = coef.evaluate(state.mu, state.lam)
                total = total + (c * float(val) if isinstance(c, float) else c * val)
            vals.append(total)
        return vals


def expand(P: Union[IsoScalarPoly, IsoVectorPoly]):
    return P.expand()


def iso_dmu_k(H: IsoScalarPoly) -> IsoVectorPoly:
    """Derivative with respect to mu_k: key (p, q, r) -> (p - 1, q, r).

    The factor p from the p equivalent slots cancels against p! -> (p-1)!,
    so coefficients carry over unchanged.
    """
    return IsoVectorPoly({(p - 1, q, r): v for (p, q, r), v in H.terms.items() if p >= 1})
