"""Arbitrary-order generating function H = H1 + dH and its verification.

H1 is the particular solution built from a psi family (d psi_{n+1}/d mu = psi_n,
psi_0 the equilibrium generating function).  dH is driven by the free
lambda-functions H_{1,0,r,0} (odd r) and one integration constant per step of
the lambda recursion.  The potentials are h' = dH/dmu and h'^k = dH/dmu_k.

Orders are counted as p + q + r.  Because the Galilean conditions couple
orders m, m+1 and m+2, identity checks on a closure truncated at order N are
asserted on monomials of order <= N - 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .galilean import GRAD_VARS, PAIR_WEIGHTS, MomentVec14
from .iso_tensor import (
    ConcretePoly,
    IsoScalarPoly,
    IsoVectorPoly,
    TensorState,
    dfact,
    iso_dmu_k,
    monomial_name,
)
from .scalar_field import LAM, MU, ZERO, ScalarFn, neg_half_inv_lam_pow

Key4 = Tuple[int, int, int, int]


class FamilyTooShallow(ValueError):
    pass


class MissingSeed(KeyError):
    pass


# ---------------------------------------------------------------------------
# psi family and the particular solution

@dataclass(frozen=True)
class PsiFamily:
    psi: Tuple[ScalarFn, ...]

    def __post_init__(self):
        object.__setattr__(self, "psi", tuple(self.psi))
        if not self.psi:
            raise ValueError("a psi family needs at least psi_0")

    @property
    def depth(self) -> int:
        return len(self.psi) - 1

    def __getitem__(self, n: int) -> ScalarFn:
        return self.psi[n]

    def is_consistent(self) -> bool:
        return all(self.psi[n + 1].diff(MU) == self.psi[n] for n in range(self.depth))


def build_psi_family(h_eq: ScalarFn, consts: Sequence[ScalarFn], M: int) -> PsiFamily:
    if len(consts) != M:
        raise ValueError(f"need {M} integration constants, got {len(consts)}")
    psi = [h_eq]
    for c in consts:
        if not c.is_lambda_only():
            raise ValueError("integration constants must not depend on mu")
        psi.append(psi[-1].integrate(MU) + c)
    return PsiFamily(tuple(psi))


def psi_family_from_psi1(psi1: ScalarFn, M: int, consts: Sequence[ScalarFn] = ()) -> PsiFamily:
    """Family with the given psi_1; psi_0 = d psi_1/d mu and the deeper members
    use ``consts`` (zero when omitted)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    extra = list(consts) + [ZERO] * (M - 1 - len(consts))
    if len(extra) != M - 1:
        raise ValueError("too many integration constants")
    psi = [psi1.diff(MU), psi1]
    for c in extra:
        psi.append(psi[-1].integrate(MU) + c)
    return PsiFamily(tuple(psi))


def h1_coefficient(fam: PsiFamily, p: int, q: int, r: int) -> ScalarFn:
    n = (p + r) // 2
    rank = p + 2 * q + r + 1
    base = neg_half_inv_lam_pow(q + n) * fam[n]
    return base.diff(MU, p).diff(LAM, r) * Fraction(dfact(rank), rank)


def build_H1(fam: PsiFamily, N: int) -> IsoScalarPoly:
    need = N // 2
    if fam.depth < need:
        raise FamilyTooShallow(f"order {N} needs psi_0..psi_{need}, family has depth {fam.depth}")
    terms = {}
    for p, q, r in _keys(N, parity=0):
        c = h1_coefficient(fam, p, q, r)
        if c:
            terms[(p, q, r)] = c
    return IsoScalarPoly(terms)


def _keys(N: int, parity: int):
    for total in range(N + 1):
        for p in range(total + 1):
            for r in range(total - p + 1):
                if (p + r) % 2 == parity:
                    yield p, total - p - r, r


# ---------------------------------------------------------------------------
# free input and the coefficient table

@dataclass(frozen=True)
class FreeInput:
    """Free lambda-functions H_{1,0,r,0} (odd r) and recursion constants.

    ``int_consts[(Q, R)]`` is the constant c entering lam^R H_{1,Q+1,R-1,0}.
    """

    h_seed: Mapping[int, ScalarFn] = field(default_factory=dict)
    int_consts: Mapping[Tuple[int, int], Fraction] = field(default_factory=dict)
    strict: bool = True

    def __post_init__(self):
        seeds = {}
        for r, f in dict(self.h_seed).items():
            if r < 1 or r % 2 == 0:
                raise ValueError(f"seed index r={r} must be odd and positive")
            if not isinstance(f, ScalarFn):
                f = ScalarFn.const(f)
            if not f.is_lambda_only():
                raise ValueError(f"seed H_1_0_{r}_0 must not depend on mu")
            seeds[int(r)] = f
        consts = {}
        for (Q, R), c in dict(self.int_consts).items():
            if Q < 0 or R < 2 or R % 2:
                raise ValueError(f"constant key ({Q}, {R}) needs Q >= 0 and even R >= 2")
            consts[(int(Q), int(R))] = Fraction(c)
        object.__setattr__(self, "h_seed", seeds)
        object.__setattr__(self, "int_consts", consts)

    @classmethod
    def zero(cls) -> "FreeInput":
        return cls({}, {}, strict=False)

    def seed(self, r: int) -> ScalarFn:
        if r in self.h_seed:
            return self.h_seed[r]
        if self.strict:
            raise MissingSeed(f"free function H_1_0_{r}_0 not supplied")
        return ZERO

    def const(self, Q: int, R: int) -> Fraction:
        return self.int_consts.get((Q, R), Fraction(0))

    def with_defaults(self, N: int) -> "FreeInput":
        seeds = dict(self.h_seed)
        for r in range(1, N, 2):
            seeds.setdefault(r, ZERO)
        return FreeInput(seeds, self.int_consts, strict=True)


@dataclass(frozen=True)
class CoefficientTable:
    entries: Mapping[Key4, ScalarFn]
    order: int

    def get(self, p: int, q: int, r: int, s: int) -> Optional[ScalarFn]:
        return self.entries.get((p, q, r, s))

    def __getitem__(self, key: Key4) -> ScalarFn:
        return self.entries[tuple(key)]

    def __contains__(self, key) -> bool:
        return tuple(key) in self.entries

    def keys(self):
        return sorted(self.entries)

    def with_entry(self, key: Key4, value: ScalarFn) -> "CoefficientTable":
        key = tuple(key)
        if key not in self.entries:
            raise KeyError(key)
        new = dict(self.entries)
        new[key] = value
        return CoefficientTable(new, self.order)


def _s_range(p: int, r: int) -> range:
    return range((p + r) // 2 + 2)


def solve_delta_coeffs(free: FreeInput, N: int) -> CoefficientTable:
    if N < 0:
        raise ValueError("order must be nonnegative")
    # base[(q, r)] = H_{1,q,r,0}, odd r, 1 + q + r <= N
    base: Dict[Tuple[int, int], ScalarFn] = {}
    for r in range(1, N, 2):
        base[(0, r)] = free.seed(r)
        for q in range(1, N - r):
            Q, R = q - 1, r + 1
            integrand = base[(Q, r)].diff(LAM).shift(db=R - 1) * Fraction(-(2 * Q + R + 1), 2)
            lifted = integrand.integrate(LAM) + free.const(Q, R)
            base[(q, r)] = lifted.shift(db=-R)

    def one(q, r, s):
        if 2 * s <= r - 1:
            return base[(q + s, r - 2 * s)].diff(LAM, 2 * s)
        return ZERO

    def zero_p(q, r, s):
        if s == 0 or r == 0:
            return ZERO
        t = s - 1
        if 2 * t <= r - 2:
            return base[(q + t, r - 2 * t - 1)].diff(LAM, 2 * t + 1)
        return ZERO

    entries = {}
    for p, q, r in _keys(N, parity=0):
        for s in _s_range(p, r):
            if p % 2 == 0:
                val = zero_p(q + p // 2, r, s + p // 2)
            else:
                val = one(q + (p - 1) // 2, r, s + (p - 1) // 2)
            entries[(p, q, r, s)] = val
    return CoefficientTable(entries, N)


def assemble_delta_H(table: CoefficientTable, N: int) -> IsoScalarPoly:
    acc: Dict[Tuple[int, int, int], ScalarFn] = {}
    for (p, q, r, s), f in table.entries.items():
        if p + q + r > N or not f:
            continue
        term = f.shift(da=s) * Fraction(1, math.factorial(s))
        acc[(p, q, r)] = acc.get((p, q, r), ZERO) + term
    return IsoScalarPoly(acc)


# ---------------------------------------------------------------------------
# closures

@dataclass(frozen=True)
class ClosureResult:
    H: IsoScalarPoly
    h_prime: IsoScalarPoly
    h_prime_k: IsoVectorPoly
    order: int
    H1: IsoScalarPoly
    delta_H: IsoScalarPoly
    table: CoefficientTable
    provenance: Mapping[str, object] = field(default_factory=dict)

    def with_table(self, table: CoefficientTable) -> "ClosureResult":
        """Rebuild dH (and the potentials) from a modified table."""
        dH = assemble_delta_H(table, self.order)
        return _finish(self.H1, dH, table, self.order, dict(self.provenance))

    def with_potentials(self, h_prime=None, h_prime_k=None) -> "ClosureResult":
        return replace(self, h_prime=h_prime or self.h_prime, h_prime_k=h_prime_k or self.h_prime_k)


def _finish(H1, dH, table, N, provenance) -> ClosureResult:
    H = H1 + dH
    return ClosureResult(H, H.diff_mu(), iso_dmu_k(H), N, H1, dH, table, provenance)


def make_closure(fam: PsiFamily, free: FreeInput, N: int) -> ClosureResult:
    H1 = build_H1(fam, N)
    table = solve_delta_coeffs(free, N)
    dH = assemble_delta_H(table, N)
    provenance = {
        "order": N,
        "psi": [f.to_text() for f in fam.psi],
        "seeds": {r: f.to_text() for r, f in sorted(free.h_seed.items())},
        "int_consts": {f"{Q},{R}": str(c) for (Q, R), c in sorted(free.int_consts.items())},
    }
    return _finish(H1, dH, table, N, provenance)


# ---------------------------------------------------------------------------
# verification

@dataclass
class Check:
    label: str
    passed: bool
    detail: str = ""
    monomial: Optional[str] = None


@dataclass
class VerificationReport:
    checks: List[Check]
    truncation: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def by_label(self, label: str) -> List[Check]:
        return [c for c in self.checks if c.label == label]


def _first_nonzero(label: str, residuals: Iterable[Tuple[str, ConcretePoly]], trunc: int, ok: str) -> Check:
    for comp, R in residuals:
        R = R.truncate(trunc)
        if R:
            e, c = R.first_monomial()
            return Check(label, False, f"{comp}: coefficient {c.to_text()}", monomial_name(e))
    return Check(label, True, ok)


def _m(i):
    return ("m", i)


def _M(i, j):
    return ("M", i, j)


def _l(i):
    return ("l", i)


def polynomial_checks(H: ConcretePoly, trunc: int, compat: bool = True) -> List[Check]:
    """Integrability and Galilean conditions on the generating function."""
    ok = f"holds up to order {trunc}"
    D_mu = H.diff(MU)
    D_m = [H.diff(_m(i)) for i in range(3)]
    D_lam = H.diff(LAM)
    checks = []

    checks.append(_first_nonzero("mixed-mu-tensor", (
        (f"(i,j)=({i + 1},{j + 1})", D_mu.diff(_M(i, j)) - D_m[i].diff(_m(j)))
        for i in range(3) for j in range(i, 3)), trunc, ok))
    checks.append(_first_nonzero("mixed-mu-heatvec", (
        (f"i={i + 1}", D_mu.diff(_l(i)) - D_lam.diff(_m(i))) for i in range(3)), trunc, ok))
    checks.append(_first_nonzero("antisym-tensor", (
        (f"(k,i,j)=({k + 1},{i + 1},{j + 1})", D_m[k].diff(_M(i, j)) - D_m[i].diff(_M(k, j)))
        for k in range(3) for i in range(3) for j in range(3) if k < i), trunc, ok))
    checks.append(_first_nonzero("antisym-heatvec", (
        (f"(k,i)=({k + 1},{i + 1})", D_m[k].diff(_l(i)) - D_m[i].diff(_l(k)))
        for k in range(3) for i in range(3) if k < i), trunc, ok))

    def vector_lhs(k, i):
        out = D_mu.diff(_m(k)).mul_var(_m(i))
        for j in range(3):
            out = out + D_mu.diff(_M(k, j)).mul_var(_M(j, i)).scale(2)
            out = out + D_m[k].diff(_M(i, j)).mul_var(_l(j)).scale(2)
        out = out + D_mu.diff(_M(k, i)).mul_var(LAM).scale(2)
        out = out + D_mu.diff(_l(k)).mul_var(_l(i))
        if k == i:
            out = out + D_mu
        return out

    def scalar_lhs(i):
        out = D_mu.diff(MU).mul_var(_m(i))
        for h in range(3):
            out = out + D_mu.diff(_m(h)).mul_var(_M(i, h)).scale(2)
            out = out + D_mu.diff(_M(h, i)).mul_var(_l(h)).scale(2)
        out = out + D_mu.diff(_m(i)).mul_var(LAM).scale(2)
        out = out + D_mu.diff(LAM).mul_var(_l(i))
        return out

    def vector_full(k, i):
        # the vector condition before using the mixed-derivative identities
        out = D_mu.diff(_m(k)).mul_var(_m(i))
        for h in range(3):
            out = out + D_m[h].diff(_m(k)).mul_var(_M(i, h)).scale(2)
            out = out + D_m[k].diff(_M(h, i)).mul_var(_l(h)).scale(2)
        out = out + D_m[i].diff(_m(k)).mul_var(LAM).scale(2)
        out = out + D_m[k].diff(LAM).mul_var(_l(i))
        if k == i:
            out = out + D_mu
        return out

    checks.append(_first_nonzero("galilean-vector", (
        (f"(k,i)=({k + 1},{i + 1})", vector_lhs(k, i)) for k in range(3) for i in range(3)), trunc, ok))
    scal = [scalar_lhs(i) for i in range(3)]
    checks.append(_first_nonzero("galilean-scalar", (
        (f"i={i + 1}", scal[i]) for i in range(3)), trunc, ok))
    if compat:
        checks.append(_first_nonzero("scalar-vector-compat", (
            (f"(k,i)=({k + 1},{i + 1})", scal[i].diff(_m(k)) - vector_full(k, i).diff(MU))
            for k in range(3) for i in range(3)), trunc - 1, f"holds up to order {trunc - 1}"))
    return checks


def potential_symmetry_checks(hp: ConcretePoly, hk: Sequence[ConcretePoly], trunc: int) -> List[Check]:
    ok = f"holds up to order {trunc}"
    res = []
    for i in range(3):
        res.append((f"dh'/dmu_{i + 1}", hp.diff(_m(i)) - hk[i].diff(MU)))
        res.append((f"dh'/dlam_{i + 1}", hp.diff(_l(i)) - hk[i].diff(LAM)))
        for j in range(3):
            res.append((f"dh'/dmu_{i + 1}{j + 1}", hp.diff(_M(i, j)) - hk[i].diff(_m(j))))
    for k in range(3):
        for i in range(3):
            if k < i:
                res.append((f"dh'^[{k + 1}/dlam_{i + 1}]", hk[k].diff(_l(i)) - hk[i].diff(_l(k))))
                for j in range(3):
                    res.append((f"dh'^[{k + 1}/dmu_{i + 1}]{j + 1}",
                                hk[k].diff(_M(i, j)) - hk[i].diff(_M(k, j))))
    return [_first_nonzero("potential-symmetry", res, trunc, ok)]


def mu_degree_check(dH: ConcretePoly, N: int) -> Check:
    for n in range(N + 1):
        part = dH.homogeneous_part(n)
        deg = part.mu_degree()
        if deg > n - 1:
            worst = max(part.items(), key=lambda kv: kv[1].mu_degree())
            return Check("mu-degree-bound", False,
                         f"order {n} part has mu-degree {deg} > {n - 1}", monomial_name(worst[0]))
    return Check("mu-degree-bound", True, f"order-n part has mu-degree <= n-1 for n <= {N}")


def table_checks(table: CoefficientTable) -> List[Check]:
    """Scalar recursions and zero rules on the stored coefficient table."""
    T = table.entries

    def g(p, q, r, s):
        return T.get((p, q, r, s))

    def run(label, items):
        # items yield (description, residual-or-None); None means not checkable
        count = 0
        for desc, val in items:
            if val is None:
                continue
            count += 1
            if val:
                return Check(label, False, f"{desc}: residual {val.to_text()}")
        return Check(label, True, f"{count} relations hold")

    def refs(*vals):
        return None if any(v is None for v in vals) else vals

    def zero_rules():
        for (p, q, r, s), f in T.items():
            if p == 0 and (s == 0 or r == 0 or (q == 0 and r == 0)):
                yield f"H_{p}_{q}_{r}_{s}", f

    def p1_branch():
        for (p, q, r, s), f in T.items():
            if p != 1:
                continue
            if 2 * s >= r + 1:
                yield f"H_1_{q}_{r}_{s}", f
            elif s:
                src = g(1, q + s, r - 2 * s, 0)
                if src is not None:
                    yield f"H_1_{q}_{r}_{s}", f - src.diff(LAM, 2 * s)

    def p0_branch():
        for (p, q, r, s), f in T.items():
            if p != 0 or s == 0:
                continue
            t = s - 1
            if r == 0 or 2 * t >= r:
                yield f"H_0_{q}_{r}_{s}", f
            else:
                src = g(1, q + t, r - 2 * t - 1, 0)
                if src is not None:
                    yield f"H_0_{q}_{r}_{s}", f - src.diff(LAM, 2 * t + 1)

    def reduction():
        for (p, q, r, s), f in T.items():
            if p < 2:
                continue
            k = p // 2
            src = g(p - 2 * k, q + k, r, s + k)
            if src is not None:
                yield f"H_{p}_{q}_{r}_{s}", f - src

    def index_shift():
        for (p, q, r, s), f in T.items():
            if s == 0 or q == 0:
                continue
            other = g(p + 2, q - 1, r, s - 1)
            if other is not None:
                yield f"H_{p}_{q}_{r}_{s} vs H_{p + 2}_{q - 1}_{r}_{s - 1}", f - other

    def lambda_shift():
        for (p, q, r, s), f in T.items():
            if s == 0 or r == 0:
                continue
            other = g(p + 1, q, r - 1, s - 1)
            if other is not None:
                yield f"H_{p}_{q}_{r}_{s} vs dlam H_{p + 1}_{q}_{r - 1}_{s - 1}", f - other.diff(LAM)

    def low_shift():
        for (p, q, r, s), f in T.items():
            if s == 0 or r == 0:
                continue
            if p == 0:
                other = g(1, q, r - 1, s - 1)
                if other is not None:
                    yield f"H_0_{q}_{r}_{s}", f - other.diff(LAM)
            elif p == 1:
                other = g(0, q + 1, r - 1, s)
                if other is not None:
                    yield f"H_1_{q}_{r}_{s}", f - other.diff(LAM)

    def trace_recursion(low_only):
        for (P, Q, R, s1), a in T.items():
            if s1 == 0:
                continue
            if low_only and P > 1:
                continue
            s = s1 - 1
            b = g(P, Q + 1, R, s1)
            if b is None:
                continue
            val = a * (P + 2 * Q + R + 1) + b.shift(db=1) * 2
            if R:
                if low_only and P == 1:
                    c = g(0, Q + 2, R - 1, s1)
                else:
                    c = g(P + 1, Q + 1, R - 1, s)
                if c is None:
                    continue
                val = val + c * (2 * R)
            yield f"(P,Q,R,s)=({P},{Q},{R},{s})", val

    def integration():
        for (p, q, r, s), f in T.items():
            if p != 1 or s != 0 or q == 0:
                continue
            Q, R = q - 1, r + 1
            prev = g(1, Q, r, 0)
            if prev is None:
                continue
            val = prev.diff(LAM) * (2 * Q + R + 1) + f.shift(db=R).diff(LAM).shift(db=1 - R) * 2
            yield f"(Q,R)=({Q},{R})", val

    return [
        run("zero-rules", zero_rules()),
        run("p1-branch", p1_branch()),
        run("p0-branch", p0_branch()),
        run("reduction", reduction()),
        run("index-shift", index_shift()),
        run("lambda-shift", lambda_shift()),
        run("low-shift", low_shift()),
        run("trace-recursion", trace_recursion(False)),
        run("low-trace-recursion", trace_recursion(True)),
        run("lambda-integration", integration()),
    ]


def verify_closure(res: ClosureResult, max_order: Optional[int] = None,
                   include_table: bool = True, compat: bool = True) -> VerificationReport:
    trunc = res.order - 2 if max_order is None else max_order
    checks = polynomial_checks(res.H.expand(), trunc, compat=compat)
    checks += potential_symmetry_checks(res.h_prime.expand(), res.h_prime_k.expand(), trunc)
    checks.append(mu_degree_check(res.delta_H.expand(), res.order))
    if include_table:
        checks += table_checks(res.table)
    return VerificationReport(checks, trunc)


# ---------------------------------------------------------------------------
# moments, fluxes and entropy from the potentials

def gradient(P: ConcretePoly) -> List[ConcretePoly]:
    return [P.diff(v) for v in GRAD_VARS]


def moments_at_rest(res: ClosureResult, state: TensorState):
    """(F_hat, [F_hat^{kA} for k = 1, 2, 3]) as MomentVec14 values."""
    hp = res.h_prime.expand()
    hk = res.h_prime_k.expand()
    F = MomentVec14.from_flat([g.evaluate(state) for g in gradient(hp)])
    fluxes = [MomentVec14.from_flat([g.evaluate(state) for g in gradient(hk[k])]) for k in range(3)]
    return F, fluxes


def _state_vector(state: TensorState) -> List[Fraction]:
    return [state.mu, *state.components()[0:9], state.lam, *state.components()[9:12]]


def entropy_from_potential(res: ClosureResult, state: TensorState):
    """h = mu_A dh'/dmu_A - h' at ``state``."""
    hp = res.h_prime.expand()
    x = _state_vector(state)
    grads = [g.evaluate(state) for g in gradient(hp)]
    total = sum((w * a * b for w, a, b in zip(PAIR_WEIGHTS, x, grads)), Fraction(0))
    return total - hp.evaluate(state)


def entropy_flux_from_potential(res: ClosureResult, state: TensorState):
    """h^k = mu_A dh'^k/dmu_A - h'^k at ``state``."""
    hk = res.h_prime_k.expand()
    x = _state_vector(state)
    out = []
    for k in range(3):
        grads = [g.evaluate(state) for g in gradient(hk[k])]
        total = sum((w * a * b for w, a, b in zip(PAIR_WEIGHTS, x, grads)), Fraction(0))
        out.append(total - hk[k].evaluate(state))
    return out
