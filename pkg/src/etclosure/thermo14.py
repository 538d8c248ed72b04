"""Second-order 14-moment closure in (rho, T) variables.

A material is described by p, epsilon, phi001 and phi011 as functions of
(rho, T) together with their first partial derivatives.  From these the
module derives the scalar coefficients h2, h3, h4, K, D, D1, beta1..3, solves
the first-order multiplier deviations, and evaluates the first-order flux
closure, the second-order entropy density and the entropy flux.

:func:`bridge_check` compares all of that with the potentials produced by
:mod:`etclosure.closure_gen` for a psi-family model.
"""
from __future__ import annotations

import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import sympy

from ._linalg import SingularMatrix, det, solve
from .closure_gen import FreeInput, PsiFamily, gradient, make_closure, moments_at_rest
from .galilean import GRAD_VARS, PAIR_WEIGHTS
from .iso_tensor import MAT_PAIRS, ConcretePoly, TensorState, _var_index
from .scalar_field import LAM, MU, ScalarFn, neg_half_inv_lam_pow

Number = Union[Fraction, float]
REL_TOL = 1e-12


class SingularState(ArithmeticError):
    """The closure degenerates at this state (a pivot coefficient is zero)."""


class ConstraintViolation(ValueError):
    def __init__(self, label: str, message: str):
        super().__init__(f"{label}: {message}")
        self.label = label


class BridgeMismatch(AssertionError):
    def __init__(self, quantity: str, message: str):
        super().__init__(f"{quantity}: {message}")
        self.quantity = quantity


# ---------------------------------------------------------------------------
# states and fields

@dataclass(frozen=True)
class EqState:
    rho: Number
    T: Number

    def __post_init__(self):
        for name in ("rho", "T"):
            v = getattr(self, name)
            if not isinstance(v, float):
                v = Fraction(v)
                object.__setattr__(self, name, v)
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")

    @property
    def lam(self) -> Number:
        return 1 / (2 * self.T)


def _sym3(m) -> Tuple[Tuple[Number, ...], ...]:
    rows = tuple(tuple(x if isinstance(x, float) else Fraction(x) for x in r) for r in m)
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise ValueError("expected a 3x3 matrix")
    if any(rows[i][j] != rows[j][i] for i in range(3) for j in range(3)):
        raise ValueError("matrix must be symmetric")
    return rows


def _zero_mat():
    return ((Fraction(0),) * 3,) * 3


@dataclass(frozen=True)
class NonEqFields:
    """Dynamic pressure, deviatoric stress and heat flux."""

    pi: Number = Fraction(0)
    Fdev: Tuple[Tuple[Number, ...], ...] = field(default_factory=_zero_mat)
    q: Tuple[Number, ...] = (Fraction(0),) * 3

    def __post_init__(self):
        if not isinstance(self.pi, float):
            object.__setattr__(self, "pi", Fraction(self.pi))
        object.__setattr__(self, "Fdev", _sym3(self.Fdev))
        if len(self.q) != 3:
            raise ValueError("q must have 3 components")
        object.__setattr__(self, "q", tuple(x if isinstance(x, float) else Fraction(x) for x in self.q))
        if sum(self.Fdev[i][i] for i in range(3)) != 0:
            raise ValueError("Fdev must be traceless")


@dataclass(frozen=True)
class MaterialPoint:
    """State functions and their (rho, T) partials at one state."""

    p: Number
    p_rho: Number
    p_T: Number
    eps: Number
    eps_rho: Number
    eps_T: Number
    phi001: Number
    phi001_rho: Number
    phi001_T: Number
    phi011: Number
    phi011_rho: Number
    phi011_T: Number
    exact: bool = True


class MaterialModel(ABC):
    exact: bool = True

    @abstractmethod
    def point(self, s: EqState) -> MaterialPoint:
        ...


def _to_number(x) -> Number:
    if isinstance(x, sympy.Rational):
        return Fraction(int(x.p), int(x.q))
    if isinstance(x, sympy.Basic):
        if x.is_Rational:
            return Fraction(int(x.p), int(x.q))
        return float(x)
    return x


class SymbolicMaterial(MaterialModel):
    """Material given as sympy expressions in ``rho`` and ``T``."""

    FIELDS = ("p", "epsilon", "phi001", "phi011")

    def __init__(self, p, epsilon, phi001, phi011, params: Optional[Mapping[str, object]] = None):
        self.rho, self.T = sympy.symbols("rho T", positive=True)
        local = {"rho": self.rho, "T": self.T}
        subs = {sympy.Symbol(k): sympy.Rational(str(v)) for k, v in (params or {}).items()}
        self.params = {k: Fraction(str(v)) for k, v in (params or {}).items()}
        self.exprs = {}
        for name, e in zip(self.FIELDS, (p, epsilon, phi001, phi011)):
            expr = sympy.sympify(e, locals=local, rational=True) if isinstance(e, str) else sympy.sympify(e)
            expr = expr.subs(subs)
            free = expr.free_symbols - {self.rho, self.T}
            if free:
                raise ValueError(f"{name} has unbound symbols {sorted(map(str, free))}")
            self.exprs[name] = expr
        self._derivs = {
            name: (e, sympy.diff(e, self.rho), sympy.diff(e, self.T)) for name, e in self.exprs.items()
        }
        self.exact = True

    @classmethod
    def from_text(cls, text: str) -> "SymbolicMaterial":
        fields: Dict[str, str] = {}
        params: Dict[str, str] = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {n}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in cls.FIELDS:
                fields[key] = value
            elif re.fullmatch(r"[A-Za-z_]\w*", key):
                params[key] = value
            else:
                raise ValueError(f"line {n}: bad key {key!r}")
        missing = [f for f in cls.FIELDS if f not in fields]
        if missing:
            raise ValueError(f"material is missing {', '.join(missing)}")
        return cls(*(fields[f] for f in cls.FIELDS), params=params)

    @classmethod
    def from_file(cls, path) -> "SymbolicMaterial":
        return cls.from_text(Path(path).read_text())

    def point(self, s: EqState) -> MaterialPoint:
        at = {self.rho: _sym_number(s.rho), self.T: _sym_number(s.T)}
        vals = []
        for name in self.FIELDS:
            for e in self._derivs[name]:
                vals.append(_to_number(e.subs(at)))
        exact = all(isinstance(v, Fraction) for v in vals)
        return MaterialPoint(*vals, exact=exact)


def _sym_number(x):
    if isinstance(x, Fraction):
        return sympy.Rational(x.numerator, x.denominator)
    return sympy.Float(x)


def ideal_gas(cv) -> SymbolicMaterial:
    """Polytropic ideal gas p = rho T, epsilon = cv T with the minimal
    polynomial phi functions compatible with the material constraints."""
    return SymbolicMaterial(
        "rho*T", "cv*T", "2*(cv+1)*rho*T**2", "-6*(cv+2)*rho*T**3", params={"cv": Fraction(cv)}
    )


class NumericMaterial(MaterialModel):
    """Material given by Python callables f(rho, T).

    ``derivatives`` may map a field name to ``(d/drho, d/dT)`` callables.
    Missing derivatives are taken by central differences with step
    ``x * 2**-20``; callables that accept Fractions are then differenced exactly.
    """

    def __init__(self, p: Callable, epsilon: Callable, phi001: Callable, phi011: Callable,
                 derivatives: Optional[Mapping[str, Tuple[Callable, Callable]]] = None):
        self.funcs = {"p": p, "epsilon": epsilon, "phi001": phi001, "phi011": phi011}
        self.derivatives = dict(derivatives or {})
        self.exact = False

    @staticmethod
    def _central(f, rho, T, wrt):
        if wrt == "rho":
            h = rho * Fraction(1, 2 ** 20) if isinstance(rho, Fraction) else rho * 2.0 ** -20
            return (f(rho + h, T) - f(rho - h, T)) / (2 * h)
        h = T * Fraction(1, 2 ** 20) if isinstance(T, Fraction) else T * 2.0 ** -20
        return (f(rho, T + h) - f(rho, T - h)) / (2 * h)

    def point(self, s: EqState) -> MaterialPoint:
        vals = []
        for name in SymbolicMaterial.FIELDS:
            f = self.funcs[name]
            vals.append(float(f(s.rho, s.T)))
            if name in self.derivatives:
                d_rho, d_T = self.derivatives[name]
                vals += [float(d_rho(s.rho, s.T)), float(d_T(s.rho, s.T))]
            else:
                vals += [float(self._central(f, s.rho, s.T, "rho")), float(self._central(f, s.rho, s.T, "T"))]
        return MaterialPoint(*vals, exact=False)


# ---------------------------------------------------------------------------
# material constraints

@dataclass
class MaterialCheck:
    label: str
    state: int
    passed: bool
    lhs: Number
    rhs: Number


@dataclass
class MaterialReport:
    checks: List[MaterialCheck]
    h4: List[Number]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[MaterialCheck]:
        return [c for c in self.checks if not c.passed]


def _close(a: Number, b: Number, exact: bool, scale: Number = 0) -> bool:
    if exact and isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    tol = REL_TOL * max(abs(float(a)), abs(float(b)), abs(float(scale)), 1e-300)
    return abs(float(a) - float(b)) <= tol


def h4_of(mp: MaterialPoint, s: EqState) -> Number:
    return s.T ** 2 * (2 * (mp.eps + mp.p / s.rho) * mp.p_T - mp.phi001_T)


def material_relations(mp: MaterialPoint, s: EqState) -> List[Tuple[str, Number, Number, Number]]:
    """(label, lhs, rhs, scale) for every constraint a material must satisfy."""
    rho, T = s.rho, s.T
    a = mp.p / rho + mp.eps
    X = T * mp.p_T - mp.p - rho * mp.eps
    h4 = h4_of(mp, s)
    out = [
        ("gibbs-integrability", mp.eps_rho, (mp.p - T * mp.p_T) / rho ** 2, abs(mp.p) / rho ** 2),
        ("phi001-density", mp.phi001_rho, 2 * a * mp.p_rho, 0),
        ("phi011-density", mp.phi011_rho, -6 * (mp.eps + 2 * mp.p / rho) * T * mp.p_rho, 0),
        ("phi011-temperature", mp.phi011_T,
         2 / T * mp.phi011 - 6 * T * (2 * mp.p / rho + mp.eps) * mp.p_T + 3 * h4 / T + 6 * mp.p * a,
         abs(2 / T * mp.phi011) + abs(3 * h4 / T)),
        ("phi011-temperature-direct", mp.phi011_T,
         2 / T * mp.phi011 - 3 * T * mp.phi001_T - 6 * mp.p / rho * X,
         abs(2 / T * mp.phi011) + abs(3 * T * mp.phi001_T)),
    ]
    # d phi001/d lam at fixed mu, by the chain rule, against its closed form
    if mp.p_rho != 0:
        rho_lam = 2 * T * X / mp.p_rho
        chain = mp.phi001_rho * rho_lam - 2 * T ** 2 * mp.phi001_T
        out.append(("h002-consistency", chain, 2 * h4 - 4 * rho * T * a ** 2,
                    abs(2 * T ** 2 * mp.phi001_T) + abs(mp.phi001_rho * rho_lam)))
    return out


def validate_material(m: MaterialModel, probe: Sequence[EqState], raise_on_fail: bool = True) -> MaterialReport:
    checks, h4s = [], []
    for n, s in enumerate(probe):
        mp = m.point(s)
        h4s.append(h4_of(mp, s))
        for label, lhs, rhs, scale in material_relations(mp, s):
            ok = _close(lhs, rhs, mp.exact, scale)
            checks.append(MaterialCheck(label, n, ok, lhs, rhs))
            if not ok and raise_on_fail:
                raise ConstraintViolation(label, f"state {n}: {lhs} != {rhs}")
    return MaterialReport(checks, h4s)


# ---------------------------------------------------------------------------
# derived coefficients

@dataclass(frozen=True)
class DerivedCoeffs:
    h2: Number
    h3: Number
    h4: Number
    K: Number
    D: Number
    D1: Number
    beta1: Number
    beta2: Number
    beta3: Number
    K_from_beta3: Number


def _nonzero(value, what):
    if value == 0:
        raise SingularState(f"{what} vanishes")


def derived_coeffs(m: MaterialModel, s: EqState) -> DerivedCoeffs:
    mp = m.point(s)
    return _derived(mp, s)


def _derived(mp: MaterialPoint, s: EqState) -> DerivedCoeffs:
    rho, T = s.rho, s.T
    _nonzero(mp.p_rho, "(dp/drho)_T")
    _nonzero(mp.eps_T, "(d eps/dT)_rho")
    a = mp.p / rho + mp.eps
    h2 = -Fraction(5, 6) * T * mp.p + rho * T / 2 * mp.p_rho + T ** 2 / (2 * rho) * mp.p_T ** 2 / mp.eps_T
    _nonzero(h2, "h2")
    h3 = -mp.p * T
    h4 = h4_of(mp, s)
    _nonzero(h4, "h4")
    K = Fraction(2, 3) / h4 * (mp.phi011 + 6 * mp.p * T * a)
    D = 8 * rho ** 2 * T ** 3 * mp.eps_T * h2 / mp.p_rho
    D1 = -2 * h4 * rho * T
    beta1 = mp.phi001
    beta3 = Fraction(2, 3) * mp.phi011
    beta2 = (4 * h2 - Fraction(10, 3) * h3) * a + Fraction(5, 6) * beta3
    K_alt = (beta3 - 4 * h3 * a) / h4
    return DerivedCoeffs(h2, h3, h4, K, D, D1, beta1, beta2, beta3, K_alt)


# ---------------------------------------------------------------------------
# first order

@dataclass(frozen=True)
class LagrangeDeviation:
    d_mu: Number
    d_lam: Number
    mu_ll: Number
    mu_dev: Tuple[Tuple[Number, ...], ...]
    mu_i: Tuple[Number, ...]
    lam_i: Tuple[Number, ...]

    def mu_ij(self):
        """Full first-order mu_ij deviation (deviatoric part plus trace/3)."""
        return tuple(tuple(self.mu_dev[i][j] + (self.mu_ll / 3 if i == j else 0) for j in range(3))
                     for i in range(3))


def first_order_multipliers(m: MaterialModel, s: EqState, n: NonEqFields) -> LagrangeDeviation:
    mp = m.point(s)
    dc = _derived(mp, s)
    return _multipliers(mp, s, n, dc)


def _multipliers(mp, s, n, dc) -> LagrangeDeviation:
    rho, T = s.rho, s.T
    _nonzero(dc.D, "D")
    _nonzero(mp.p, "p")
    a = mp.p / rho + mp.eps
    X = T * mp.p_T - mp.p - rho * mp.eps
    r = n.pi / dc.D
    d_mu = (-4 * rho ** 2 * T ** 3 * mp.eps_T - 4 * T ** 3 * X * mp.p_T / mp.p_rho) * r
    d_lam = -2 * rho * T ** 3 * mp.p_T / mp.p_rho * r
    mu_ll = 4 * rho ** 2 * T ** 3 * mp.eps_T / mp.p_rho * r
    mu_dev = tuple(tuple(-n.Fdev[i][j] / (2 * mp.p * T) for j in range(3)) for i in range(3))
    mu_i = tuple(-2 / dc.h4 * a * x for x in n.q)
    lam_i = tuple(x / dc.h4 for x in n.q)
    return LagrangeDeviation(d_mu, d_lam, mu_ll, mu_dev, mu_i, lam_i)


def equilibrium_blocks(mp: MaterialPoint, s: EqState) -> Dict[str, Number]:
    """Second derivatives of the equilibrium potential and the low-order
    coefficients of h' at equilibrium, in terms of the material."""
    rho, T = s.rho, s.T
    a = mp.p / rho + mp.eps
    X = T * mp.p_T - mp.p - rho * mp.eps
    h4 = h4_of(mp, s)
    return {
        "h000_mumu": -rho * T / mp.p_rho,
        "h000_mulam": 2 * T * X / mp.p_rho,
        "h000_lamlam": -4 * rho * T ** 2 * mp.eps_T - 4 * T * X ** 2 / (rho * mp.p_rho),
        "h010_mu": -rho * T,
        "h010_lam": -2 * T * (mp.p + rho * mp.eps),
        "h020": -3 * mp.p * T,
        "h200": -T * rho,
        "h101": -2 * T * (mp.p + rho * mp.eps),
        "h002": 2 * h4 - 4 * rho * T * a ** 2,
        "phi100": mp.p,
        "phi100_mu": -T * rho,
        "phi100_lam": -2 * rho * T * a,
        "phi110": -3 * mp.p * T,
        "phi001_mu": -2 * rho * T * a,
        "phi001_lam": 2 * h4 - 4 * rho * T * a ** 2,
    }


def linear_system_image(m: MaterialModel, s: EqState, dev: LagrangeDeviation):
    """Apply the first-order moment equations to a multiplier deviation.

    Returns ``(mass_residual, energy_residual, NonEqFields)``; for the
    deviation solved by :func:`first_order_multipliers` the residuals vanish
    and the fields reproduce the input.
    """
    mp = m.point(s)
    b = equilibrium_blocks(mp, s)
    mass = b["h000_mumu"] * dev.d_mu + b["h000_mulam"] * dev.d_lam + b["h010_mu"] * dev.mu_ll
    energy = b["h000_mulam"] * dev.d_mu + b["h000_lamlam"] * dev.d_lam + b["h010_lam"] * dev.mu_ll
    pi = b["h010_mu"] * dev.d_mu + b["h010_lam"] * dev.d_lam + Fraction(5, 9) * b["h020"] * dev.mu_ll
    Fdev = tuple(tuple(Fraction(2, 3) * b["h020"] * dev.mu_dev[i][j] for j in range(3)) for i in range(3))
    q = tuple((b["h101"] * dev.mu_i[i] + b["h002"] * dev.lam_i[i]) / 2 for i in range(3))
    balance = [b["h200"] * dev.mu_i[i] + b["h101"] * dev.lam_i[i] for i in range(3)]
    if any(x != 0 for x in balance) and mp.exact:
        raise ArithmeticError("momentum balance not satisfied")
    return mass, energy, NonEqFields(pi, Fdev, q)


def _sym_delta_q(q):
    # delta^(ij q^k) as a 3x3x3 array indexed [k][i][j]
    d = lambda a, b: 1 if a == b else 0  # noqa: E731
    return [[[Fraction(1, 3) * (d(i, j) * q[k] + d(j, k) * q[i] + d(k, i) * q[j]) for j in range(3)]
             for i in range(3)] for k in range(3)]


def flux_closure_first_order(m: MaterialModel, s: EqState, n: NonEqFields):
    """(F^{kij} as [k][i][j], G^{ki} as [k][i]) up to first order."""
    mp = m.point(s)
    dc = _derived(mp, s)
    return _fluxes(mp, s, n, dc)


def _fluxes(mp, s, n, dc):
    _nonzero(mp.p, "p")
    rho, T = s.rho, s.T
    a = mp.p / rho + mp.eps
    sq = _sym_delta_q(n.q)
    Fkij = [[[Fraction(3, 2) * dc.K * sq[k][i][j] for j in range(3)] for i in range(3)] for k in range(3)]
    c_pi = dc.h4 / (2 * dc.h2) * (Fraction(5, 6) * dc.K - mp.p_T / (rho * mp.eps_T)) + 2 * a
    c_dev = -dc.h4 / 2 * dc.K / (mp.p * T) + 2 * a
    Gkill = [[(mp.phi001 + c_pi * n.pi if k == i else 0) + c_dev * n.Fdev[k][i] for i in range(3)]
             for k in range(3)]
    return Fkij, Gkill


FIRST_ORDER_ENTROPY = Fraction(0)


def entropy_second_order(m: MaterialModel, s: EqState, n: NonEqFields) -> Number:
    mp = m.point(s)
    dc = _derived(mp, s)
    return _entropy2(n, dc)


def _entropy2(n, dc):
    _nonzero(dc.h3, "h3")
    FF = sum(n.Fdev[i][j] * n.Fdev[i][j] for i in range(3) for j in range(3))
    qq = sum(x * x for x in n.q)
    return n.pi ** 2 / (4 * dc.h2) + FF / (4 * dc.h3) + qq / dc.h4


def entropy_flux_parts(m: MaterialModel, s: EqState, n: NonEqFields):
    """(first-order part q/T, second-order part) of the entropy flux."""
    mp = m.point(s)
    dc = _derived(mp, s)
    return _entropy_flux(mp, s, n, dc)


def _entropy_flux(mp, s, n, dc):
    _nonzero(mp.p, "p")
    rho, T = s.rho, s.T
    first = [x / T for x in n.q]
    c_pi = 1 / (2 * dc.h2) * (Fraction(5, 6) * dc.K - mp.p_T / (rho * mp.eps_T))
    second = [
        n.pi * n.q[k] * c_pi - dc.K / (2 * mp.p * T) * sum(n.Fdev[k][i] * n.q[i] for i in range(3))
        for k in range(3)
    ]
    return first, second


def entropy_flux(m: MaterialModel, s: EqState, n: NonEqFields):
    first, second = entropy_flux_parts(m, s, n)
    return [a + b for a, b in zip(first, second)]


# ---------------------------------------------------------------------------
# psi-family materials

class PsiMaterial(MaterialModel):
    """Material implied by psi_1(mu, lam) and the free functions H_{1,0,1,0},
    H_{1,1,1,0}.  States are addressed through :meth:`state`, which records the
    chemical-potential multiplier belonging to each (rho, T)."""

    def __init__(self, psi1: ScalarFn, h1010: ScalarFn, h1110: ScalarFn,
                 adjust: Optional[Mapping[str, ScalarFn]] = None):
        self.psi1 = psi1
        d2 = psi1.diff(MU, 2)
        half = neg_half_inv_lam_pow(1)
        self.fns = {
            "rho": psi1.diff(MU, 3),
            "p": half * d2,
            "rho_eps": d2.diff(LAM) * Fraction(1, 2),
            "phi001": (half * psi1).diff(MU).diff(LAM) + h1010,
            "phi011": (neg_half_inv_lam_pow(2) * psi1).diff(MU).diff(LAM) * 3 + h1110,
        }
        for k, v in (adjust or {}).items():
            self.fns[k] = self.fns[k] + v
        self.exact = not any(f.has_log for f in self.fns.values())
        self._mu: Dict[Tuple[Number, Number], Number] = {}

    @classmethod
    def from_inputs(cls, psi1: ScalarFn, free: FreeInput, adjust=None) -> "PsiMaterial":
        """Derives H_{1,1,1,0} from the seed with its own integration."""
        h1010 = free.h_seed.get(1, ScalarFn())
        rhs = h1010.diff(LAM).shift(db=1) * Fraction(-3, 2)
        h1110 = (rhs.integrate(LAM) + free.int_consts.get((0, 2), 0)).shift(db=-2)
        return cls(psi1, h1010, h1110, adjust)

    def state(self, mu, T) -> EqState:
        mu = mu if isinstance(mu, float) else Fraction(mu)
        T = T if isinstance(T, float) else Fraction(T)
        rho = self.fns["rho"].evaluate(mu, 1 / (2 * T))
        if rho == 0:
            raise ValueError("density vanishes at this state")
        s = EqState(rho, T)
        self._mu[(s.rho, s.T)] = mu
        return s

    def mu_of(self, s: EqState):
        try:
            return self._mu[(s.rho, s.T)]
        except KeyError:
            raise KeyError("state was not created through PsiMaterial.state") from None

    def _grad(self, name, mu, lam):
        f = self.fns[name]
        return f.evaluate(mu, lam), f.diff(MU).evaluate(mu, lam), f.diff(LAM).evaluate(mu, lam)

    def point(self, s: EqState) -> MaterialPoint:
        mu = self.mu_of(s)
        lam = 1 / (2 * s.T)
        rho, rho_mu, rho_lam = self._grad("rho", mu, lam)
        if rho_mu == 0:
            raise SingularState("d rho/d mu vanishes")
        lam_T = -2 * lam ** 2
        mu_T = -rho_lam * lam_T / rho_mu

        def partials(name):
            g, g_mu, g_lam = self._grad(name, mu, lam)
            return g, g_mu / rho_mu, g_lam * lam_T + g_mu * mu_T

        p = partials("p")
        E = partials("rho_eps")
        eps = E[0] / rho
        eps_rho = E[1] / rho - E[0] / rho ** 2
        eps_T = E[2] / rho
        return MaterialPoint(*p, eps, eps_rho, eps_T, *partials("phi001"), *partials("phi011"),
                             exact=self.exact)


# ---------------------------------------------------------------------------
# bridge between the two closure paths

@dataclass
class BridgeEntry:
    state: int
    quantity: str
    status: str  # "agree", "mismatch", "degenerate", "invalid"
    detail: str = ""


@dataclass
class BridgeReport:
    entries: List[BridgeEntry]

    @property
    def passed(self) -> bool:
        return all(e.status in ("agree", "degenerate") for e in self.entries)

    def statuses(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for e in self.entries:
            out[e.status] = out.get(e.status, 0) + 1
        return out

    def mismatches(self) -> List[BridgeEntry]:
        return [e for e in self.entries if e.status == "mismatch"]


def _tensor_partial(P: ConcretePoly, var):
    if var in (MU, LAM):
        return P.diff(var)
    return P.partial(_var_index(var))


def _jacobian(P: ConcretePoly, st: TensorState):
    grads = gradient(P)
    return [[_tensor_partial(g, v).evaluate(st) for v in GRAD_VARS] for g in grads]


def _matvec(J, x):
    return [sum((a * b for a, b in zip(row, x)), Fraction(0)) for row in J]


def _eq(a, b, exact, scale: Number = 0) -> bool:
    return _close(a, b, exact, scale)


def _norm(xs) -> float:
    return max((abs(float(x)) for x in xs), default=0.0)


def bridge_check(fam: PsiFamily, free: FreeInput, states: Sequence, material: Optional[PsiMaterial] = None,
                 raise_on_fail: bool = False) -> BridgeReport:
    """Compare the second-order closure of this module with the generated
    potentials of the same psi model.

    ``states`` holds ``(mu, T, NonEqFields)`` triples, or ``(EqState,
    NonEqFields)`` pairs for states created through ``material.state``.
    """
    free = free if not free.strict else free.with_defaults(3)
    mat = material or PsiMaterial.from_inputs(fam[1], free)
    res = make_closure(fam, free, 3)
    hp = res.h_prime.expand()
    hk = res.h_prime_k.expand()
    entries: List[BridgeEntry] = []

    def record(n, qty, ok, detail=""):
        entry = BridgeEntry(n, qty, "agree" if ok else "mismatch", detail)
        entries.append(entry)
        if not ok and raise_on_fail:
            raise BridgeMismatch(qty, f"state {n}: {detail}")

    for n, item in enumerate(states):
        if isinstance(item[0], EqState):
            s, fields = item
            mu = mat.mu_of(s)
        else:
            mu, T, fields = item
            try:
                s = mat.state(mu, T)
            except ValueError as exc:
                entries.append(BridgeEntry(n, "state", "invalid", str(exc)))
                continue
        lam = 1 / (2 * s.T)
        st0 = TensorState(mu, lam)
        mp = mat.point(s)
        exact = mp.exact

        # equilibrium moments and fluxes
        F, fl = moments_at_rest(res, st0)
        want = {
            "rho": (F.F, s.rho), "pressure": (F.F_ij[0][0], mp.p), "energy": (F.G, 2 * s.rho * mp.eps),
        }
        for qty, (a, b) in want.items():
            record(n, f"equilibrium-{qty}", _eq(a, b, exact), f"{a} vs {b}")
        iso = all(F.F_ij[i][j] == (F.F_ij[0][0] if i == j else 0) for i in range(3) for j in range(3))
        record(n, "equilibrium-isotropy", iso and not any(F.F_i) and not any(F.G_i))
        flux_ok = all(
            _eq(fl[k].G_i[i], mp.phi001 if k == i else 0, exact)
            and all(fl[k].F_ij[i][j] == 0 for j in range(3))
            and _eq(fl[k].F_i[i], mp.p if k == i else 0, exact)
            for k in range(3) for i in range(3)
        )
        record(n, "equilibrium-fluxes", flux_ok, f"G^11 = {fl[0].G_i[0]} vs phi001 = {mp.phi001}")

        # h' coefficients at equilibrium against the material
        blocks = equilibrium_blocks(mp, s) if mp.p_rho != 0 else {}
        coeff = {
            "h000_mumu": res.h_prime[(0, 0, 0)].diff(MU, 2),
            "h000_mulam": res.h_prime[(0, 0, 0)].diff(MU).diff(LAM),
            "h000_lamlam": res.h_prime[(0, 0, 0)].diff(LAM, 2),
            "h010_mu": res.h_prime[(0, 1, 0)].diff(MU),
            "h010_lam": res.h_prime[(0, 1, 0)].diff(LAM),
            "h020": res.h_prime[(0, 2, 0)],
            "h200": res.h_prime[(2, 0, 0)],
            "h101": res.h_prime[(1, 0, 1)],
            "h002": res.h_prime[(0, 0, 2)],
            "phi100": res.h_prime_k[(1, 0, 0)],
            "phi100_mu": res.h_prime_k[(1, 0, 0)].diff(MU),
            "phi100_lam": res.h_prime_k[(1, 0, 0)].diff(LAM),
            "phi110": res.h_prime_k[(1, 1, 0)],
            "phi001_mu": res.h_prime_k[(0, 0, 1)].diff(MU),
            "phi001_lam": res.h_prime_k[(0, 0, 1)].diff(LAM),
        }
        for name, fn in coeff.items():
            if name in blocks:
                a = fn.evaluate(mu, lam)
                record(n, f"coefficient-{name}", _eq(a, blocks[name], exact), f"{a} vs {blocks[name]}")
        record(n, "coefficient-phi011", _eq(res.h_prime_k[(0, 1, 1)].evaluate(mu, lam), mp.phi011, exact))

        h1 = sum((w * a * b for w, a, b in zip(PAIR_WEIGHTS, _x0(mu, lam), _delta_F(fields))), Fraction(0))
        record(n, "entropy-first-order", h1 == 0, f"{h1}")

        # first order through the Hessian of h'
        J = _jacobian(hp, st0)
        try:
            dc = _derived(mp, s)
            dev = _multipliers(mp, s, fields, dc)
        except SingularState as exc:
            dm = det(_d_matrix(J))
            singular = dm == 0 if exact else abs(float(dm)) <= REL_TOL * _scale(_d_matrix(J))
            h4_zero = mp.p_rho != 0 and h4_of(mp, s) == 0
            ok = singular or h4_zero
            entries.append(BridgeEntry(n, "first-order", "degenerate" if ok else "mismatch",
                                       f"{exc}; closure Hessian singular={singular}"))
            if not ok and raise_on_fail:
                raise BridgeMismatch("first-order", str(exc))
            continue
        try:
            dx = solve(J, _delta_F(fields))
        except SingularMatrix as exc:
            record(n, "first-order", False, f"closure Hessian singular but material path regular: {exc}")
            continue
        ours = _dev_flat(dev)
        size = _norm(ours)
        bad = [GRAD_NAMES[i] for i in range(14) if not _eq(dx[i], ours[i], exact, size)]
        record(n, "multipliers", not bad, f"differ in {bad}" if bad else "")

        Fkij, Gkill = _fluxes(mp, s, fields, dc)
        dFk = [_matvec(_jacobian(hk[k], st0), dx) for k in range(3)]
        sF = _norm(x for plane in Fkij for row in plane for x in row)
        okF = all(_eq(dFk[k][4 + c], Fkij[k][i][j], exact, sF)
                  for k in range(3) for c, (i, j) in enumerate(MAT_PAIRS))
        record(n, "flux-Fkij", okF, f"F^111: {dFk[0][4]} vs {Fkij[0][0][0]}")
        sG = _norm(x for row in Gkill for x in row)
        okG = all(_eq(fl[k].G_i[i] + dFk[k][11 + i], Gkill[k][i], exact, sG) for k in range(3) for i in range(3))
        record(n, "flux-Gki", okG, f"G^11: {fl[0].G_i[0] + dFk[0][11]} vs {Gkill[0][0]}")

        dF = _delta_F(fields)
        h2_closure = sum((w * a * b for w, a, b in zip(PAIR_WEIGHTS, dx, dF)), Fraction(0)) / 2
        h2_thermo = _entropy2(fields, dc)
        record(n, "entropy-second-order", _eq(h2_closure, h2_thermo, exact), f"{h2_closure} vs {h2_thermo}")

        first, second = _entropy_flux(mp, s, fields, dc)
        x0 = _x0(mu, lam)
        ok1 = all(_eq(sum((w * a * b for w, a, b in zip(PAIR_WEIGHTS, x0, dFk[k])), Fraction(0)), first[k], exact,
                      _norm(first))
                  for k in range(3))
        record(n, "entropy-flux-first-order", ok1)
        ok2 = all(_eq(sum((w * a * b for w, a, b in zip(PAIR_WEIGHTS, dx, dFk[k])), Fraction(0)) / 2,
                      second[k], exact, _norm(second)) for k in range(3))
        record(n, "entropy-flux-second-order", ok2)

        record(n, "determinant-D", _eq(det(_d_matrix(J)), dc.D, exact), "")
        record(n, "K-consistency", _eq(dc.K, dc.K_from_beta3, exact), f"{dc.K} vs {dc.K_from_beta3}")
    return BridgeReport(entries)


GRAD_NAMES = ["mu", "mu1", "mu2", "mu3"] + [f"mu{i + 1}{j + 1}" for i, j in MAT_PAIRS] + ["lam", "lam1", "lam2", "lam3"]


def _scale(A):
    return max(abs(float(x)) for row in A for x in row) ** len(A)


def _x0(mu, lam):
    return [mu] + [Fraction(0)] * 9 + [lam] + [Fraction(0)] * 3


def _delta_F(n: NonEqFields):
    Fij = [n.Fdev[i][j] + (n.pi if i == j else 0) for i, j in MAT_PAIRS]
    return [Fraction(0)] * 4 + Fij + [Fraction(0)] + [2 * x for x in n.q]


def _dev_flat(dev: LagrangeDeviation):
    mij = dev.mu_ij()
    return [dev.d_mu, *dev.mu_i, *(mij[i][j] for i, j in MAT_PAIRS), dev.d_lam, *dev.lam_i]


def _d_matrix(J):
    # mass, energy and trace rows/columns of the Hessian
    tr = [4, 7, 9]
    return [
        [J[0][0], J[0][10], J[0][4]],
        [J[10][0], J[10][10], J[10][4]],
        [sum(J[t][0] for t in tr) / 3, sum(J[t][10] for t in tr) / 3, sum(J[t][4] for t in tr) / 3],
    ]
