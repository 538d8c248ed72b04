"""Velocity dependence of the 14-field system.

Flattened component order, used for both moments and multipliers::

    0      F        | mu
    1..3   F_i      | mu_i
    4..9   F_ij     | mu_ij   for (i, j) in (11, 12, 13, 22, 23, 33)
    10     G        | lam
    11..13 G_i      | lam_i

Symmetric tensors are stored once.  The multiplier-moment pairing therefore
weights off-diagonal slots by 2 (``PAIR_WEIGHTS``), and the columns of the
velocity matrix already sum the (a, b) and (b, a) tensor entries.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .iso_tensor import MAT_PAIRS, ConcretePoly, TensorState, monomial_name
from .scalar_field import LAM, MU

Vec3 = Tuple[Fraction, Fraction, Fraction]
Matrix = List[List[Fraction]]

PAIR_WEIGHTS: Tuple[int, ...] = (1, 1, 1, 1, 1, 2, 2, 1, 2, 1, 1, 1, 1, 1)
# ConcretePoly variables matching the flattened order
GRAD_VARS = (
    [MU]
    + [("m", i) for i in range(3)]
    + [("M", i, j) for i, j in MAT_PAIRS]
    + [LAM]
    + [("l", i) for i in range(3)]
)
COMPONENT_NAMES = (
    ["F", "F1", "F2", "F3"]
    + [f"F{i + 1}{j + 1}" for i, j in MAT_PAIRS]
    + ["G", "G1", "G2", "G3"]
)


def _v3(v) -> Vec3:
    if len(v) != 3:
        raise ValueError("expected a 3-vector")
    return tuple(Fraction(x) for x in v)  # type: ignore[return-value]


def _sym(m) -> Tuple[Vec3, Vec3, Vec3]:
    rows = tuple(_v3(r) for r in m)
    if len(rows) != 3 or any(rows[i][j] != rows[j][i] for i in range(3) for j in range(3)):
        raise ValueError("expected a symmetric 3x3 matrix")
    return rows  # type: ignore[return-value]


def _zero3():
    return (Fraction(0),) * 3


def _zero33():
    return (_zero3(),) * 3


def _mat_from_six(six) -> Tuple[Vec3, Vec3, Vec3]:
    m = [[Fraction(0)] * 3 for _ in range(3)]
    for n, (i, j) in enumerate(MAT_PAIRS):
        m[i][j] = m[j][i] = Fraction(six[n])
    return tuple(tuple(r) for r in m)  # type: ignore[return-value]


@dataclass(frozen=True)
class MomentVec14:
    F: Fraction
    F_i: Vec3
    F_ij: Tuple[Vec3, Vec3, Vec3]
    G: Fraction
    G_i: Vec3

    def __post_init__(self):
        object.__setattr__(self, "F", Fraction(self.F))
        object.__setattr__(self, "F_i", _v3(self.F_i))
        object.__setattr__(self, "F_ij", _sym(self.F_ij))
        object.__setattr__(self, "G", Fraction(self.G))
        object.__setattr__(self, "G_i", _v3(self.G_i))

    def flat(self) -> List[Fraction]:
        return [self.F, *self.F_i, *(self.F_ij[i][j] for i, j in MAT_PAIRS), self.G, *self.G_i]

    @classmethod
    def from_flat(cls, x: Sequence) -> "MomentVec14":
        if len(x) != 14:
            raise ValueError("expected 14 components")
        return cls(x[0], x[1:4], _mat_from_six(x[4:10]), x[10], x[11:14])


@dataclass(frozen=True)
class LagrangeVec14:
    mu: Fraction
    mu_i: Vec3
    mu_ij: Tuple[Vec3, Vec3, Vec3]
    lam: Fraction
    lam_i: Vec3

    def __post_init__(self):
        object.__setattr__(self, "mu", Fraction(self.mu))
        object.__setattr__(self, "mu_i", _v3(self.mu_i))
        object.__setattr__(self, "mu_ij", _sym(self.mu_ij))
        object.__setattr__(self, "lam", Fraction(self.lam))
        object.__setattr__(self, "lam_i", _v3(self.lam_i))

    def flat(self) -> List[Fraction]:
        return [self.mu, *self.mu_i, *(self.mu_ij[i][j] for i, j in MAT_PAIRS), self.lam, *self.lam_i]

    @classmethod
    def from_flat(cls, x: Sequence) -> "LagrangeVec14":
        if len(x) != 14:
            raise ValueError("expected 14 components")
        return cls(x[0], x[1:4], _mat_from_six(x[4:10]), x[10], x[11:14])

    def to_state(self) -> TensorState:
        return TensorState(self.mu, self.lam, self.mu_i, self.mu_ij, self.lam_i)

    @classmethod
    def from_state(cls, s: TensorState) -> "LagrangeVec14":
        return cls(s.mu, s.mu_vec, s.mu_mat, s.lam, s.lam_vec)


# ---------------------------------------------------------------------------
# the velocity matrix

def x_matrix(v) -> Matrix:
    """14x14 matrix with F = X(v) F_hat in the flattened convention."""
    v = _v3(v)
    v2 = sum(x * x for x in v)
    d = lambda a, b: 1 if a == b else 0  # noqa: E731
    X = [[Fraction(0)] * 14 for _ in range(14)]
    X[0][0] = Fraction(1)
    for i in range(3):
        X[1 + i][0] = v[i]
        X[1 + i][1 + i] = Fraction(1)
    for r, (i, j) in enumerate(MAT_PAIRS):
        row = 4 + r
        X[row][0] = v[i] * v[j]
        for a in range(3):
            X[row][1 + a] = v[i] * d(j, a) + v[j] * d(i, a)
        X[row][row] = Fraction(1)
    X[10][0] = v2
    for a in range(3):
        X[10][1 + a] = 2 * v[a]
    X[10][10] = Fraction(1)
    for i in range(3):
        row = 11 + i
        X[row][0] = v2 * v[i]
        for a in range(3):
            X[row][1 + a] = v2 * d(i, a) + 2 * v[i] * v[a]
        for c, (a, b) in enumerate(MAT_PAIRS):
            w = d(i, a) * v[b] + d(i, b) * v[a]
            X[row][4 + c] = w if a == b else 2 * w
        X[row][10] = v[i]
        X[row][row] = Fraction(1)
    return X


def matmul(A: Matrix, B: Matrix) -> Matrix:
    # the velocity matrices are sparse, so only nonzero products are formed
    m = len(B[0])
    nonzero_rows = [[(j, x) for j, x in enumerate(row) if x] for row in B]
    out = []
    for row in A:
        acc = [Fraction(0)] * m
        for t, a in enumerate(row):
            if a:
                for j, b in nonzero_rows[t]:
                    acc[j] += a * b
        out.append(acc)
    return out


def identity(n: int = 14) -> Matrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def recompose_moments(hatF: MomentVec14, v) -> MomentVec14:
    """Absolute moments from their non-convective parts (tensor form)."""
    v = _v3(v)
    v2 = sum(x * x for x in v)
    F0, Fa, Fab, G0, Ga = hatF.F, hatF.F_i, hatF.F_ij, hatF.G, hatF.G_i
    F_i = [v[i] * F0 + Fa[i] for i in range(3)]
    F_ij = [[v[i] * v[j] * F0 + v[i] * Fa[j] + v[j] * Fa[i] + Fab[i][j] for j in range(3)] for i in range(3)]
    vF = sum(v[a] * Fa[a] for a in range(3))
    G = v2 * F0 + 2 * vF + G0
    G_i = [
        v2 * v[i] * F0 + v2 * Fa[i] + 2 * v[i] * vF
        + 2 * sum(v[b] * Fab[i][b] for b in range(3)) + v[i] * G0 + Ga[i]
        for i in range(3)
    ]
    return MomentVec14(F0, F_i, F_ij, G, G_i)


def velocity_from_moments(F: MomentVec14) -> Vec3:
    if F.F == 0:
        raise ZeroDivisionError("mass density is zero")
    return tuple(x / F.F for x in F.F_i)  # type: ignore[return-value]


def transform_lagrange(m: LagrangeVec14, v) -> LagrangeVec14:
    """Multipliers seen from a frame moving with velocity ``v`` (absolute to relative)."""
    v = _v3(v)
    v2 = sum(x * x for x in v)
    lv = sum(m.lam_i[i] * v[i] for i in range(3))
    M = m.mu_ij
    mu = (m.mu + sum(m.mu_i[i] * v[i] for i in range(3))
          + sum(M[i][j] * v[i] * v[j] for i in range(3) for j in range(3))
          + m.lam * v2 + lv * v2)
    mu_h = [
        m.mu_i[h] + 2 * sum(M[i][h] * v[i] for i in range(3)) + 2 * m.lam * v[h]
        + m.lam_i[h] * v2 + 2 * lv * v[h]
        for h in range(3)
    ]
    mu_hk = [[M[h][k] + m.lam_i[h] * v[k] + m.lam_i[k] * v[h] for k in range(3)] for h in range(3)]
    return LagrangeVec14(mu, mu_h, mu_hk, m.lam + lv, m.lam_i)


def transform_lagrange_flat(m: LagrangeVec14, v) -> LagrangeVec14:
    """Same map computed as the row-vector product m X(v) in flattened form."""
    X = x_matrix(v)
    row = [w * x for w, x in zip(PAIR_WEIGHTS, m.flat())]
    out = [sum((row[a] * X[a][b] for a in range(14)), Fraction(0)) / PAIR_WEIGHTS[b] for b in range(14)]
    return LagrangeVec14.from_flat(out)


def pairing(m: LagrangeVec14, F: MomentVec14) -> Fraction:
    """mu_A F^A with full tensor contraction."""
    return sum((w * a * b for w, a, b in zip(PAIR_WEIGHTS, m.flat(), F.flat())), Fraction(0))


def multiplier_velocity_derivatives(m: LagrangeVec14) -> List[List[Fraction]]:
    """d(mu_A)/dv^i of the relative-to-absolute map, expressed in the absolute
    multipliers; result[i] is a flattened 14-vector."""
    out = []
    for i in range(3):
        d_mu_h = [-2 * m.mu_ij[i][h] - (2 * m.lam if h == i else 0) for h in range(3)]
        d_mu_hk = [[-(m.lam_i[h] * (k == i)) - m.lam_i[k] * (h == i) for k in range(3)] for h in range(3)]
        vec = LagrangeVec14(-m.mu_i[i], d_mu_h, d_mu_hk, -m.lam_i[i], _zero3())
        out.append(vec.flat())
    return out


def _cubic_derivative(f0, f1, f2, f3):
    # exact first derivative at 0 of a cubic sampled at 0, 1, 2, 3
    return [(-11 * a + 18 * b - 9 * c + 2 * d) / 6 for a, b, c, d in zip(f0, f1, f2, f3)]


# ---------------------------------------------------------------------------
# verification

@dataclass
class GalileanCheck:
    label: str
    passed: bool
    detail: str = ""
    monomial: Optional[str] = None


@dataclass
class GalileanReport:
    checks: List[GalileanCheck]
    truncation: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[GalileanCheck]:
        return [c for c in self.checks if not c.passed]


def galilean_residuals(h_prime: ConcretePoly, h_prime_k: Sequence[ConcretePoly]):
    """Left-hand sides of the two Galilean conditions on the potentials.

    Returns ``(scalar, vector)`` with ``scalar[i]`` and ``vector[k][i]``.
    """
    def lhs(P: ConcretePoly, i: int) -> ConcretePoly:
        out = P.diff(MU).mul_var(("m", i))
        for h in range(3):
            dh = P.diff(("m", h))
            out = out + dh.mul_var(("M", i, h)).scale(2)
            out = out + P.diff(("M", h, i)).mul_var(("l", h)).scale(2)
        out = out + P.diff(("m", i)).mul_var(LAM).scale(2)
        out = out + P.diff(LAM).mul_var(("l", i))
        return out

    scalar = [lhs(h_prime, i) for i in range(3)]
    vector = [[lhs(h_prime_k[k], i) + (h_prime if k == i else ConcretePoly()) for i in range(3)] for k in range(3)]
    return scalar, vector


def verify_galilean(res, states: Sequence[TensorState] = (), max_order: Optional[int] = None,
                    derivative_samples: Sequence[Tuple[LagrangeVec14, Vec3]] = ()) -> GalileanReport:
    """Check both Galilean conditions on ``res.h_prime`` / ``res.h_prime_k``.

    Residual polynomials are truncated at total tensorial order
    ``res.order - 2`` (or ``max_order``) and must vanish identically; the
    truncated residuals are also evaluated at ``states``.  The multiplier
    derivative table is spot-checked at ``derivative_samples``.
    """
    trunc = res.order - 2 if max_order is None else max_order
    hp = res.h_prime.expand()
    hk = res.h_prime_k.expand()
    scalar, vector = galilean_residuals(hp, hk)
    checks: List[GalileanCheck] = []
    residuals = [(f"[{i + 1}]", scalar[i]) for i in range(3)]
    residuals += [(f"[{k + 1},{i + 1}]", vector[k][i]) for k in range(3) for i in range(3)]
    bad = None
    for comp, R in residuals:
        R = R.truncate(trunc)
        if R:
            e, c = R.first_monomial()
            kind = "scalar" if comp.count(",") == 0 else "vector"
            bad = GalileanCheck("galilean-potential", False,
                                f"{kind} component {comp}: coefficient {c.to_text()}", monomial_name(e))
            break
    checks.append(bad or GalileanCheck("galilean-potential", True, f"residuals vanish up to order {trunc}"))

    nonzero = []
    for n, st in enumerate(states):
        for comp, R in residuals:
            val = R.truncate(trunc).evaluate(st)
            if val != 0:
                nonzero.append(f"state {n} component {comp} = {val}")
                break
    if states:
        checks.append(GalileanCheck("galilean-potential-states", not nonzero,
                                    nonzero[0] if nonzero else f"{len(states)} states evaluated"))

    for n, (m_rel, vel) in enumerate(derivative_samples):
        ok, detail = check_multiplier_derivatives(m_rel, vel)
        checks.append(GalileanCheck("multiplier-derivatives", ok, f"sample {n}: {detail}"))
    return GalileanReport(checks, trunc)


def check_multiplier_derivatives(m_rel: LagrangeVec14, v) -> Tuple[bool, str]:
    """Differentiate the relative-to-absolute multiplier map in v exactly and
    compare with the closed-form derivative table."""
    v = _v3(v)
    m_abs = transform_lagrange(m_rel, [-x for x in v])
    table = multiplier_velocity_derivatives(m_abs)
    for i in range(3):
        samples = []
        for t in range(4):
            w = list(v)
            w[i] += t
            samples.append(transform_lagrange(m_rel, [-x for x in w]).flat())
        deriv = _cubic_derivative(*samples)
        if deriv != table[i]:
            diff = [n for n in range(14) if deriv[n] != table[i][n]]
            return False, f"d/dv{i + 1} mismatch in {COMPONENT_NAMES[diff[0]]}"
    return True, "derivative table matches"
