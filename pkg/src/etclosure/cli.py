"""Command-line front end.

Every command writes a line-delimited JSON report: a header record echoing
the input, then one record per result, each with a ``label`` naming the rule
or check it comes from.  Rationals are written as ``"num/den"`` strings.
Exit status is 0 when every check passes, 1 on a failed check and 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from . import __version__
from .closure_gen import (
    FamilyTooShallow,
    FreeInput,
    MissingSeed,
    make_closure,
    psi_family_from_psi1,
    verify_closure,
)
from .galilean import COMPONENT_NAMES, LagrangeVec14, identity, matmul, transform_lagrange, verify_galilean, x_matrix
from .iso_tensor import TensorState
from .scalar_field import ParseError, ScalarFn, parse_scalar
from .thermo14 import (
    ConstraintViolation,
    EqState,
    NonEqFields,
    SingularState,
    SymbolicMaterial,
    bridge_check,
    derived_coeffs,
    entropy_flux_parts,
    entropy_second_order,
    first_order_multipliers,
    flux_closure_first_order,
    validate_material,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
MAX_DEN = 64


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# serialization

def _rational(x) -> str:
    if isinstance(x, float):
        return repr(x)
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return _rational(obj)
    if isinstance(obj, float):
        return repr(obj)
    if isinstance(obj, ScalarFn):
        return obj.to_text()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


class Report:
    def __init__(self):
        self.records: List[dict] = []
        self.failed = False

    def add(self, kind: str, **fields):
        rec = {"kind": kind}
        rec.update(fields)
        self.records.append(rec)

    def check(self, label: str, passed: bool, detail: str = "", **extra):
        if not passed:
            self.failed = True
        self.add("check", label=label, status="pass" if passed else "fail", detail=detail, **extra)

    def render(self) -> str:
        lines = []
        for rec in self.records:
            lines.append(json.dumps(_jsonable(rec), sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# input parsing

def _read_arg(value: str) -> str:
    """A flag value that names an existing file is read; otherwise it is
    taken literally, with ';' as a line separator."""
    path = Path(value)
    try:
        if path.is_file():
            return path.read_text()
    except OSError:
        pass
    return value.replace(";", "\n")


def _scalar(text: str, what: str) -> ScalarFn:
    try:
        return parse_scalar(text)
    except ParseError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def parse_free(text: Optional[str]) -> FreeInput:
    """``h<r> = <lambda expression>`` seeds and ``c<Q>,<R> = <rational>``
    integration constants, one per line."""
    seeds: Dict[int, ScalarFn] = {}
    consts: Dict = {}
    for n, raw in enumerate((text or "").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"free input line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key.startswith("h"):
                seeds[int(key[1:])] = _scalar(value, f"free input line {n}")
            elif key.startswith("c"):
                Q, R = (int(x) for x in key[1:].split(","))
                consts[(Q, R)] = Fraction(value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"free input line {n}: {exc}") from None
    try:
        return FreeInput(seeds, consts, strict=False)
    except ValueError as exc:
        raise ConfigError(f"free input: {exc}") from None


def _fraction(text: str, what: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{what}: not a rational number: {text!r}") from None


def parse_rows(text: str, what: str) -> List[List[Fraction]]:
    rows = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].replace(",", " ").strip()
        if line:
            rows.append([_fraction(tok, f"{what} line {n}") for tok in line.split()])
    return rows


def fields_from_row(vals: Sequence[Fraction], what: str) -> NonEqFields:
    """pi, Fdev11, Fdev12, Fdev13, Fdev22, Fdev23, q1, q2, q3 (Fdev33 follows
    from tracelessness); omitted trailing values are zero."""
    vals = list(vals) + [Fraction(0)] * (9 - len(vals))
    if len(vals) > 9:
        raise ConfigError(f"{what}: too many values")
    pi, a, b, c, d, e, *q = vals
    return NonEqFields(pi, ((a, b, c), (b, d, e), (c, e, -a - d)), q)


def _rand(rng: random.Random, lo: int = -MAX_DEN, hi: int = MAX_DEN) -> Fraction:
    return Fraction(rng.randint(lo, hi), rng.randint(1, MAX_DEN))


def _rand_positive(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(1, 4 * MAX_DEN), rng.randint(1, MAX_DEN))


def random_fields(rng: random.Random) -> NonEqFields:
    return fields_from_row([_rand(rng) for _ in range(9)], "random")


def random_tensor_state(rng: random.Random) -> TensorState:
    lam = _rand_positive(rng)
    return TensorState.from_components(_rand(rng), lam, [_rand(rng) for _ in range(12)])


# ---------------------------------------------------------------------------
# commands

def _family(args, N: int):
    if not args.psi:
        raise ConfigError("--psi is required")
    psi1 = _scalar(_read_arg(args.psi).strip(), "--psi")
    consts = [_scalar(c, "--psi-const") for c in args.psi_const or []]
    depth = max(N // 2, 1, len(consts) + 1)
    try:
        return psi_family_from_psi1(psi1, depth, consts)
    except ValueError as exc:
        raise ConfigError(f"psi family: {exc}") from None


def _closure(args, N: int):
    fam = _family(args, N)
    free = parse_free(_read_arg(args.free) if args.free else None).with_defaults(N)
    try:
        return fam, free, make_closure(fam, free, N)
    except (FamilyTooShallow, MissingSeed) as exc:
        raise ConfigError(str(exc)) from None


def table_label(p: int, q: int, r: int, s: int) -> str:
    """Rule that determines the stored coefficient H_{p,q,r,s}."""
    if p >= 2:
        return "index-shift"
    if p == 0:
        return "zero-rules" if s == 0 or r == 0 else "p0-branch"
    if s:
        return "p1-branch"
    return "free-seed" if q == 0 else "lambda-integration"


def _echo(args, keys: Iterable[str]) -> dict:
    out = {}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def cmd_generate(args, rep: Report) -> None:
    fam, free, res = _closure(args, args.order)
    rep.add("provenance", **{k: v for k, v in res.provenance.items() if k != "order"})
    for key in res.table.keys():
        rep.add("table", key=list(key), value=res.table[key].to_text(), label=table_label(*key))
    for (p, q, r), f in res.H1.items():
        rep.add("particular", key=[p, q, r], value=f.to_text(), label="particular-solution")
    for (p, q, r), f in res.h_prime.items():
        rep.add("h_prime", key=[p, q, r], value=f.to_text(), label="scalar-potential")
    for (p, q, r), f in res.h_prime_k.items():
        rep.add("h_prime_k", key=[p, q, r], value=f.to_text(), label="vector-potential")


def load_table_overrides(text: str):
    """Table records of a ``generate`` report, as {(p,q,r,s): ScalarFn}."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"table file line {n}: {exc}") from None
        if rec.get("kind") == "table":
            out[tuple(rec["key"])] = _scalar(rec["value"], f"table file line {n}")
    return out


def cmd_verify(args, rep: Report) -> None:
    fam, free, res = _closure(args, args.order)
    if args.table:
        path = Path(args.table)
        if not path.is_file():
            raise ConfigError(f"table file {args.table} does not exist")
        table = res.table
        for key, value in load_table_overrides(path.read_text()).items():
            if key not in table:
                raise ConfigError(f"table key {list(key)} is not part of an order-{args.order} table")
            table = table.with_entry(key, value)
        res = res.with_table(table)
    rng = random.Random(args.seed)
    states = [random_tensor_state(rng) for _ in range(args.samples)]
    samples = [(LagrangeVec14.from_state(random_tensor_state(rng)), [_rand(rng) for _ in range(3)])
               for _ in range(args.samples)]
    report = verify_closure(res)
    for c in report.checks:
        rep.check(c.label, c.passed, c.detail, monomial=c.monomial)
    gal = verify_galilean(res, states, derivative_samples=samples)
    for c in gal.checks:
        rep.check(c.label, c.passed, c.detail, monomial=getattr(c, "monomial", None))


def cmd_closure2(args, rep: Report) -> None:
    rng = random.Random(args.seed)
    rows = parse_rows(_read_arg(args.states), "--states") if args.states else None
    if args.psi:
        fam, free, _ = _closure(args, 3)
        if rows is None:
            rows = [[Fraction(rng.randint(1, 4 * MAX_DEN), rng.randint(1, MAX_DEN)), _rand_positive(rng)]
                    + [_rand(rng) for _ in range(9)] for _ in range(args.samples)]
        states = [(r[0], r[1], fields_from_row(r[2:], f"state {n}")) for n, r in enumerate(rows)]
        for n, (mu, T, _) in enumerate(states):
            rep.add("state", index=n, mu=mu, T=T)
        bridge = bridge_check(fam, free, states)
        for e in bridge.entries:
            rep.check(e.quantity, e.status in ("agree", "degenerate"), e.detail, state=e.state, outcome=e.status)
        return
    if not args.material:
        raise ConfigError("closure2 needs --material or --psi")
    if args.material == "ideal":
        text = "p = rho*T\nepsilon = cv*T\nphi001 = 2*(cv+1)*rho*T**2\nphi011 = -6*(cv+2)*rho*T**3\ncv = 5/2"
    else:
        path = Path(args.material)
        text = path.read_text() if path.is_file() else args.material.replace(";", "\n")
    try:
        mat = SymbolicMaterial.from_text(text)
    except (ValueError, TypeError, SyntaxError) as exc:
        raise ConfigError(f"material: {exc}") from None
    if rows is None:
        rows = [[_rand_positive(rng), _rand_positive(rng)] + [_rand(rng) for _ in range(9)]
                for _ in range(args.samples)]
    try:
        points = [(EqState(r[0], r[1]), fields_from_row(r[2:], f"state {n}")) for n, r in enumerate(rows)]
    except ValueError as exc:
        raise ConfigError(f"--states: {exc}") from None
    vr = validate_material(mat, [s for s, _ in points], raise_on_fail=False)
    for c in vr.checks:
        rep.check(c.label, c.passed, f"{_rational(c.lhs)} vs {_rational(c.rhs)}", state=c.state)
    for n, (s, f) in enumerate(points):
        try:
            dc = derived_coeffs(mat, s)
            dev = first_order_multipliers(mat, s, f)
            Fkij, Gki = flux_closure_first_order(mat, s, f)
            first, second = entropy_flux_parts(mat, s, f)
            h2nd = entropy_second_order(mat, s, f)
        except SingularState as exc:
            rep.check("singular-state", False, str(exc), state=n)
            continue
        rep.add("coefficients", state=n, rho=s.rho, T=s.T, label="derived-coefficients",
                **{k: getattr(dc, k) for k in ("h2", "h3", "h4", "K", "D", "D1", "beta1", "beta2", "beta3")})
        rep.check("K-consistency", dc.K == dc.K_from_beta3 if mp_exact(mat) else True,
                  f"{_rational(dc.K)} vs {_rational(dc.K_from_beta3)}", state=n)
        rep.add("multipliers", state=n, label="first-order-multipliers", d_mu=dev.d_mu, d_lam=dev.d_lam,
                mu_ij=dev.mu_ij(), mu_i=dev.mu_i, lam_i=dev.lam_i)
        rep.add("fluxes", state=n, label="first-order-fluxes", F_kij=Fkij, G_ki=Gki)
        rep.add("entropy", state=n, label="second-order-entropy", h2nd=h2nd,
                flux_first=first, flux_second=second)


def mp_exact(mat) -> bool:
    return getattr(mat, "exact", False)


def cmd_transform(args, rep: Report) -> None:
    if not args.velocity:
        raise ConfigError("transform needs --velocity v1,v2,v3")
    v = [_fraction(x, "--velocity") for x in args.velocity.replace(",", " ").split()]
    if len(v) != 3:
        raise ConfigError("--velocity needs three components")
    rows = parse_rows(_read_arg(args.states), "--states") if args.states else None
    if rows is None:
        rng = random.Random(args.seed)
        rows = [[_rand(rng) for _ in range(14)] for _ in range(args.samples)]
    X, Xinv = x_matrix(v), x_matrix([-x for x in v])
    rep.check("group-inverse", matmul(Xinv, X) == identity(), "X(-v) X(v) = I")
    names = ["mu", "mu1", "mu2", "mu3", "mu11", "mu12", "mu13", "mu22", "mu23", "mu33",
             "lam", "lam1", "lam2", "lam3"]
    for n, row in enumerate(rows):
        if len(row) != 14:
            raise ConfigError(f"--states line {n + 1}: expected 14 multiplier components")
        m = LagrangeVec14.from_flat(row)
        out = transform_lagrange(m, v)
        back = transform_lagrange(out, [-x for x in v])
        rep.add("transformed", state=n, label="multiplier-transformation",
                values=dict(zip(names, out.flat())))
        rep.check("round-trip", back.flat() == m.flat(), "transform by v then -v", state=n)
    rep.add("matrix", label="velocity-matrix", order=list(COMPONENT_NAMES), rows=X)


COMMANDS = {"generate": cmd_generate, "verify": cmd_verify, "closure2": cmd_closure2, "transform": cmd_transform}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="etclosure", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"etclosure {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--order", type=int, default=3, help="closure order N (>= 1)")
        sp.add_argument("--psi", help="psi_1(mu, lam) expression or file, e.g. 'mu^4*lam^-1'")
        sp.add_argument("--psi-const", action="append", help="lambda-only constant for psi_2, psi_3, ...")
        sp.add_argument("--free", help="free input: 'h1 = lam^-2; c0,2 = 1/3' or a file")
        sp.add_argument("--material", help="material file, inline 'key = value; ...' text, or 'ideal'")
        sp.add_argument("--states", help="evaluation points, one per line, or a file")
        sp.add_argument("--samples", type=int, default=5, help="number of random states when --states is absent")
        sp.add_argument("--seed", type=int, default=0, help="seed for random states")
        sp.add_argument("--table", help="generate report whose table entries replace the solved ones")
        sp.add_argument("--velocity", help="velocity 'v1,v2,v3'")
        sp.add_argument("--out", help="report path (default: stdout)")
    return ap


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    rep = Report()
    rep.add("header", tool="etclosure", version=__version__, command=args.command,
            input=_echo(args, ("order", "psi", "psi_const", "free", "material", "states",
                               "samples", "seed", "table", "velocity")))
    try:
        if args.order < 1:
            raise ConfigError("--order must be at least 1")
        COMMANDS[args.command](args, rep)
    except (ConfigError, ConstraintViolation) as exc:
        print(f"etclosure: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    failures = [r for r in rep.records if r.get("status") == "fail"]
    rep.add("summary", checks=sum(1 for r in rep.records if r["kind"] == "check"), failed=len(failures),
            status="fail" if failures else "pass")
    text = rep.render()
    if args.out:
        Path(args.out).write_text(text)
    else:
        stdout.write(text)
    for r in failures[:5]:
        where = f" at {r['monomial']}" if r.get("monomial") else ""
        print(f"etclosure: {r['label']} failed{where}: {r.get('detail', '')}", file=sys.stderr)
    return EXIT_FAIL if failures else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
