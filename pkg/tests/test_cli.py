import io
import json

import pytest

from etclosure.cli import run, table_label

PSI = "mu^4*lam^-1"


def invoke(*argv):
    out = io.StringIO()
    code = run(list(argv), stdout=out)
    return code, [json.loads(line) for line in out.getvalue().splitlines()], out.getvalue()


def test_generate_layout():
    code, recs, _ = invoke("generate", "--order", "3", "--psi", PSI)
    assert code == 0
    keys = {tuple(r["key"]) for r in recs if r["kind"] == "h_prime"}
    assert keys == {(0, 0, 0), (0, 1, 0), (2, 0, 0), (1, 0, 1), (0, 2, 0), (0, 0, 2),
                    (2, 1, 0), (1, 1, 1), (0, 3, 0), (0, 1, 2)}
    assert all("label" in r for r in recs if r["kind"] in ("table", "h_prime", "h_prime_k"))
    assert recs[0]["kind"] == "header" and recs[-1]["status"] == "pass"


def test_verify_passes_and_tamper_fails(tmp_path):
    gen = tmp_path / "gen.jsonl"
    assert run(["generate", "--order", "4", "--psi", "mu^5*lam^-3", "--free", "h1 = lam^-2",
                "--out", str(gen)]) == 0
    code, recs, _ = invoke("verify", "--order", "4", "--psi", "mu^5*lam^-3", "--free", "h1 = lam^-2",
                           "--table", str(gen))
    assert code == 0
    lines = []
    for line in gen.read_text().splitlines():
        rec = json.loads(line)
        if rec["kind"] == "table" and rec["key"] == [1, 1, 1, 1]:
            rec["value"] += " + lam^-3"
        lines.append(json.dumps(rec))
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines))
    code, recs, _ = invoke("verify", "--order", "4", "--psi", "mu^5*lam^-3", "--free", "h1 = lam^-2",
                           "--table", str(bad))
    assert code == 1
    failed = {r["label"] for r in recs if r["kind"] == "check" and r["status"] == "fail"}
    assert "trace-recursion" in failed


def test_verify_deterministic():
    a = invoke("verify", "--order", "3", "--psi", PSI, "--seed", "11")[2]
    b = invoke("verify", "--order", "3", "--psi", PSI, "--seed", "11")[2]
    assert a == b


def test_closure2_material():
    code, recs, _ = invoke("closure2", "--material", "ideal", "--states", "1 1 1 0 0 0 0 0 1 0 0")
    assert code == 0
    coeffs = next(r for r in recs if r["kind"] == "coefficients")
    assert (coeffs["h2"], coeffs["h4"], coeffs["K"], coeffs["D"]) == ("-2/15", "-7/1", "4/7", "-8/3")
    ent = next(r for r in recs if r["kind"] == "entropy")
    assert [ent["flux_first"][0], ent["flux_second"][0]] == ["1/1", "-2/7"]


def test_closure2_singular_material(tmp_path):
    mat = tmp_path / "mono.txt"
    mat.write_text("p = rho*T\nepsilon = cv*T\nphi001 = 2*(cv+1)*rho*T**2\nphi011 = -6*(cv+2)*rho*T**3\ncv = 3/2\n")
    code, recs, _ = invoke("closure2", "--material", str(mat), "--states", "1 1 1")
    assert code == 1
    assert any(r.get("label") == "singular-state" for r in recs)


def test_closure2_bridge():
    code, recs, _ = invoke("closure2", "--psi", "mu^5*lam^-3", "--free", "h1 = lam^-2", "--samples", "2")
    assert code == 0 and recs[-1]["failed"] == 0


def test_transform_zero_velocity():
    code, recs, _ = invoke("transform", "--velocity", "0,0,0", "--samples", "2")
    assert code == 0
    assert all(r["status"] == "pass" for r in recs if r["kind"] == "check")


@pytest.mark.parametrize("argv", [
    ["generate", "--order", "0", "--psi", PSI],
    ["generate", "--psi", "mu^"],
    ["generate"],
    ["verify", "--psi", PSI, "--table", "/nonexistent/file"],
    ["closure2"],
    ["closure2", "--material", "p = rho"],
    ["transform", "--velocity", "1,2"],
    ["generate", "--psi", PSI, "--free", "h2 = lam"],
])
def test_config_errors(argv, capsys):
    assert run(argv) == 2
    assert "configuration error" in capsys.readouterr().err


def test_table_labels():
    assert table_label(2, 0, 0, 0) == "index-shift"
    assert table_label(0, 1, 2, 0) == "zero-rules"
    assert table_label(0, 1, 2, 1) == "p0-branch"
    assert table_label(1, 1, 1, 0) == "lambda-integration"
    assert table_label(1, 0, 1, 0) == "free-seed"
    assert table_label(1, 0, 3, 1) == "p1-branch"
