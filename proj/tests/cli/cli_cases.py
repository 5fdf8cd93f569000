"""Command-line checks, one case per ctest entry.

Usage: cli_cases.py WFR_EXECUTABLE DATA_DIR CASE
"""
import json
import math
import os
import subprocess
import sys
import tempfile
from pathlib import Path

WFR = DATA = None


def run(*args, env=None):
    full_env = dict(os.environ)
    full_env.update(env or {})
    return subprocess.run([WFR, *map(str, args)], capture_output=True, text=True, env=full_env)


def expect(cond, msg):
    if not cond:
        raise AssertionError(msg)


def ok(*args, **kw):
    p = run(*args, **kw)
    expect(p.returncode == 0, f"{args}: exit {p.returncode}\n{p.stderr}")
    return p


def case_dirac_quarter_turn():
    out = json.loads(ok("dirac", "--k0", 1, "--k1", 1, "--xi", 1.5707963).stdout)
    expect(abs(out["d2"] - (8 - 4 * math.sqrt(2))) < 1e-6, out)
    expect(out["strategy"] == "transport", out)


def case_dirac_stationary():
    out = json.loads(ok("dirac", "--k0", 1, "--k1", 1, "--xi", 4.0).stdout)
    expect(out["d2"] == 8 or abs(out["d2"] - 8) < 1e-12, out)
    expect(out["strategy"] == "stationary", out)


def case_dirac_critical():
    out = json.loads(ok("dirac", "--k0", 1, "--k1", 1, "--xi", 3.14159265).stdout)
    expect(out["strategy"] == "mixed", out)


def case_dirac_negative_charge():
    expect(run("dirac", "--k0", -1, "--k1", 1, "--xi", 1).returncode == 1, "negative charge accepted")


def case_distance_same():
    p = ok("distance", "--rho0", DATA / "blob1.json", "--rho1", DATA / "blob1.json", "--options",
           DATA / "solver_small.json")
    expect(float(p.stdout) < 1e-3, p.stdout)


def case_distance_to_zero():
    with tempfile.TemporaryDirectory() as tmp:
        report = Path(tmp) / "report.json"
        p = ok("distance", "--rho0", DATA / "blob1.json", "--rho1", DATA / "zero.json", "--report", report)
        d = float(p.stdout)
        expect(abs(d - 2.0) / 2.0 < 0.025, f"d = {d}")
        rep = json.loads(report.read_text())
        expect(abs(rep["d2"] - d * d) < 1e-12, rep)
        expect(rep["iterations"] <= 10000, rep)


def case_distance_emit_path():
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "path"
        ok("distance", "--rho0", DATA / "atom.json", "--rho1", DATA / "blob1.json", "--nt", 8, "--max-iter", 500,
           "--emit-path", out, "--reparametrize")
        frames = sorted(out.glob("frame_*.json"))
        expect(len(frames) == 9, f"{len(frames)} frames")
        index = json.loads((out / "index.json").read_text())
        expect([f["file"] for f in index["frames"]] == [f.name for f in frames], index["frames"])
        expect(len(index["step_energy"]) == 8, index)


def case_distance_strict():
    p = run("distance", "--rho0", DATA / "blob1.json", "--rho1", DATA / "zero.json", "--max-iter", 20, "--strict")
    expect(p.returncode == 2, f"exit {p.returncode}")


def case_distance_threads():
    args = ("distance", "--rho0", DATA / "atom.json", "--rho1", DATA / "blob1.json", "--options",
            DATA / "solver_small.json")
    one = ok(*args, env={"WFR_THREADS": "1"}).stdout
    four = ok(*args, env={"WFR_THREADS": "4"}).stdout
    expect(one == four, f"{one} != {four}")


def case_geodesic():
    with tempfile.TemporaryDirectory() as tmp:
        csv = Path(tmp) / "traj.csv"
        out = json.loads(ok("geodesic", "--k0", 0.5, "--k1", 2, "--xi", 2.0, "--out", csv).stdout)
        expect(out["max_error"] < 1e-8, out)
        expect(abs(out["particle_energy"] - out["closed_form_energy"]) < 1e-6, out)
        lines = csv.read_text().splitlines()
        expect(lines[0] == "t,particle_id,x,k", lines[0])
        expect(len(lines) == out["samples"] + 1, len(lines))


def case_flow():
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp) / "a.csv", Path(tmp) / "b.csv"
        args = ["flow", "--m", DATA / "resource.json", "--rho0", DATA / "population.json", "--t-end", 1.0,
                "--sample-every", 50, "--seed", 11, "--trials", 50]
        out = json.loads(ok(*args, "--out", a).stdout)
        ok(*args, "--out", b)
        expect(a.read_bytes() == b.read_bytes(), "flow trace differs between runs")
        expect(a.read_text().splitlines()[0] == "t,entropy,dissipation,mass,l2_error,min_rho", "header")
        expect(out["bound_holds"], out)
        expect(out["fitted_rate"] >= out["phi_c0"], out)


def case_flow_unstable_dt():
    p = run("flow", "--m", DATA / "resource.json", "--rho0", DATA / "population.json", "--dt", 0.1)
    expect(p.returncode == 1, f"exit {p.returncode}")


def case_hessian():
    for energy in ("quadratic", "cubic", "entropy"):
        out = json.loads(ok("hessian", "--rho", DATA / "hessian_rho.json", "--u", DATA / "hessian_u.json",
                            "--energy", energy).stdout)
        expect(out["rel_err"] < 0.03, (energy, out))


def case_beckner():
    args = ("beckner", "--n", 32, "--trials", 50, "--validate", 50, "--seed", 5)
    first = ok(*args).stdout
    expect(first == ok(*args).stdout, "certificate differs between runs")
    cert = json.loads(first)
    expect(cert["validation"]["ok"] and cert["C_Omega"] > 0, cert)
    expect(run("beckner", "--n", 32).returncode == 1, "beckner ran without a seed")


def case_verify_none():
    p = ok("verify", "--suite", "none")
    expect("0/0" in p.stdout, p.stdout)


def case_verify_closed_form():
    with tempfile.TemporaryDirectory() as tmp:
        report = Path(tmp) / "r.xml"
        ok("verify", "--suite", "closed_form", "--report", report)
        expect("<testsuites" in report.read_text(), "no JUnit report")


def case_verify_needs_seed():
    expect(run("verify", "--suite", "all", "--fast").returncode == 1, "randomised suites ran without a seed")
    expect(run("verify", "--suite", "no_such_suite").returncode == 1, "unknown suite accepted")


def case_config_file():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "run.toml"
        cfg.write_text("[dirac]\nk0 = 1\nk1 = 1\nxi = 4.0\n")
        out = json.loads(ok("--config", cfg, "dirac").stdout)
        expect(out["strategy"] == "stationary", out)
        cfg.write_text("[dirac]\nk0 = 1\nk1 = 1\nxi = 4.0\ncolour = 2\n")
        expect(run("--config", cfg, "dirac").returncode == 1, "unknown config key accepted")


def main():
    global WFR, DATA
    WFR, DATA, name = sys.argv[1], Path(sys.argv[2]), sys.argv[3]
    globals()["case_" + name]()
    print(f"{name}: ok")


if __name__ == "__main__":
    main()
