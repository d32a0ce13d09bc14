import json
import shutil
import subprocess

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmlab.cli import EXIT_DIVERGED, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from hmlab.fieldio import read_field, write_field
from hmlab.grid import ComplexField, Grid, RealField

GRID65 = ["--nx", "65", "--ny", "65", "--x0", "-0.5", "--y0", "-0.5", "--s", "0.015625"]
QUAD_GRID = ["--nx", "33", "--ny", "33", "--x0", "0.5", "--y0", "0.5", "--s", "1/32"]
ALL = "bochner,sigma-bochner,main,presub,quadform,superharm,minprin,hopf,radial"


def run(argv, out=None):
    return main(argv + (["--out", str(out)] if out is not None else []))


def load(path):
    return json.loads(path.read_text())


class TestSolve:
    def test_holomorphic_boundary(self, tmp_path):
        argv = ["solve", "--metric", "spherical", "--boundary", "holo:0,0,0.5,0", *GRID65, "--tol", "1e-8"]
        assert run(argv, tmp_path) == EXIT_OK
        h = read_field(tmp_path / "solution.hmf")
        assert np.max(np.abs(h.values - h.grid.z / 2)) < 1e-12
        summary = load(tmp_path / "solution.json")
        assert summary["converged"] and summary["residual_linf"] <= 1e-8

    def test_affine_euclidean_single_pass(self, tmp_path):
        argv = ["solve", "--metric", "euclidean", "--boundary", "affine:c=0.3,0", *GRID65]
        assert run(argv, tmp_path) == EXIT_OK
        assert load(tmp_path / "solution.json")["iterations"] <= 1

    def test_domain_guard_is_usage_error(self, tmp_path, capsys):
        argv = ["solve", "--metric", "hyperbolic", "--boundary", "holo:0,2", *GRID65]
        assert run(argv, tmp_path) == EXIT_USAGE
        err = capsys.readouterr().err
        assert "domain_guard" in err and "--boundary" in err
        assert not (tmp_path / "solution.hmf").exists()

    def test_max_iters_is_exit_2_and_keeps_best_iterate(self, tmp_path):
        argv = ["solve", "--metric", "spherical", "--boundary", "strip", *GRID65, "--max-iters", "3"]
        assert run(argv, tmp_path) == EXIT_DIVERGED
        assert not load(tmp_path / "solution.json")["converged"]
        assert (tmp_path / "solution.hmf").exists()

    def test_boundary_field(self, tmp_path):
        g = Grid.square(-0.5, -0.5, 1.0, 17)
        write_field(tmp_path / "b.hmf", ComplexField(g, g.z / 2))
        argv = ["solve", "--metric", "spherical", "--boundary-field", str(tmp_path / "b.hmf"), "--name", "s"]
        assert run(argv, tmp_path) == EXIT_OK
        assert (tmp_path / "s.hmf").exists()


class TestVerify:
    def test_quadratic_fixture(self, tmp_path):
        argv = ["verify", "--metric", "euclidean", "--map", "ehpoly:g=0,0,1;k=0,0,0.3", *QUAD_GRID,
                "--checks", "main,presub,quadform,superharm"]
        assert run(argv, tmp_path) == EXIT_OK
        summary = load(tmp_path / "verify.json")
        assert summary["passed"] and len(summary["reports"]) == 4
        assert load(tmp_path / "report_main.json")["linf"] <= 1e-10

    def test_affine_all_checks(self, tmp_path):
        argv = ["verify", "--metric", "euclidean", "--map", "affine:c=0.3,0", *QUAD_GRID, "--checks", ALL]
        assert run(argv, tmp_path) == EXIT_OK
        for rep in load(tmp_path / "verify.json")["reports"]:
            assert rep["passed"] and rep["linf"] <= 1e-10, rep["name"]

    def test_abs2_field_fails_hopf(self, tmp_path):
        g = Grid.square(-0.5, -0.5, 1.0, 33)
        write_field(tmp_path / "abs2.hmf", ComplexField(g, np.abs(g.z) ** 2 + 0j))
        argv = ["verify", "--metric", "euclidean", "--field", str(tmp_path / "abs2.hmf"), "--checks", "hopf"]
        assert run(argv, tmp_path) == EXIT_FAIL
        assert not load(tmp_path / "report_hopf.json")["passed"]

    def test_not_sense_preserving_is_failed_report(self, tmp_path):
        argv = ["verify", "--metric", "euclidean", "--map", "abs2", *QUAD_GRID, "--checks", "main"]
        assert run(argv, tmp_path) == EXIT_FAIL
        rep = load(tmp_path / "report_main.json")
        assert not rep["passed"] and "sense-preserving" in rep["note"]

    def test_csv_and_fd_route(self, tmp_path):
        argv = ["verify", "--metric", "spherical", "--map", "strip", *GRID65, "--checks", "main,bochner",
                "--route", "fd", "--csv"]
        assert run(argv, tmp_path) == EXIT_OK
        lines = (tmp_path / "report_main.csv").read_text().splitlines()
        assert lines[0] == "i,j,x,y,lhs,rhs,residual,excluded" and len(lines) > 100

    def test_solution_file_with_sidecar(self, tmp_path):
        assert run(["solve", "--metric", "spherical", "--boundary", "strip", *GRID65, "--sweep", "poisson_direct"],
                   tmp_path) == EXIT_OK
        argv = ["verify", "--metric", "spherical", "--field", str(tmp_path / "solution.hmf"),
                "--checks", "main,bochner,hopf,radial,superharm,minprin"]
        assert run(argv, tmp_path) == EXIT_OK
        rep = load(tmp_path / "report_main.json")
        tol = load(tmp_path / "solution.json")["residual_linf"]
        assert rep["tolerance_used"] == pytest.approx(25 * (0.015625**2 + tol) + 1e-10)
        assert (tmp_path / "report_minprin_4.json").exists()

    def test_hyperbolic_superharm_is_skipped(self, tmp_path):
        argv = ["verify", "--metric", "hyperbolic", "--map", "holo:0,0,0.5,0", *GRID65, "--checks", "superharm"]
        assert run(argv, tmp_path) == EXIT_OK
        assert load(tmp_path / "report_superharm.json")["extras"]["skipped"]

    def test_jobs_gives_same_reports(self, tmp_path):
        base = ["verify", "--metric", "spherical", "--map", "strip", *GRID65, "--checks", ALL]
        run(base, tmp_path / "a")
        run(base + ["--jobs", "4"], tmp_path / "b")
        assert (tmp_path / "a" / "verify.json").read_bytes() == (tmp_path / "b" / "verify.json").read_bytes()


class TestRefine:
    def test_main_on_quadratic(self, tmp_path):
        argv = ["refine", "--metric", "euclidean", "--map", "ehpoly:g=0,0,1;k=0,0,0.3", "--x0", "0.5", "--y0", "0.5",
                "--width", "1", "--spacings", "1/32,1/64,1/128", "--checks", "main"]
        assert run(argv, tmp_path) == EXIT_OK
        rows = (tmp_path / "refine.csv").read_text().splitlines()
        assert rows[0] == "spacing,check,linf" and len(rows) == 4

    def test_affine_bypass(self, tmp_path):
        argv = ["refine", "--metric", "euclidean", "--map", "affine:c=0.3,0", "--x0", "0", "--y0", "0",
                "--width", "1", "--spacings", "1/16,1/32,1/64", "--checks", "main,presub,bochner"]
        assert run(argv, tmp_path) == EXIT_OK
        assert all(c["bypassed"] for c in load(tmp_path / "refine.json")["checks"])

    def test_spherical_solver_fixture(self, tmp_path):
        argv = ["refine", "--metric", "spherical", "--boundary", "strip", "--x0", "-0.5", "--y0", "-0.5",
                "--width", "1", "--spacings", "1/16,1/32,1/64", "--checks", "error,main,bochner,hopf",
                "--sweep", "poisson_direct"]
        assert run(argv, tmp_path) == EXIT_OK
        summary = load(tmp_path / "refine.json")
        assert {c["name"] for c in summary["checks"]} >= {"error", "main", "hopf"}
        assert all(c["slope"] >= 1.9 for c in summary["checks"])
        assert all(s["residual_linf"] <= 1e-3 * s["spacing"] ** 2 for s in summary["solves"])

    def test_non_harmonic_control_fails(self, tmp_path):
        # the Hopf residual of |z|^2 stays order one, so no slope can be fitted
        argv = ["refine", "--metric", "euclidean", "--map", "abs2", "--x0", "0.5", "--y0", "0.5",
                "--width", "1", "--spacings", "1/16,1/32,1/64", "--checks", "hopf"]
        assert run(argv, tmp_path) == EXIT_FAIL

    @pytest.mark.parametrize(
        "extra",
        [
            ["--spacings", "1/32,1/64"],
            ["--spacings", "1/32,1/48,1/96"],
            ["--spacings", "1/3,1/6,1/12", "--width", "0.7"],
        ],
    )
    def test_bad_spacings(self, tmp_path, extra):
        argv = ["refine", "--metric", "euclidean", "--map", "affine:c=0.3,0", "--x0", "0", "--y0", "0",
                "--width", "1", "--checks", "main", "--spacings", "1/16,1/32,1/64"]
        argv = argv[: argv.index("--spacings")] + extra + [a for a in argv[argv.index("--spacings") + 2 :]]
        assert run(argv, tmp_path) == EXIT_USAGE

    def test_error_check_needs_boundary(self, tmp_path):
        argv = ["refine", "--metric", "euclidean", "--map", "affine:c=0.3,0", "--x0", "0", "--y0", "0",
                "--width", "1", "--spacings", "1/16,1/32,1/64", "--checks", "error"]
        assert run(argv, tmp_path) == EXIT_USAGE


class TestMetricCheck:
    @pytest.mark.parametrize(
        "metric,K", [("euclidean", 0.0), ("spherical", 2.0), ("hyperbolic", -2.0), ("radial:spherical", 2.0)]
    )
    def test_builtins(self, tmp_path, metric, K, capsys):
        assert run(["metric-check", "--metric", metric], tmp_path) == EXIT_OK
        s = load(tmp_path / "metric_check.json")
        assert s["curvature_min"] == pytest.approx(K, abs=1e-6)
        assert s["curvature_max"] == pytest.approx(K, abs=1e-6)
        assert s["samples"] == 100 and s["max_inconsistency"] <= 1e-6
        assert "K in [" in capsys.readouterr().err

    def test_tabulated_inconsistent_metric_fails(self, tmp_path):
        g = Grid.square(-1, -1, 2, 9)
        # coarse table of a bumpy density: interpolated curvature disagrees with finite differences
        write_field(tmp_path / "rho.hmf", RealField(g, 1.0 + 0.5 * np.sign(np.sin(7 * g.coords()[0]))))
        assert run(["metric-check", "--metric", f"tabulated:{tmp_path / 'rho.hmf'}"], tmp_path) == EXIT_FAIL


@pytest.fixture(scope="module")
def scratch(tmp_path_factory):
    return tmp_path_factory.mktemp("fuzz")


class TestUsage:
    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["bogus"],
            ["solve"],
            ["solve", "--metric", "nope", "--boundary", "holo:0,1", *GRID65],
            ["solve", "--metric", "spherical", "--boundary", "holo:0,1"],
            ["solve", "--metric", "spherical", "--boundary", "holo:0,1", *GRID65, "--omega", "2"],
            ["solve", "--metric", "spherical", "--boundary-field", "/no/such.hmf"],
            ["verify", "--metric", "euclidean", "--map", "holo:0,1", *GRID65, "--checks", ""],
            ["verify", "--metric", "euclidean", "--map", "holo:0,1", *GRID65, "--checks", "main,zzz"],
            ["verify", "--metric", "euclidean", "--map", "holo:0,1", *GRID65, "--checks", "main", "--crop", "5"],
            ["verify", "--metric", "euclidean", "--map", "holo:0,1", *GRID65, "--checks", "main",
             "--domain-metric", "radial:spherical"],
            ["verify", "--metric", "euclidean", "--checks", "main"],
            ["metric-check", "--metric", "spherical", "--samples", "0"],
            ["solve", "--metric", "spherical", "--boundary", "holo:0,1", "--nx", "3", "--ny", "3", "--x0", "0",
             "--y0", "0", "--s", "0.1"],
            ["solve", "--metric", "spherical", "--boundary", "holo:0,1", *GRID65[:-1], "1/0"],
        ],
    )
    def test_exit_3(self, tmp_path, argv, capsys):
        assert run(argv, tmp_path) == EXIT_USAGE
        assert capsys.readouterr().err.startswith(("hmlab:", "usage:"))

    def test_malformed_field_file(self, tmp_path):
        (tmp_path / "junk.hmf").write_text("not a field\n")
        argv = ["verify", "--metric", "euclidean", "--field", str(tmp_path / "junk.hmf"), "--checks", "main"]
        assert run(argv, tmp_path) == EXIT_USAGE

    @given(st.lists(st.sampled_from(["solve", "verify", "--metric", "spherical", "holo:0,1", "--checks", "main",
                                     "--map", "--nx", "9", "x", "--s", "-1", "--field", "1/0", "--jobs"]),
                    max_size=10))
    def test_random_argv_never_crashes(self, scratch, argv):
        assert main(argv + ["--out", str(scratch)]) in (0, 1, 2, 3)


class TestDeterminism:
    def test_verify_byte_identical(self, tmp_path):
        base = ["verify", "--metric", "spherical", "--map", "strip", *GRID65, "--checks", ALL, "--csv", "--seed", "3"]
        run(base, tmp_path / "a")
        run(base, tmp_path / "b")
        a, b = sorted((tmp_path / "a").iterdir()), sorted((tmp_path / "b").iterdir())
        assert [p.name for p in a] == [p.name for p in b]
        for pa, pb in zip(a, b):
            assert pa.read_bytes() == pb.read_bytes(), pa.name

    def test_solve_byte_identical(self, tmp_path):
        base = ["solve", "--metric", "spherical", "--boundary", "ehpoly:g=0,0.5,0;k=0,0.1,0", "--nx", "17", "--ny",
                "17", "--x0", "-0.5", "--y0", "-0.5", "--s", "1/16"]
        run(base, tmp_path / "a")
        run(base, tmp_path / "b")
        for name in ("solution.hmf", "solution.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.skipif(shutil.which("hmlab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    p = subprocess.run(["hmlab", "metric-check", "--metric", "spherical"], capture_output=True, text=True)
    assert p.returncode == 0 and json.loads(p.stdout)["passed"]
    p = subprocess.run(["hmlab", "verify"], capture_output=True, text=True)
    assert p.returncode == 3
