import json
import math

import numpy as np
import pytest

from bergreen import ConfigError, StudyInsufficientError
from bergreen.cli import main as cli_main
from bergreen.harness import (
    ASSUMPTIONS,
    ExperimentConfig,
    convergence_study,
    run,
)


def cfg(**kw):
    base = {"experiment": "verify-identity", "seed": 7, "count": 25}
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_verify_identity_unit_disk(tmp_path):
    report = run(cfg(), tmp_path)
    assert report.passed
    max_res = max(r["residual"] for r in report.records)
    assert max_res < 1e-5
    assert (tmp_path / "identity.csv").exists()
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["schema"] == 1
    assert payload["assumptions"] == ASSUMPTIONS
    for check in payload["checks"]:
        assert "tolerance" in check and "passed" in check
    # CSV columns are documented in the report header
    assert payload["csv_columns"]["identity.csv"][:4] == ["re_z", "im_z", "re_w", "im_w"]


def test_verify_identity_weighted_and_moebius(tmp_path):
    rep = run(cfg(weight={"representation": "holo_modulus_squared",
                          "coefficients": [[2, 0], [1, 0]]}), tmp_path / "w")
    assert rep.passed
    rep2 = run(cfg(domain={"kind": "moebius_disk", "params": {"a": [0.3, 0.1], "theta": 0.5}},
                   count=10), tmp_path / "m")
    assert rep2.passed


def test_verify_identity_log_harmonic_weight(tmp_path):
    rep = run(cfg(count=15, weight={"representation": "log_harmonic",
                                    "coefficients": [[0.1, 0.0], [0.4, 0.2]]}), tmp_path)
    assert rep.passed
    assert max(r["residual"] for r in rep.records) < 1e-8


def test_verify_identity_diagonal_note(tmp_path):
    report = run(cfg(pairs=[[[0.3, 0.0], [0.3, 0.0]], [[0.2, 0.1], [0.0, -0.3]]]), tmp_path)
    assert report.passed
    assert len(report.records) == 1
    assert any("diagonal" in n for n in report.notes)


def test_verify_identity_skips_stencil_failures(tmp_path):
    # second point sits so close to the boundary that the FD stencil leaves
    # the domain; the run records the skip and continues
    report = run(cfg(pairs=[[[0.9999, 0.0], [0.2, 0.1]], [[0.2, 0.1], [0.0, -0.3]]]),
                 tmp_path)
    assert report.passed
    assert len(report.records) == 1
    assert any("skipped" in n for n in report.notes)


def test_verify_identity_rejects_annulus():
    with pytest.raises(ConfigError, match="pde-green"):
        run(cfg(domain={"kind": "annulus", "params": {"inner": 0.5, "outer": 1.0}},
                laurent=[-8, 8]))


def test_seed_mandatory_for_random_points():
    with pytest.raises(ConfigError, match="seed"):
        ExperimentConfig.from_dict({"experiment": "verify-identity"})


def test_unknown_experiment_and_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"experiment": "frobnicate", "seed": 1})
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"experiment": "kernel", "seed": 1, "spam": 2})


def test_exhaust_table(tmp_path):
    report = run(ExperimentConfig.from_dict(
        {"experiment": "exhaust", "seed": 1, "exhaust_steps": 6}), tmp_path)
    assert report.passed
    rows = (tmp_path / "exhaust.csv").read_text().strip().splitlines()[1:]
    hs = [float(r.split(",")[2]) for r in rows]
    want = [math.log(1 - 2.0 ** (-j)) for j in range(1, 7)]
    assert np.allclose(hs, want, atol=1e-12)
    assert all(a < b for a, b in zip(hs, hs[1:]))


def test_determinism_byte_identical(tmp_path):
    run(cfg(), tmp_path / "r1")
    run(cfg(), tmp_path / "r2")
    for name in ("identity.csv", "report.json"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_kernel_green_distance_experiments(tmp_path):
    for exp in ("kernel", "green", "distance"):
        report = run(ExperimentConfig.from_dict(
            {"experiment": exp, "seed": 5, "count": 12}), tmp_path / exp)
        assert report.passed, exp
        assert report.csv_files


def test_pde_green_reference_and_identity(tmp_path):
    rep = run(ExperimentConfig.from_dict({
        "experiment": "pde-green", "seed": 1, "pde_check": "reference",
        "domain": {"kind": "rectangle", "params": {"x0": 0, "x1": 1, "y0": 0, "y1": 1}},
        "grid": [128, 128]}), tmp_path / "ref")
    assert rep.passed

    rep2 = run(ExperimentConfig.from_dict({
        "experiment": "pde-green", "seed": 1, "pde_check": "identity",
        "domain": {"kind": "rectangle", "params": {"x0": 0, "x1": 1, "y0": 0, "y1": 1}},
        "grid": [64, 64], "basis_order": 24,
        "tolerances": {"grid_identity": 0.05}}), tmp_path / "id")
    assert rep2.passed


def test_pde_green_factorization(tmp_path):
    rep = run(ExperimentConfig.from_dict({
        "experiment": "pde-green", "seed": 1, "pde_check": "factorization",
        "domain": {"kind": "rectangle", "params": {"x0": 0, "x1": 1, "y0": 0, "y1": 1}},
        "weight": {"representation": "holo_modulus_squared",
                   "coefficients": [[-2, -2], [1, 0]]},
        "grid": [48, 48]}), tmp_path)
    assert rep.passed


def test_gauge_experiment_holomorphic(tmp_path):
    rep = run(ExperimentConfig.from_dict({
        "experiment": "gauge-experiment", "seed": 2,
        "weight": {"representation": "holo_modulus_squared",
                   "coefficients": [[2, 0], [1, 0]]}}), tmp_path)
    assert rep.passed
    pert = rep.tables["perturbation"]
    assert pert[0]["epsilon"] == 0.0 and pert[0]["max_identity_residual"] < 1e-8
    # rescaling the gauge visibly breaks the identity
    assert pert[-1]["max_identity_residual"] > 1e-3


def test_gauge_experiment_generic_reports_obstruction(tmp_path):
    rep = run(ExperimentConfig.from_dict({
        "experiment": "gauge-experiment", "seed": 2,
        "domain": {"kind": "rectangle", "params": {"x0": 0, "x1": 1, "y0": 0, "y1": 1}},
        "weight": {"representation": "generic_c1", "name": "exp_abs_sq"},
        "grid": [32, 32], "basis_order": 14}), tmp_path)
    assert rep.passed  # the only check is that residuals are finite
    assert any("not harmonic" in n for n in rep.notes)
    assert rep.tables["log_laplacian_residual"] == pytest.approx(4.0, abs=1e-4)
    assert all(math.isfinite(r["residual"]) for r in rep.records)


def test_convergence_study_fd_step():
    table = convergence_study(cfg(), "fd_step", [4e-3, 2e-3, 1e-3])
    assert abs(table["fitted_order"] - 2.0) <= 0.3
    errs = [r["error"] for r in table["rows"]]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_convergence_study_basis_order():
    table = convergence_study(cfg(), "basis_order", [10, 20, 30])
    errs = [r["error"] for r in table["rows"]]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_convergence_study_grid_resolution():
    table = convergence_study(cfg(), "grid_resolution", [32, 64, 128])
    assert table["fitted_order"] >= 1.5


def test_convergence_study_validation():
    with pytest.raises(StudyInsufficientError):
        convergence_study(cfg(), "fd_step", [1e-3, 1e-4])
    with pytest.raises(ConfigError):
        convergence_study(cfg(), "fd_step", [1e-3, 4e-3, 2e-3])
    with pytest.raises(ConfigError):
        convergence_study(cfg(), "warp_factor", [1, 2, 3])


def test_study_config_route(tmp_path):
    rep = run(ExperimentConfig.from_dict({
        "experiment": "verify-identity", "seed": 1,
        "study": {"parameter": "fd_step", "values": [4e-3, 2e-3, 1e-3]}}), tmp_path)
    assert rep.passed
    assert (tmp_path / "study.csv").exists()


def test_cli_exit_codes(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"experiment": "verify-identity", "seed": 7, "count": 10}))
    out = tmp_path / "out"
    assert cli_main(["verify-identity", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "report.json").exists()
    # an unachievable tolerance flips the exit code
    assert cli_main(["verify-identity", "--config", str(cfg_path), "--out",
                     str(tmp_path / "out2"), "--tol", "1e-22"]) == 1
    # config errors exit 2 before any computation
    assert cli_main(["verify-identity", "--config", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"experiment": "verify-identity"}))
    assert cli_main(["verify-identity", "--config", str(bad)]) == 2


def test_cli_overrides(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"experiment": "kernel", "seed": 3, "count": 6}))
    out = tmp_path / "o"
    assert cli_main(["kernel", "--config", str(cfg_path), "--out", str(out),
                     "--seed", "11", "--points", "8"]) == 0
    payload = json.loads((out / "report.json").read_text())
    assert payload["config"]["seed"] == 11
    assert payload["config"]["count"] == 8
