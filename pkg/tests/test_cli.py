from __future__ import annotations

import json

import pandas as pd
import pytest

from nvpolar import cli
from nvpolar.cli import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, build_parser, run, suffixed
from nvpolar.errors import ConvergenceError, InputValidationError

FAST = ["--set", "quadrature_points=16"]


@pytest.fixture(scope="module")
def simulated(tmp_path_factory) -> str:
    path = str(tmp_path_factory.mktemp("cli") / "sweep.csv")
    assert run(["simulate", "--out", path, "--seed", "0", *FAST]) == EXIT_OK
    return path


def _read(path: str, **kwargs) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", **kwargs)


def test_simulate_writes_a_sweep(simulated) -> None:
    with open(simulated) as f:
        first = f.readline()
    assert first.startswith("# nvpolar ")
    assert "seed=0" in first
    frame = _read(simulated)
    assert list(frame.columns) == ["angle_deg", "intensity", "g2", "g2_err"]
    assert len(frame) == 19


def test_simulate_then_fit(simulated, tmp_path) -> None:
    report_path = str(tmp_path / "report.json")
    code = run(["fit", simulated, "--out", report_path, *FAST])
    with open(report_path) as f:
        report = json.load(f)
    assert code == (EXIT_OK if report["converged"] else EXIT_NUMERICAL)
    assert report["schema_version"] == "1.0"
    assert report["verdict"] == "TwoEmitters"
    assert report["best_class"]["id"] == 1
    assert report["best_class"]["members"] == ["a&c", "a&d", "b&c", "b&d"]
    assert report["recovered_ratio"] == pytest.approx(0.4, abs=0.02)
    assert len(report["pairs"]) == 10
    assert [c["id"] for c in report["classes"]] == [0, 1, 2]
    assert report["input"] == simulated


def test_fit_report_to_stdout(simulated, capsys) -> None:
    run(["fit", simulated, "--no-meta", *FAST])
    captured = capsys.readouterr()
    report = json.loads(captured.out)
    assert "meta" not in report
    assert "verdict: TwoEmitters" in captured.err


def test_fit_curves_and_landscape(simulated, tmp_path) -> None:
    curves = str(tmp_path / "curves.csv")
    landscape = str(tmp_path / "landscape.csv")
    run(
        [
            "fit",
            simulated,
            "--out",
            str(tmp_path / "report.json"),
            "--curves",
            curves,
            "--landscape",
            landscape,
            "--set",
            "map_ratios=[0.3,0.4,0.5]",
            "--set",
            "map_backgrounds=[0.0,0.05]",
            *FAST,
        ]
    )
    assert list(_read(curves).columns) == [
        "angle_deg",
        "intensity",
        "g2",
        "model_intensity",
        "model_g2",
        "single_intensity",
        "single_g2",
    ]
    matrix = _read(landscape, index_col=0)
    assert matrix.index.name == "ratio\\background"
    assert matrix.shape == (3, 2)


def test_bad_header_exits_with_input_error(tmp_path) -> None:
    bad = tmp_path / "bad.csv"
    bad.write_text("angle,intensity,g2,g2_err\n0,1,0.3,\n")
    out = tmp_path / "report.json"
    assert run(["fit", str(bad), "--out", str(out)]) == EXIT_INPUT
    assert not out.exists()


def test_missing_input(tmp_path) -> None:
    assert run(["fit", str(tmp_path / "absent.csv")]) == EXIT_INPUT


def test_unknown_override_key(tmp_path) -> None:
    assert run(["simulate", "--out", str(tmp_path / "s.csv"), "--set", "ratoi=0.3"]) == EXIT_INPUT


def test_no_meta_output_is_reproducible(tmp_path) -> None:
    first, second = str(tmp_path / "first.csv"), str(tmp_path / "second.csv")
    for path in (first, second):
        assert run(["simulate", "--out", path, "--seed", "42", "--no-meta", *FAST]) == EXIT_OK
    with open(first, "rb") as f, open(second, "rb") as g:
        assert f.read() == g.read()


def test_noiseless_simulation(tmp_path) -> None:
    path = str(tmp_path / "noiseless.csv")
    assert run(["simulate", "--out", path, "--noiseless", "--no-meta", *FAST]) == EXIT_OK
    frame = _read(path)
    assert frame["g2"].between(0.0, 1.0).all()


def test_orientation_curves(tmp_path) -> None:
    path = str(tmp_path / "curves.csv")
    assert run(["simulate", "--out", path, "--orientation-curves", "--beta", "30", *FAST]) == EXIT_OK
    frame = _read(path)
    assert len(frame.columns) == 13
    assert frame["a_total"].to_numpy() == pytest.approx((frame["a_dipole1"] + frame["a_dipole2"]).to_numpy())


def test_g2_map(tmp_path) -> None:
    path = str(tmp_path / "map.csv")
    assert run(["g2-map", "--out", path, "--grid", "11x11", "--emitters", "2"]) == EXIT_OK
    matrix = _read(path, index_col=0)
    assert matrix.shape == (11, 11)
    assert matrix.index.name == "npgamma_over_p1\\p2_over_p1"
    assert matrix.iloc[0, -1] == pytest.approx(0.5)
    contour = _read(suffixed(path, "contour"))
    assert list(contour.columns) == ["p2_over_p1", "npgamma_over_p1"]


def test_three_emitter_map(tmp_path) -> None:
    path = str(tmp_path / "map3.csv")
    assert run(["g2-map", "--out", path, "--set", "emitters=3", "--set", "grid=5x5"]) == EXIT_OK
    matrix = _read(path, index_col=0)
    assert matrix.iloc[-1, -1] == pytest.approx(2.0 / 3.0)


def test_bad_grid_argument() -> None:
    with pytest.raises(InputValidationError, match="grid sizes must be at least 2"):
        build_parser().parse_args(["g2-map", "--out", "x.csv", "--grid", "1x5"])
    assert run(["g2-map", "--out", "x.csv", "--grid", "1x5"]) == EXIT_INPUT


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        [],
        ["fit"],
        ["g2-map", "--grid", "1x1", "--out", "x.csv"],
        ["g2-map", "--emitters", "4", "--out", "x.csv"],
        ["simulate"],
        ["simulate", "--out", "x.csv", "--seed", "many"],
    ],
)
def test_usage_errors_exit_with_input_code(argv, tmp_path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    assert run(argv) == EXIT_INPUT
    assert not (tmp_path / "x.csv").exists()


def test_failed_fit_exits_with_numerical_code(simulated, tmp_path, monkeypatch) -> None:
    def fail(*args, **kwargs):
        raise ConvergenceError("Fit of a&c found no finite chi2 from 4 seeds")

    monkeypatch.setattr(cli, "fit_all", fail)
    out = tmp_path / "report.json"
    assert run(["fit", simulated, "--out", str(out), *FAST]) == EXIT_NUMERICAL
    assert not out.exists()


def test_odmr(tmp_path) -> None:
    path = str(tmp_path / "odmr.csv")
    assert run(["odmr", "--out", path, "--no-meta", "--set", 'orientations=["a","a","c"]']) == EXIT_OK
    frame = _read(path)
    assert list(frame.columns) == ["frequency_ghz", "normalized_pl"]
    assert len(frame) == 1201
    assert frame["normalized_pl"].min() < 1.0


def test_noisy_odmr_depends_on_seed(tmp_path) -> None:
    paths = [str(tmp_path / f"odmr_{seed}.csv") for seed in (1, 2)]
    for seed, path in zip((1, 2), paths):
        assert run(["odmr", "--out", path, "--no-meta", "--seed", str(seed), "--set", "photons_per_point=1000"]) == 0
    assert not _read(paths[0]).equals(_read(paths[1]))


def test_confidence(tmp_path) -> None:
    trials = str(tmp_path / "trials.csv")
    summary = str(tmp_path / "summary.json")
    code = run(["confidence", "--out", trials, "--summary", summary, "--set", "n_trials=3", *FAST])
    assert code == EXIT_OK
    assert len(_read(trials)) == 3
    with open(summary) as f:
        payload = json.load(f)
    assert payload["schema_version"] == "1.0"
    assert payload["n_trials"] == 3
    assert len(payload["covariance"]) == 2


def test_minimum_time_map(tmp_path) -> None:
    path = str(tmp_path / "tmin.csv")
    code = run(
        [
            "confidence",
            "--min-time",
            "--out",
            path,
            "--set",
            "map_ratios=[0.5]",
            "--set",
            "map_backgrounds=[0.0]",
            "--set",
            "n_trials=2",
            "--set",
            "target_uncertainty=0.2",
            *FAST,
        ]
    )
    assert code == EXIT_OK
    matrix = _read(path, index_col=0)
    assert matrix.index.name == "background\\ratio"
    assert matrix.shape == (1, 1)


def test_sweep_map(tmp_path) -> None:
    prefix = str(tmp_path / "errors.csv")
    code = run(
        ["sweep-map", "--out", prefix, "--set", "map_ratios=[0.4]", "--set", "map_backgrounds=[0.0,0.1]", *FAST]
    )
    assert code == EXIT_OK
    for key in ("ratio_error", "background_error", "chi2"):
        assert _read(suffixed(prefix, key), index_col=0).shape == (1, 2)


def test_suffixed() -> None:
    assert suffixed("out/map.csv", "contour") == "out/map_contour.csv"
    assert suffixed("errors", "chi2") == "errors_chi2.csv"
