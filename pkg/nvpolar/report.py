"""JSON fit reports, CSV matrices and the text summaries printed by the CLI."""
from __future__ import annotations

import json
import math
from datetime import datetime, timezone
from typing import Any

import pandas as pd
from tabulate import tabulate

import nvpolar
from nvpolar import filesystem
from nvpolar.estimator.confidence import ConfidenceSummary
from nvpolar.estimator.fitting import FitOptions, FitResult, PairFit
from nvpolar.geometry import degeneracy_classes, rotation_family

SCHEMA_VERSION = "1.0"

FLOAT_FORMAT = "%.10g"


def meta_line(command: str, seed: int) -> str:
    return f"nvpolar {nvpolar.__version__} {command} seed={seed} generated_at={datetime.now(timezone.utc).isoformat()}"


def _pair_entry(fit: PairFit, class_id: int) -> dict[str, Any]:
    h = fit.hypothesis
    return {
        "pair": str(fit.pair),
        "class": class_id,
        "chi2": fit.chi2,
        "ratio": h.ratio,
        "background": h.background,
        "scale": h.scale,
        "theta_offset_deg": math.degrees(h.theta_offset),
        "converged": fit.converged,
        "iterations": fit.iterations,
    }


def fit_report(
    result: FitResult,
    options: FitOptions,
    input_path: str | None = None,
    meta: str | None = None,
) -> dict[str, Any]:
    """The ``fit`` command's JSON document; see docs/source/report_schema.rst"""
    class_of = {pair: cls.id for cls in degeneracy_classes() for pair in cls.members}
    class_chi2 = result.class_chi2()
    report: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "input": input_path,
        "verdict": str(result.verdict),
        "orientation_resolved": result.orientation_resolved,
        "converged": result.converged,
        "best_class": {
            "id": result.best_class.id,
            "members": sorted(str(p) for p in result.best_class.members),
        },
        "recovered_ratio": result.recovered_ratio,
        "recovered_background": result.recovered_background,
        "single_emitter": {
            "chi2": result.single_emitter.chi2,
            "background": result.single_emitter.hypothesis.background,
            "scale": result.single_emitter.hypothesis.scale,
            "theta_offset_deg": math.degrees(result.single_emitter.hypothesis.theta_offset),
            "converged": result.single_emitter.converged,
        },
        "classes": [
            {
                "id": cls.id,
                "members": sorted(str(p) for p in cls.members),
                "rotation_family": sorted(rotation_family(cls)),
                "chi2": class_chi2[cls.id],
            }
            for cls in degeneracy_classes()
        ],
        "pairs": [_pair_entry(fit, class_of[fit.pair]) for fit in result.per_pair],
        "thresholds": {
            "ratio_floor": options.ratio_floor,
            "rel_margin": options.rel_margin,
            "single_margin": options.single_margin,
            "g2_weight": options.g2_weight,
        },
    }
    if meta is not None:
        report["meta"] = meta
    return report


def write_json(path: str, payload: dict[str, Any]) -> None:
    filesystem.write_text(path, json.dumps(payload, indent=2) + "\n")


def write_frame(path: str, frame: pd.DataFrame, meta: str | None = None, index: bool = False) -> None:
    """Writes a CSV, optionally preceded by a '#' comment line"""
    with filesystem.open_for_write(path) as f:
        if meta:
            f.write(f"# {meta}\n")
        index_label = None
        if index:
            index_label = f"{frame.index.name}\\{frame.columns.name}" if frame.columns.name else frame.index.name
        frame.to_csv(
            f, index=index, index_label=index_label, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n"
        )


def write_matrix(path: str, frame: pd.DataFrame, meta: str | None = None) -> None:
    """CSV matrix whose first header cell is ``row_name\\column_name``"""
    write_frame(path, frame, meta=meta, index=True)


def fit_summary(result: FitResult) -> str:
    rows = [
        [
            cls.id,
            ", ".join(sorted(str(p) for p in cls.members)),
            result.fit_for(cls.representative).chi2,
            result.fit_for(cls.representative).hypothesis.ratio,
            result.fit_for(cls.representative).hypothesis.background,
            "*" if cls.id == result.best_class.id else "",
        ]
        for cls in degeneracy_classes()
    ]
    single = result.single_emitter
    rows.append(["-", "single emitter", single.chi2, 0.0, single.hypothesis.background, ""])
    table = tabulate(rows, headers=["class", "pairs", "chi2", "ratio", "background", "best"], floatfmt=".4g")
    return f"{table}\n\nverdict: {result.verdict}"


def confidence_summary_table(summary: ConfidenceSummary) -> str:
    ratio_extent, background_extent = summary.half_extents
    rows = [
        ["ratio", summary.mean_ratio, ratio_extent],
        ["background", summary.mean_background, background_extent],
    ]
    table = tabulate(rows, headers=["parameter", "mean", "68.3% half-extent"], floatfmt=".4g")
    return f"{table}\n\ntrials: {summary.n_trials}, 68.3% ellipse area: {summary.sigma1_area:.4g}"
