from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import platform
import socket
from datetime import datetime, timezone
from typing import Any

from loguru import logger

import nvpolar
from benchmarking.acceptance.scenarios import SCENARIOS
from nvpolar.context import get_context, set_runner_parallel
from nvpolar.dipole import OpticalSystem
from nvpolar.runners.profiler import profiler


class MetricsBuilder:

    HEADERS = [
        "started_at",
        "runner",
        "nvpolar_version",
        "env",
        "python_version",
        "seed",
        *[f"{name}_{field}" for name in SCENARIOS for field in ("s", "passed")],
    ]

    def __init__(self, runner: str, seed: int):
        self._runner = runner
        self._metrics: dict[str, Any] = {
            "started_at": datetime.now(timezone.utc).isoformat(),
            "runner": runner,
            "nvpolar_version": nvpolar.get_version(),
            "env": "github_actions" if os.getenv("GITHUB_ACTIONS") else socket.gethostname(),
            "python_version": ".".join(platform.python_version_tuple()),
            "seed": seed,
        }
        self.failures: list[str] = []

    @contextlib.contextmanager
    def collect_metrics(self, name: str):
        logger.info(f"Running acceptance scenario {name}")
        start = datetime.now()
        profile_filename = f"{name}_{self._runner}_{datetime.replace(start, microsecond=0).isoformat()}_viztracer.json"
        record: dict[str, Any] = {}
        with profiler(profile_filename):
            yield record
        walltime_s = (datetime.now() - start).total_seconds()
        outcome = record["outcome"]
        measurements = json.dumps(outcome.measurements)
        logger.info(f"Finished {name} in {walltime_s:.1f}s, passed={outcome.passed}: {measurements}")
        self._metrics[f"{name}_s"] = walltime_s
        self._metrics[f"{name}_passed"] = outcome.passed
        if not outcome.passed:
            self.failures.append(name)

    def dump_csv(self, csv_output_location: str):
        if len(self._metrics) == 0:
            logger.warning("No metrics to write!")

        with open(csv_output_location, "w", newline="") as csvfile:
            writer = csv.writer(csvfile, delimiter=",")
            writer.writerow(MetricsBuilder.HEADERS)
            writer.writerow([self._metrics.get(header, "") for header in MetricsBuilder.HEADERS])


def run_all_scenarios(skip: set[str], seed: int, csv_output_location: str | None) -> int:
    optics = OpticalSystem()
    metrics_builder = MetricsBuilder(get_context().runner_config.name, seed)

    for name, scenario in SCENARIOS.items():
        if name in skip:
            logger.warning(f"Skipping {name}")
            continue
        with metrics_builder.collect_metrics(name) as record:
            record["outcome"] = scenario(optics, seed)

    if csv_output_location:
        logger.info(f"Writing CSV to: {csv_output_location}")
        metrics_builder.dump_csv(csv_output_location)
    else:
        logger.info("No CSV location specified, skipping CSV write")

    if metrics_builder.failures:
        logger.error(f"Failed scenarios: {', '.join(metrics_builder.failures)}")
        return 1
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument(
        "--skip", type=str, default=None, help=f"Comma-separated scenarios to skip, from: {', '.join(SCENARIOS)}"
    )
    parser.add_argument("--seed", type=int, default=0, help="Base seed of every scenario")
    parser.add_argument("--threads", type=int, default=None, help="Run trials and grid cells on N processes")
    parser.add_argument("--output_csv", default=None, type=str, help="Location to output CSV file")
    args = parser.parse_args()

    if args.threads is not None:
        set_runner_parallel(args.threads)

    raise SystemExit(
        run_all_scenarios(
            skip=set(args.skip.split(",")) if args.skip is not None else set(),
            seed=args.seed,
            csv_output_location=args.output_csv,
        )
    )
