import csv
import json
import logging
import math
import platform
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import django
import numpy as np
import rest_framework
import scipy

from .experiments import ExperimentRecord

logger = logging.getLogger(__name__)

RATIO_COLUMNS = ("experiment", "n", "d", "lambda", "mu", "replicates", "ratio_mean", "ratio_sd", "flag")
SWEEP_COLUMNS = ("experiment", "n", "d", "lambda", "mu", "tau", "risk_mean", "risk_sd")
CONCENTRATION_COLUMNS = ("n", "d", "stat", "median", "q90", "bound_value")
FIT_COLUMNS = ("experiment", "n", "d", "lambda", "mu", "excess_risk", "iterations", "converged", "objective")


def format_value(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def write_records(records: Iterable[ExperimentRecord], path: Path, columns: Sequence[str]) -> Path:
    """
    Write records as CSV with the given column order.

    An empty record list produces a header-only file. Record fields that
    are not columns are ignored.

    Raises:
        OSError: If the file cannot be written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for record in records:
            row = record.as_row()
            writer.writerow({column: format_value(row.get(column)) for column in columns})
            count += 1
    logger.info("wrote %d rows to %s", count, path)
    return path


def library_versions():
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "django": django.get_version(),
        "djangorestframework": rest_framework.VERSION,
    }


def write_manifest(
    path: Path,
    command: str,
    config: Mapping[str, Any],
    seed: int,
    outputs: Sequence[Path],
    wall_time_seconds: float,
    kind: str,
) -> Path:
    """
    Write the run manifest as sorted, indented JSON.

    `config` is the validated config echo, so the manifest can be passed
    back as --config to rerun the command.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "kind": kind,
        "command": command,
        "config": config,
        "seed": seed,
        "versions": library_versions(),
        "wall_time_seconds": wall_time_seconds,
        "outputs": [Path(output).name for output in outputs],
    }
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote manifest %s", path)
    return path
