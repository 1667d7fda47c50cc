import csv

import numpy as np
import pytest

from hvml import benchmark_results_path


@pytest.fixture(scope="session")
def benchmark_rows():
    """Rows of the bundled benchmark table as dicts with parsed floats."""
    with open(benchmark_results_path(), "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 63
    for row in rows:
        row["losses"] = np.array([float(row["l1"]), float(row["l2"]), float(row["l3"])])
        row["hv_contribution"] = float(row["hv_contribution"])
        row["normalized_contribution"] = float(row["normalized_contribution"])
        row["geometric_mean"] = float(row["geometric_mean"])
    return rows


@pytest.fixture(scope="session")
def benchmark_by_dataset(benchmark_rows):
    by_ds = {}
    for row in benchmark_rows:
        by_ds.setdefault(row["dataset"], []).append(row)
    assert len(by_ds) == 9 and all(len(v) == 7 for v in by_ds.values())
    return by_ds
