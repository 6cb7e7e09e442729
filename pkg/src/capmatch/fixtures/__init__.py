"""Bundled reference tables so evaluation runs work offline.

* ``complete_results.csv``   per-model base and per-shift accuracies with
  their reference average-robustness and E.R.R. columns
* ``scatter_laion.csv`` / ``scatter_yfcc.csv``   base accuracy vs average
  robustness scatter points for the two pretraining corpora
* ``subset_matching.csv``    per-strategy match counts, accuracies, and
  utilization for the two ground-truth-labeled corpora
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled fixture CSV."""
    path = resources.files(__package__).joinpath(name)
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return Path(str(path))


COMPLETE_RESULTS = "complete_results.csv"
SCATTER_LAION = "scatter_laion.csv"
SCATTER_YFCC = "scatter_yfcc.csv"
SUBSET_MATCHING = "subset_matching.csv"
