#!/usr/bin/env python3
"""Regenerate the shipped mixed-variable Ishigami sample dataset.

Writes data/ishigami_mv_l5_space.json and data/ishigami_mv_l5.csv: a
120-point balanced design on the Ishigami function with x1 and x3
discretized to 5 levels each. Deterministic; rerunning reproduces the files.
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mvgsa.benchfns import ISHIGAMI, discretize
from mvgsa.sampling import initial_doe
from mvgsa.space import Dataset, dataset_to_csv, points_to_arrays, space_to_json

OUT = Path(__file__).resolve().parents[1] / "data"


def main() -> None:
    fn = discretize(ISHIGAMI, (0, 2), 5)
    evaluator = fn.evaluator()
    space = evaluator.space
    doe = initial_doe(space, 120, seed=2024)
    xq, xt = points_to_arrays(doe, space)
    data = Dataset.from_arrays(space, xq, xt, evaluator.vector(xq, xt))
    OUT.mkdir(parents=True, exist_ok=True)
    space_to_json(space, OUT / "ishigami_mv_l5_space.json")
    dataset_to_csv(data, OUT / "ishigami_mv_l5.csv")
    print(f"wrote {OUT / 'ishigami_mv_l5_space.json'}")
    print(f"wrote {OUT / 'ishigami_mv_l5.csv'} ({data.n} rows)")


if __name__ == "__main__":
    main()
