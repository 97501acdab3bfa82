#!/usr/bin/env python3
"""Generate and verify the frozen BlockWorld benchmark tables.

Writes src/mvgsa/data/blockworld.json and the exhaustive Pareto front
regression fixture tests/data/blockworld_front.json. The construction is
checked here, once, against its requirements:

  * exhaustive Pareto front has >= 3 members (objectives genuinely conflict);
  * direct TSI of A and C > 0.3 on both objectives, with gaps of >= 0.2 over
    B and D respectively, and TSI of B and D < 0.1;
  * designs differing only in D differ in y1 by < 20% of y1's global range;
  * evaluation is pure (bit-identical on repeat).

Rerunning the script reproduces the identical file.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mvgsa.benchfns import BlockWorld, exhaustive_pareto
from mvgsa.gsa import estimate_indices
from mvgsa.seeds import derive_rng
from mvgsa.space import enumerate_qualitative

OUT_DATA = Path(__file__).resolve().parents[1] / "src/mvgsa/data/blockworld.json"
OUT_FIXTURE = Path(__file__).resolve().parents[1] / "tests/data/blockworld_front.json"


def build() -> BlockWorld:
    # Descriptor: additive row/column structure plus a small seeded
    # interaction, minimum uniquely at (A=2, C=6) with a clear gap.
    row_a = np.array([3.5, 0.0, 5.5, 8.0])
    col_c = np.array([1.0, 4.0, 2.2, 9.0, 6.5, 0.0, 7.4, 3.0])
    rng = derive_rng(20240917, "blockworld-interaction")
    inter = rng.uniform(0.0, 0.35, size=(4, 8)).round(4)
    inter[1, 5] = 0.0
    descriptor = 4.0 + row_a[:, None] + col_c[None, :] + inter

    # B carries the trade-off: levels 1/4/7 form the within-combo sub-front.
    b1 = np.array([0.80, -0.50, -0.60, 0.00, -0.70, -0.40, 0.45])
    b2 = np.array([-0.60, -0.50, -0.40, 0.50, -0.30, -0.55, 0.28])
    # D is weak and aligned: level 1 best on both objectives.
    d1 = np.array([0.00, -0.08, -0.30, -0.15, -0.22, -0.26, -0.05, -0.12])
    d2 = np.array([0.00, -0.10, -0.28, -0.17, -0.20, -0.24, -0.06, -0.14])

    return BlockWorld(
        cardinalities=(4, 7, 8, 8),
        descriptor=descriptor,
        intercepts=(45.0, 35.0),
        slopes=(2.0, 1.5),
        b_effects=np.stack([b1, b2]),
        d_effects=np.stack([d1, d2]),
    )


def verify(bw: BlockWorld) -> dict:
    evaluator = bw.evaluator()
    space = bw.space
    xt = enumerate_qualitative(space)
    Y = evaluator.matrix(np.empty((len(xt), 0)), xt)
    Y2 = evaluator.matrix(np.empty((len(xt), 0)), xt)
    assert np.array_equal(Y, Y2), "evaluation not pure"

    archive = exhaustive_pareto(evaluator)
    front = archive.front()
    assert len(front) >= 3, f"front too small: {len(front)}"
    front_points = sorted(e.point.qualitative for e in front)
    print(f"front size {len(front)}: {front_points}")

    report = {"front": [list(p) for p in front_points]}
    for k, tag in enumerate(("y1", "y2")):
        idx = estimate_indices(evaluator.column(k), n_base=2**13, seed=11)
        tsi = dict(zip(idx.variables, idx.tsi))
        print(f"{tag}: TSI " + " ".join(f"{v}={tsi[v]:.3f}" for v in "ABCD"))
        assert tsi["A"] > 0.3 and tsi["C"] > 0.3
        assert tsi["A"] - tsi["B"] >= 0.2 and tsi["C"] - tsi["D"] >= 0.2
        assert tsi["B"] < 0.1 and tsi["D"] < 0.1
        report[f"tsi_{tag}"] = {v: float(tsi[v]) for v in "ABCD"}

    y1 = Y[:, 0]
    y1_range = y1.max() - y1.min()
    grouped = Y[:, 0].reshape(4, 7, 8, 8)
    d_spread = (grouped.max(axis=3) - grouped.min(axis=3)).max()
    assert d_spread < 0.2 * y1_range, f"D effect too large: {d_spread} vs {y1_range}"
    print(f"max D-only spread {d_spread:.3f} of y1 range {y1_range:.3f}")

    report["front_values"] = [
        list(e.values) for e in sorted(front, key=lambda e: e.point.qualitative)
    ]
    return report


def main() -> None:
    bw = build()
    report = verify(bw)
    OUT_DATA.parent.mkdir(parents=True, exist_ok=True)
    OUT_DATA.write_text(json.dumps(bw.to_dict(), indent=2) + "\n")
    OUT_FIXTURE.parent.mkdir(parents=True, exist_ok=True)
    OUT_FIXTURE.write_text(json.dumps(report, indent=2) + "\n")
    print(f"wrote {OUT_DATA}")
    print(f"wrote {OUT_FIXTURE}")


if __name__ == "__main__":
    main()
