"""Sweep the angle between two directions and the common sharpness.

For each angle the script reports the largest jointly measurable sharpness and
the GHZ3 joint-measurement value at that sharpness, with the co-parties on the
equatorial settings that are optimal for the sharp problem.

Usage: python3 scripts/sharpness_sweep.py [--steps 13] [--csv sweep.csv]
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from svetjoint.measure import Setting, equal_sharpness_max, joint_povm
from svetjoint.qcore import Direction, make_ghz
from svetjoint.svetlichny import SettingsGrid, bounds, correlator_table, svetlichny_joint_value, svetlichny_value


def sweep(steps: int) -> list[dict]:
    rho = make_ghz(3)
    hybrid = bounds(3)[0]
    eq = math.pi / 2
    rest = [(Direction.from_angles(eq, 0.0), Direction.from_angles(eq, math.pi / 2))] * 2
    rows = []
    for angle in np.linspace(0.0, math.pi, steps):
        # party 1 settings symmetric about the x axis, `angle` apart
        a = Direction.from_angles(eq, -angle / 2)
        a2 = Direction.from_angles(eq, angle / 2)
        grid = SettingsGrid.projective([(a, a2), *rest])
        s = svetlichny_value(correlator_table(rho, grid)).value
        eta = equal_sharpness_max(a, a2)
        sj = svetlichny_joint_value(rho, joint_povm(Setting(a, eta), Setting(a2, eta)), grid.parties[1:])
        rows.append({"angle_deg": math.degrees(angle), "S": s, "eta_max": eta, "S_joint": sj, "hybrid": hybrid})
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description="angle/sharpness sweep for GHZ3")
    ap.add_argument("--steps", type=int, default=13)
    ap.add_argument("--csv", help="write rows to this CSV path instead of stdout")
    args = ap.parse_args()
    rows = sweep(args.steps)
    fh = open(args.csv, "w", newline="") if args.csv else sys.stdout
    w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: f"{v:.9g}" for k, v in r.items()})
    if args.csv:
        fh.close()


if __name__ == "__main__":
    main()
