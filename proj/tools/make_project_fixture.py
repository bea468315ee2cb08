#!/usr/bin/env python3
"""Writes the project dataset test fixture.

Shape targets:
  * objective detail percentages 25, 40, 50, 7/13, 60, 75, 80, 100, 100, 100
    (first quartile 50.96 under linear interpolation)
  * 9 of 10 objectives have a mean rating that rounds to 4 or 5
  * 23 of 25 stakeholders receive a mean salience below 10/3

Usage: make_project_fixture.py OUTDIR
"""

import csv
import random
import sys
from pathlib import Path

# (features, features with specific requirements) per objective
OBJECTIVES = [(4, 1), (5, 2), (4, 2), (13, 7), (5, 3), (4, 3), (5, 4), (3, 3), (4, 4), (2, 2)]
MEDIUM_OBJECTIVE = 2  # index of the one objective that rates 'medium'
STAKEHOLDERS = [f"S{i:02d}" for i in range(1, 26)]
EXPERTS = {"S04", "S17"}  # the two stakeholders not binned 'low'


def main(out: Path) -> None:
    rng = random.Random(2010)
    out.mkdir(parents=True, exist_ok=True)

    hierarchy = []
    under = {}
    for o, (features, detailed) in enumerate(OBJECTIVES, start=1):
        oid = f"O{o:02d}"
        hierarchy.append((oid, "objective", ""))
        under[oid] = [oid]
        for f in range(1, features + 1):
            fid = f"{oid}.F{f:02d}"
            hierarchy.append((fid, "feature", oid))
            under[oid].append(fid)
            if f <= detailed:
                for s in range(1, rng.randint(1, 3) + 1):
                    sid = f"{fid}.R{s:02d}"
                    hierarchy.append((sid, "specific", fid))
                    under[oid].append(sid)

    ratings = []
    for o, oid in enumerate(sorted(under)):
        scale = (2, 3) if o == MEDIUM_OBJECTIVE else (4, 5)
        for who in STAKEHOLDERS:
            for rid in rng.sample(under[oid], k=min(2, len(under[oid]))):
                ratings.append((who, rid, rng.choice(scale)))

    recommendations = []
    for who in STAKEHOLDERS:
        scale = (6, 7, 8) if who in EXPERTS else (1, 2, 3)
        for src in rng.sample([s for s in STAKEHOLDERS if s != who], k=4):
            recommendations.append((src, who, rng.choice(scale)))

    def write(name, header, rows):
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    write("hierarchy.csv", ["id", "level", "parent"], hierarchy)
    write("ratings.csv", ["stakeholder", "requirement", "rating"], ratings)
    write("recommendations.csv", ["from", "to", "salience"], recommendations)


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit(__doc__)
    main(Path(sys.argv[1]))
