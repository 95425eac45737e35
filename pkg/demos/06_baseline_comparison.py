"""Head-to-head: rectangle planner vs. the three baselines.

Runs all four planners at matched view counts on one scene (the same thing
`viewplan compare` does) and prints the resulting coverage table.
"""

import json
from pathlib import Path
from tempfile import TemporaryDirectory

from viewplan.cli import RunConfig, compare

with TemporaryDirectory() as tmp:
    cfg = RunConfig(scene="boxfield", extent=12.0, obstacles=2, seed=1,
                    out=str(Path(tmp) / "cmp"))
    table = compare(cfg)
    print(Path(table).read_text())
    for planner in ("avr", "zigzag", "uniform", "gvs"):
        s = json.loads((Path(tmp) / "cmp" / planner / "summary.json").read_text())
        print(f"{planner:8s} views={s['views_planned']:4d} "
              f"pass={s['pass_fraction']:.3f} mean_q={s['mean_q']:.4f} "
              f"tour={s['tour_length']:.0f} m")
