#!/usr/bin/env python3
"""Build a simulated meal dataset on disk in the CLI's file layout.

Writes <meal>.rd.eatr + <meal>.ann.csv (plus optional raw cubes) and a fold
plan, ready for `eatr train` / `eatr predict` / `eatr evaluate`.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from eatr import dsp, io, sim  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="dataset")
    parser.add_argument("--meals", type=int, default=8)
    parser.add_argument("--duration-s", type=float, default=60.0)
    parser.add_argument("--base-seed", type=int, default=0)
    parser.add_argument("--n-folds", type=int, default=4)
    parser.add_argument("--val-size", type=int, default=1)
    parser.add_argument("--keep-raw", action="store_true",
                        help="also write the (large) raw beat-signal cubes")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    radar = dsp.RadarConfig()
    profile = sim.PROFILES["default"]
    meal_ids = []
    for i in range(args.meals):
        seed = args.base_seed + i
        meal_id = f"meal_{i:02d}"
        meal_ids.append(meal_id)
        script = sim.sample_meal_script(profile, args.duration_s, seed=seed)
        if args.keep_raw:
            raw, intervals = sim.synth_raw_cube(script, radar, seed=seed)
            io.write_cube(out_dir / f"{meal_id}.raw.eatr",
                          io.make_header(io.CubeKind.RAW_COMPLEX, raw.shape, radar.fps),
                          raw)
            rd = dsp.process_meal(raw, radar)
        else:
            rd, intervals = sim.synth_rd_cube(script, radar, seed=seed)
        io.write_cube(out_dir / f"{meal_id}.rd.eatr",
                      io.make_header(io.CubeKind.RD_REAL, rd.shape, radar.fps), rd)
        io.write_annotations(out_dir / f"{meal_id}.ann.csv", intervals)
        print(f"{meal_id}: {rd.shape[0]} frames, {len(intervals)} gestures", flush=True)

    folds = io.make_folds(meal_ids, args.n_folds, args.val_size, args.base_seed)
    io.save_folds(out_dir / "folds.json", folds)
    print(f"wrote {out_dir}/folds.json ({args.n_folds} folds)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
