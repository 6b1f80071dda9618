#!/usr/bin/env python3
"""Desk-scale end-to-end experiment.

Simulates a batch of synthetic meals, trains the full-size network on most of
them, predicts a held-out meal, and prints the frame + segment evaluation.
Artifacts (history, predictions, reports) land in --out-dir.

Roughly 30-45 minutes on a 2-core desktop CPU with the defaults.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from eatr import dsp, io, metrics, sim, tcn, train  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="end_to_end_run")
    parser.add_argument("--meals", type=int, default=10)
    parser.add_argument("--duration-s", type=float, default=120.0)
    parser.add_argument("--base-seed", type=int, default=400)
    parser.add_argument("--epochs", type=int, default=12)
    parser.add_argument("--threads", type=int, default=2)
    args = parser.parse_args()
    if args.meals < 3:
        parser.error("need at least 3 meals (train/val/test)")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    radar = dsp.RadarConfig()
    profile = sim.PROFILES["default"]

    t0 = time.time()
    meals = []
    for i in range(args.meals):
        seed = args.base_seed + i
        script = sim.sample_meal_script(profile, args.duration_s, seed=seed)
        rd, intervals = sim.synth_rd_cube(script, radar, seed=seed)
        labels = io.intervals_to_frame_labels(intervals, rd.shape[0], radar.fps)
        meals.append(train.Meal(f"meal_{i:02d}", dsp.normalize_for_model(rd), labels))
        io.write_annotations(out_dir / f"meal_{i:02d}.ann.csv", intervals)
        segs = io.frame_labels_to_segments(labels)
        print(f"meal_{i:02d}: {rd.shape[0]} frames, "
              f"{sum(1 for s in segs if s.label == io.EATING)} eating / "
              f"{sum(1 for s in segs if s.label == io.DRINKING)} drinking gestures",
              flush=True)
    print(f"simulation: {time.time() - t0:.0f}s", flush=True)

    train_meals = meals[:-2]
    val_meals = meals[-2:-1]
    test_meal = meals[-1]

    model = tcn.build_model(tcn.ModelConfig(), seed=0)
    cfg = train.TrainConfig(epochs=args.epochs, seed=0, threads=args.threads)
    t1 = time.time()
    history = train.train(model, train_meals, val_meals, cfg)
    print(f"training: {(time.time() - t1) / 60:.1f} min", flush=True)
    train.save_checkpoint(out_dir / "model.ckpt", model)
    train.write_history_csv(out_dir / "history.csv", history)

    pred = train.predict_meal(model, test_meal.rd)
    io.write_predictions(out_dir / f"{test_meal.meal_id}.pred.csv", pred)
    report = metrics.evaluate_meal(test_meal.labels, pred)
    (out_dir / "report.txt").write_text(metrics.format_report(report))
    (out_dir / "report.csv").write_text(metrics.report_csv(report))
    print(metrics.format_report(report))
    print(f"total: {(time.time() - t0) / 60:.1f} min")
    return 0


if __name__ == "__main__":
    sys.exit(main())
