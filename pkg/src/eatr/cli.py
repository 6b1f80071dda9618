"""Command-line entry point.

Subcommands chain the pipeline: simulate -> process -> train -> predict ->
evaluate, plus folds and render. Numeric configuration flows through one
`key = value` config file (dotted keys: radar.*, model.*, train.*, loss.*),
overridable by flags; every run writes a JSON manifest echoing the resolved
configuration so outputs can be reproduced bit-exactly.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, dsp, io, metrics, render, sim, tcn, train as training


def parse_config_file(path) -> dict:
    """`key = value` lines; '#' starts a comment. Values become int/float/bool
    when they parse as one."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise io.FormatError(f"{path}:{lineno}: expected `key = value`")
        key, text = (part.strip() for part in line.split("=", 1))
        values[key] = _parse_value(text)
    return values


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _build(cls, cfg: dict, prefix: str, **overrides):
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in cfg.items():
        section, _, name = key.partition(".")
        if section == prefix:
            if name not in names:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[name] = value
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**kwargs)


def _load_config(args) -> dict:
    return parse_config_file(args.config) if getattr(args, "config", None) else {}


def _write_manifest(path, subcommand: str, args, cfg: dict,
                    inputs: dict, outputs: dict) -> None:
    """One manifest per run, named after the primary output so runs sharing a
    directory never clobber each other's provenance."""
    doc = {
        "subcommand": subcommand,
        "toolkit_version": __version__,
        "seed": getattr(args, "seed", None),
        "inputs": inputs,
        "outputs": outputs,
        "config": cfg,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _resolved(*dcs) -> dict:
    merged = {}
    for prefix, dc in dcs:
        for key, value in dataclasses.asdict(dc).items():
            merged[f"{prefix}.{key}"] = value
    return merged


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    radar = _build(dsp.RadarConfig, cfg, "radar")
    if args.profile not in sim.PROFILES:
        raise ValueError(f"unknown profile {args.profile!r}; "
                         f"available: {', '.join(sorted(sim.PROFILES))}")
    script = sim.sample_meal_script(sim.PROFILES[args.profile], args.duration_s, args.seed)
    raw, intervals = sim.synth_raw_cube(script, radar, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw_path = out_dir / f"{args.name}.raw.eatr"
    ann_path = out_dir / f"{args.name}.ann.csv"
    script_path = out_dir / f"{args.name}.script.json"
    io.write_cube(raw_path, io.make_header(io.CubeKind.RAW_COMPLEX, raw.shape, radar.fps), raw)
    io.write_annotations(ann_path, intervals)
    script_path.write_text(json.dumps(dataclasses.asdict(script), indent=2) + "\n")
    _write_manifest(out_dir / f"{args.name}.manifest.json", "simulate", args,
                    _resolved(("radar", radar)),
                    {"profile": args.profile, "duration_s": args.duration_s},
                    {"raw": raw_path.name, "annotations": ann_path.name,
                     "script": script_path.name})
    print(f"wrote {raw_path} ({raw.shape[0]} frames), {ann_path}, {script_path}")
    return 0


def _radar_from_header(header: io.CubeHeader, cfg: dict) -> dsp.RadarConfig:
    n_frames, n_v, n_c, n_s = header.dims
    return _build(dsp.RadarConfig, cfg, "radar", n_frames=n_frames,
                  n_virtual_antennas=n_v, n_chirps=n_c, n_samples=n_s, fps=header.fps)


def cmd_process(args) -> int:
    cfg = _load_config(args)
    header, raw = io.read_cube(args.infile)
    if header.kind != io.CubeKind.RAW_COMPLEX:
        raise io.FormatError(f"{args.infile}: expected a RAW_COMPLEX cube, "
                             f"got {io.CubeKind(header.kind).name}")
    radar = _radar_from_header(header, cfg)
    rd = dsp.process_meal(raw, radar)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    io.write_cube(out_path, io.make_header(io.CubeKind.RD_REAL, rd.shape, radar.fps), rd)
    outputs = {"rd": str(out_path)}
    if args.dt:
        dt = dsp.dt_map(rd)
        io.write_cube(args.dt, io.make_header(io.CubeKind.DT_REAL, dt.shape, radar.fps), dt)
        outputs["dt"] = str(args.dt)
    _write_manifest(out_path.with_suffix(".manifest.json"), "process", args,
                    _resolved(("radar", radar)),
                    {"raw": str(args.infile)}, outputs)
    print(f"wrote {out_path} ({rd.shape[0]}x{rd.shape[1]}x{rd.shape[2]})")
    return 0


def cmd_folds(args) -> int:
    if args.meal_ids:
        meal_ids = [m.strip() for m in args.meal_ids.split(",") if m.strip()]
    elif args.n_meals:
        meal_ids = [f"meal_{i:02d}" for i in range(args.n_meals)]
    else:
        raise ValueError("pass --meal-ids or --n-meals")
    folds = io.make_folds(meal_ids, args.n_folds, args.val_size, args.seed)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    io.save_folds(out_path, folds)
    _write_manifest(out_path.with_suffix(".manifest.json"), "folds", args, {},
                    {"n_meals": len(meal_ids), "n_folds": args.n_folds,
                     "val_size": args.val_size}, {"plan": str(out_path)})
    print(f"wrote {out_path} ({args.n_folds} folds)")
    return 0


def _load_meal(data_dir: Path, meal_id: str) -> training.Meal:
    rd_path = data_dir / f"{meal_id}.rd.eatr"
    ann_path = data_dir / f"{meal_id}.ann.csv"
    header, rd = io.read_cube(rd_path)
    if header.kind != io.CubeKind.RD_REAL:
        raise io.FormatError(f"{rd_path}: expected an RD_REAL cube")
    labels = io.intervals_to_frame_labels(io.read_annotations(ann_path),
                                          rd.shape[0], header.fps)
    return training.Meal(meal_id, dsp.normalize_for_model(rd), labels)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    model_cfg = _build(tcn.ModelConfig, cfg, "model")
    train_cfg = _build(training.TrainConfig, cfg, "train", epochs=args.epochs,
                       seed=args.seed, threads=args.threads,
                       window_frames=args.window_frames,
                       learning_rate=args.learning_rate, verbose=True)
    loss_params = _build(tcn.LossParams, cfg, "loss")
    folds = io.load_folds(args.folds)
    if not 0 <= args.fold_index < len(folds):
        raise ValueError(f"fold index {args.fold_index} out of range (plan has "
                         f"{len(folds)} folds)")
    fold = folds[args.fold_index]
    data_dir = Path(args.data_dir)
    train_meals = [_load_meal(data_dir, m) for m in fold.train]
    val_meals = [_load_meal(data_dir, m) for m in fold.val]

    model = tcn.build_model(model_cfg, train_cfg.seed)
    history = training.train(model, train_meals, val_meals, train_cfg, loss_params)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "model.ckpt"
    history_path = out_dir / "history.csv"
    training.save_checkpoint(ckpt_path, model)
    training.write_history_csv(history_path, history)
    _write_manifest(out_dir / "manifest.json", "train", args,
                    _resolved(("model", model_cfg), ("train", train_cfg),
                              ("loss", loss_params)),
                    {"data_dir": str(data_dir), "folds": str(args.folds),
                     "fold_index": args.fold_index},
                    {"checkpoint": ckpt_path.name, "history": history_path.name})
    print(f"wrote {ckpt_path} (best val loss "
          f"{min(h['val_loss'] for h in history):.4f})")
    return 0


def cmd_predict(args) -> int:
    model = training.load_checkpoint(args.model)
    header, rd = io.read_cube(args.infile)
    if header.kind != io.CubeKind.RD_REAL:
        raise io.FormatError(f"{args.infile}: expected an RD_REAL cube")
    labels = training.predict_meal(model, dsp.normalize_for_model(rd))
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    io.write_predictions(out_path, labels)
    _write_manifest(out_path.with_suffix(".manifest.json"), "predict", args, {},
                    {"model": str(args.model), "rd": str(args.infile)},
                    {"predictions": str(out_path)})
    print(f"wrote {out_path} ({len(labels)} frames)")
    return 0


def cmd_evaluate(args) -> int:
    pairs = [(ann, pred, Path(ann).stem) for ann, pred in (args.pair or [])]
    if args.ann or args.pred:
        if not (args.ann and args.pred):
            raise ValueError("--ann and --pred must be given together")
        pairs.append((args.ann, args.pred, Path(args.ann).stem))
    if not pairs:
        raise ValueError("nothing to evaluate; pass --ann/--pred or --pair")
    ks = tuple(float(k) for k in args.ks.split(",")) if args.ks else metrics.DEFAULT_THRESHOLDS

    reports = []
    for ann_path, pred_path, meal_id in pairs:
        pred = io.read_predictions(pred_path)
        gt = io.intervals_to_frame_labels(io.read_annotations(ann_path),
                                          len(pred), args.fps)
        reports.append((meal_id, metrics.evaluate_meal(gt, pred, ks)))

    overall = metrics.merge_reports([r for _, r in reports])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(metrics.format_report(overall))
    (out_dir / "report.csv").write_text(metrics.report_csv(overall))
    per_meal = ["meal,k,class,tp,fp,fn,f1"]
    ranked = sorted(reports, key=lambda r: r[1].seg_f1(min(ks), io.EATING), reverse=True)
    for meal_id, rep in ranked:
        for k in ks:
            out = rep.outcomes[k]
            for c in metrics.GESTURE_CLASSES:
                per_meal.append(f"{meal_id},{k:g},{io.CLASS_NAMES[c]},{out.tp[c]},"
                                f"{out.fp[c]},{out.fn[c]},{metrics.segmental_f1(out, c):.6f}")
    (out_dir / "per_meal.csv").write_text("\n".join(per_meal) + "\n")
    _write_manifest(out_dir / "manifest.json", "evaluate", args,
                    {"ks": list(ks), "fps": args.fps},
                    {"pairs": [[a, p] for a, p, _ in pairs]},
                    {"report": "report.txt", "csv": "report.csv",
                     "per_meal": "per_meal.csv"})
    sys.stdout.write(metrics.format_report(overall))
    return 0


def cmd_render(args) -> int:
    header, payload = io.read_cube(args.infile)
    if header.kind == io.CubeKind.DT_REAL:
        if args.frame is not None:
            raise ValueError("--frame does not apply to a DT map cube")
        frame = payload
    elif header.kind == io.CubeKind.RD_REAL:
        if args.dtmap:
            frame = dsp.dt_map(payload)
        elif args.frame is not None:
            if not 0 <= args.frame < payload.shape[0]:
                raise ValueError(f"frame {args.frame} out of range 0..{payload.shape[0] - 1}")
            frame = payload[args.frame]
        else:
            raise ValueError("pass --frame INDEX or --dtmap for an RD cube")
    else:
        raise io.FormatError("render expects an RD_REAL or DT_REAL cube")
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if out_path.suffix == ".pgm":
        render.save_pgm16(out_path, frame)
    elif out_path.suffix == ".csv":
        render.save_frame_csv(out_path, frame)
    else:
        raise ValueError(f"unsupported render format {out_path.suffix!r} (use .pgm or .csv)")
    _write_manifest(out_path.with_suffix(".manifest.json"), "render", args, {},
                    {"cube": str(args.infile), "frame": args.frame,
                     "dtmap": bool(args.dtmap)}, {"image": str(out_path)})
    print(f"wrote {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eatr",
                                     description="FMCW radar eating/drinking gesture toolkit")
    parser.add_argument("--version", action="version", version=f"eatr {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="synthesize a meal: raw cube + annotations")
    p.add_argument("--profile", default="default")
    p.add_argument("--duration-s", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--name", default="meal")
    p.add_argument("--config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", help="raw cube -> cropped range-Doppler cube")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dt", help="also write the Doppler-time map cube here")
    p.add_argument("--config")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("folds", help="build a meal-level cross-validation plan")
    p.add_argument("--meal-ids", help="comma-separated ids")
    p.add_argument("--n-meals", type=int)
    p.add_argument("--n-folds", type=int, required=True)
    p.add_argument("--val-size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_folds)

    p = sub.add_parser("train", help="train the network on one fold")
    p.add_argument("--data-dir", required=True,
                   help="directory with <meal>.rd.eatr and <meal>.ann.csv")
    p.add_argument("--folds", required=True)
    p.add_argument("--fold-index", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--window-frames", type=int)
    p.add_argument("--learning-rate", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label every frame of a processed meal")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="frame + segment metrics from predictions")
    p.add_argument("--ann")
    p.add_argument("--pred")
    p.add_argument("--pair", nargs=2, action="append", metavar=("ANN", "PRED"))
    p.add_argument("--fps", type=float, default=25.0)
    p.add_argument("--ks", help="comma-separated IoU thresholds (default 0.1,0.25,0.5)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("render", help="export an RD frame or DT map as PGM/CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--frame", type=int)
    p.add_argument("--dtmap", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (io.FormatError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
