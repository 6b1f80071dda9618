import json
import subprocess
import sys

import numpy as np
import pytest

from eatr import cli, dsp, io, render
from eatr.cli import main

# small radar keeps raw cubes tiny; mirrors the config-file interface
TINY_RADAR_CFG = """\
# desk-scale radar
radar.n_chirps = 32
radar.n_samples = 16
radar.range_resolution = 0.08
radar.velocity_resolution = 0.16
radar.crop_doppler = 16
radar.crop_range = 8
"""

TINY_MODEL_CFG = """\
model.n_layers = 4
model.n_variant = 3
model.n_kernels = 4
model.input_range = 8
model.input_doppler = 16
train.window_frames = 128
"""


@pytest.fixture()
def cfg_file(tmp_path):
    path = tmp_path / "radar.cfg"
    path.write_text(TINY_RADAR_CFG)
    return str(path)


def simulate(tmp_path, cfg_file, name="meal_00", seed=3, duration=6.0):
    out = tmp_path / "data"
    rc = main(["simulate", "--profile", "default", "--duration-s", str(duration),
               "--seed", str(seed), "--out-dir", str(out), "--name", name,
               "--config", cfg_file])
    assert rc == 0
    return out


class TestConfigFile:
    def test_parse_types(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("a.x = 3\nb.y = 2.5  # comment\nc.z = true\nd.w = hello\n\n")
        assert cli.parse_config_file(path) == {"a.x": 3, "b.y": 2.5, "c.z": True,
                                               "d.w": "hello"}

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("just words\n")
        with pytest.raises(io.FormatError):
            cli.parse_config_file(path)

    def test_unknown_key_rejected(self, tmp_path, cfg_file):
        path = tmp_path / "bad.cfg"
        path.write_text("radar.bogus = 1\n")
        rc = main(["simulate", "--duration-s", "1", "--out-dir", str(tmp_path),
                   "--config", str(path)])
        assert rc == 2


class TestSimulate:
    def test_writes_cube_annotations_script_manifest(self, tmp_path, cfg_file):
        out = simulate(tmp_path, cfg_file, duration=6.0)
        header, raw = io.read_cube(out / "meal_00.raw.eatr")
        assert header.kind == io.CubeKind.RAW_COMPLEX
        assert header.dims == (150, 4, 32, 16)  # 6 s * 25 fps
        assert (out / "meal_00.ann.csv").exists()
        assert json.loads((out / "meal_00.script.json").read_text())["duration_s"] == 6.0
        manifest = json.loads((out / "meal_00.manifest.json").read_text())
        assert manifest["subcommand"] == "simulate"
        assert manifest["config"]["radar.n_chirps"] == 32

    def test_same_flags_identical_files(self, tmp_path, cfg_file):
        a = simulate(tmp_path / "a", cfg_file)
        b = simulate(tmp_path / "b", cfg_file)
        assert (a / "meal_00.raw.eatr").read_bytes() == (b / "meal_00.raw.eatr").read_bytes()
        assert (a / "meal_00.ann.csv").read_text() == (b / "meal_00.ann.csv").read_text()

    def test_unknown_profile_exits_2(self, tmp_path):
        rc = main(["simulate", "--profile", "nope", "--duration-s", "1",
                   "--out-dir", str(tmp_path)])
        assert rc == 2

    def test_default_radar_frame_count(self, tmp_path):
        # frames = duration * fps at the stock 25 fps configuration
        rc = main(["simulate", "--duration-s", "4", "--seed", "1",
                   "--out-dir", str(tmp_path), "--name", "m"])
        assert rc == 0
        header, _ = io.read_cube(tmp_path / "m.raw.eatr")
        assert header.dims == (100, 4, 128, 128)
        assert header.fps == 25.0


class TestProcess:
    def test_raw_to_rd_shape(self, tmp_path, cfg_file):
        out = simulate(tmp_path, cfg_file)
        rc = main(["process", "--in", str(out / "meal_00.raw.eatr"),
                   "--out", str(out / "meal_00.rd.eatr"),
                   "--dt", str(out / "meal_00.dt.eatr"), "--config", cfg_file])
        assert rc == 0
        header, rd = io.read_cube(out / "meal_00.rd.eatr")
        assert header.kind == io.CubeKind.RD_REAL
        assert header.dims == (150, 16, 8)
        dt_header, dt = io.read_cube(out / "meal_00.dt.eatr")
        assert dt_header.kind == io.CubeKind.DT_REAL
        assert dt_header.dims == (150, 16)
        assert np.allclose(dt, dsp.dt_map(rd))
        # each run keeps its own provenance, even in a shared directory
        assert (out / "meal_00.manifest.json").exists()
        assert (out / "meal_00.rd.manifest.json").exists()

    def test_wrong_kind_exits_2(self, tmp_path, cfg_file, capsys):
        out = simulate(tmp_path, cfg_file)
        main(["process", "--in", str(out / "meal_00.raw.eatr"),
              "--out", str(out / "rd.eatr"), "--config", cfg_file])
        rc = main(["process", "--in", str(out / "rd.eatr"),
                   "--out", str(out / "again.eatr")])
        assert rc == 2
        assert "RAW_COMPLEX" in capsys.readouterr().err

    def test_missing_input_exits_2(self, tmp_path):
        rc = main(["process", "--in", str(tmp_path / "nope.eatr"),
                   "--out", str(tmp_path / "o.eatr")])
        assert rc == 2


class TestFolds:
    def test_plan_written(self, tmp_path):
        out = tmp_path / "plan.json"
        rc = main(["folds", "--n-meals", "8", "--n-folds", "4", "--val-size", "1",
                   "--seed", "5", "--out", str(out)])
        assert rc == 0
        folds = io.load_folds(out)
        assert len(folds) == 4
        assert all(len(f.test) == 2 and len(f.val) == 1 and len(f.train) == 5
                   for f in folds)

    def test_indivisible_exits_2(self, tmp_path):
        rc = main(["folds", "--n-meals", "7", "--n-folds", "4", "--val-size", "1",
                   "--out", str(tmp_path / "p.json")])
        assert rc == 2


def build_dataset(tmp_path, cfg_file, duration=20.0):
    # seeds 20/22/24 give meals containing both gesture classes at 20 s
    data = tmp_path / "data"
    for i, seed in enumerate((20, 22, 24)):
        name = f"meal_{i:02d}"
        simulate(tmp_path, cfg_file, name=name, seed=seed, duration=duration)
        assert main(["process", "--in", str(data / f"{name}.raw.eatr"),
                     "--out", str(data / f"{name}.rd.eatr"), "--config", cfg_file]) == 0
    return data


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("pipe")
    cfg_path = tmp_path / "all.cfg"
    cfg_path.write_text(TINY_RADAR_CFG + TINY_MODEL_CFG)
    data = build_dataset(tmp_path, str(cfg_path))
    plan = tmp_path / "plan.json"
    assert main(["folds", "--n-meals", "3", "--n-folds", "3", "--val-size", "1",
                 "--seed", "0", "--out", str(plan)]) == 0
    run = tmp_path / "run"
    rc = main(["train", "--data-dir", str(data), "--folds", str(plan),
               "--fold-index", "0", "--out-dir", str(run),
               "--config", str(cfg_path), "--epochs", "2", "--seed", "1",
               "--threads", "1"])
    assert rc == 0
    return tmp_path, cfg_path, data, plan, run


class TestTrainPredictEvaluate:

    def test_train_outputs(self, pipeline):
        _, _, _, _, run = pipeline
        assert (run / "model.ckpt").exists()
        history = (run / "history.csv").read_text().splitlines()
        assert history[0] == "epoch,train_loss,val_loss,val_frame_acc"
        assert len(history) == 3
        manifest = json.loads((run / "manifest.json").read_text())
        assert manifest["config"]["train.epochs"] == 2

    def test_train_deterministic_checkpoint(self, pipeline):
        tmp_path, cfg_path, data, plan, run = pipeline
        rerun = tmp_path / "rerun"
        rc = main(["train", "--data-dir", str(data), "--folds", str(plan),
                   "--fold-index", "0", "--out-dir", str(rerun),
                   "--config", str(cfg_path), "--epochs", "2", "--seed", "1",
                   "--threads", "1"])
        assert rc == 0
        assert (run / "model.ckpt").read_bytes() == (rerun / "model.ckpt").read_bytes()

    def test_predict_then_evaluate_round_trip(self, pipeline):
        tmp_path, cfg_path, data, plan, run = pipeline
        pred_path = tmp_path / "pred.csv"
        rc = main(["predict", "--model", str(run / "model.ckpt"),
                   "--in", str(data / "meal_00.rd.eatr"), "--out", str(pred_path)])
        assert rc == 0
        labels = io.read_predictions(pred_path)
        header, rd = io.read_cube(data / "meal_00.rd.eatr")
        assert len(labels) == rd.shape[0]

        out_dir = tmp_path / "eval"
        rc = main(["evaluate", "--ann", str(data / "meal_00.ann.csv"),
                   "--pred", str(pred_path), "--out-dir", str(out_dir)])
        assert rc == 0
        report = (out_dir / "report.txt").read_text()
        assert "k=0.1" in report and "k=0.25" in report and "k=0.5" in report

    def test_evaluate_perfect_predictions(self, pipeline, capsys):
        tmp_path, cfg_path, data, plan, run = pipeline
        header, rd = io.read_cube(data / "meal_01.rd.eatr")
        gt = io.intervals_to_frame_labels(
            io.read_annotations(data / "meal_01.ann.csv"), rd.shape[0], header.fps)
        pred_path = tmp_path / "perfect.csv"
        io.write_predictions(pred_path, gt)
        out_dir = tmp_path / "eval_perfect"
        rc = main(["evaluate", "--ann", str(data / "meal_01.ann.csv"),
                   "--pred", str(pred_path), "--out-dir", str(out_dir)])
        assert rc == 0
        text = (out_dir / "report.txt").read_text()
        assert "kappa: 1.000" in text
        assert text.count("F1=1.000") == 6  # 2 classes x 3 thresholds

    def test_evaluate_multiple_pairs(self, pipeline):
        tmp_path, cfg_path, data, plan, run = pipeline
        pairs = []
        for name in ("meal_00", "meal_01"):
            header, rd = io.read_cube(data / f"{name}.rd.eatr")
            gt = io.intervals_to_frame_labels(
                io.read_annotations(data / f"{name}.ann.csv"), rd.shape[0], header.fps)
            pred_path = tmp_path / f"{name}.pred.csv"
            io.write_predictions(pred_path, gt)
            pairs += ["--pair", str(data / f"{name}.ann.csv"), str(pred_path)]
        out_dir = tmp_path / "eval_multi"
        rc = main(["evaluate", *pairs, "--out-dir", str(out_dir)])
        assert rc == 0
        per_meal = (out_dir / "per_meal.csv").read_text().splitlines()
        assert per_meal[0] == "meal,k,class,tp,fp,fn,f1"
        assert len(per_meal) == 1 + 2 * 3 * 2  # meals x thresholds x classes


class TestRender:
    def test_rd_frame_to_pgm_and_csv(self, tmp_path, cfg_file):
        out = simulate(tmp_path, cfg_file)
        rd_path = out / "meal_00.rd.eatr"
        assert main(["process", "--in", str(out / "meal_00.raw.eatr"),
                     "--out", str(rd_path), "--config", cfg_file]) == 0
        pgm = tmp_path / "frame.pgm"
        assert main(["render", "--in", str(rd_path), "--frame", "10",
                     "--out", str(pgm)]) == 0
        assert pgm.read_bytes().startswith(b"P5\n8 16\n65535\n")
        csv_path = tmp_path / "frame.csv"
        assert main(["render", "--in", str(rd_path), "--frame", "10",
                     "--out", str(csv_path)]) == 0
        _, rd = io.read_cube(rd_path)
        assert np.array_equal(render.load_frame_csv(csv_path), rd[10])

    def test_dtmap_render(self, tmp_path, cfg_file):
        out = simulate(tmp_path, cfg_file)
        rd_path = out / "meal_00.rd.eatr"
        main(["process", "--in", str(out / "meal_00.raw.eatr"), "--out", str(rd_path),
              "--config", cfg_file])
        png = tmp_path / "dt.pgm"
        assert main(["render", "--in", str(rd_path), "--dtmap", "--out", str(png)]) == 0
        assert png.read_bytes().startswith(b"P5\n16 150\n65535\n")

    def test_gesture_frame_shows_offcenter_doppler_peak(self, tmp_path, cfg_file):
        # plate->mouth movement recedes, so the peak sits below the zero-Doppler row
        out = simulate(tmp_path, cfg_file, seed=20, duration=20.0)
        rd_path = out / "meal_00.rd.eatr"
        main(["process", "--in", str(out / "meal_00.raw.eatr"), "--out", str(rd_path),
              "--config", cfg_file])
        track = io.read_annotations(out / "meal_00.ann.csv")
        assert track, "seed 20 is expected to contain gestures"
        iv = track[0]
        frame_idx = int((iv.start_s + 0.3) * 25)  # mid-raise
        csv_path = tmp_path / "gesture.csv"
        assert main(["render", "--in", str(rd_path), "--frame", str(frame_idx),
                     "--out", str(csv_path)]) == 0
        frame = render.load_frame_csv(csv_path)
        doppler_row = np.unravel_index(frame.argmax(), frame.shape)[0]
        assert doppler_row < 8  # receding peak, below center row

    def test_out_of_range_frame_exits_2(self, tmp_path, cfg_file):
        out = simulate(tmp_path, cfg_file)
        rd_path = out / "meal_00.rd.eatr"
        main(["process", "--in", str(out / "meal_00.raw.eatr"), "--out", str(rd_path),
              "--config", cfg_file])
        rc = main(["render", "--in", str(rd_path), "--frame", "100000",
                   "--out", str(tmp_path / "x.pgm")])
        assert rc == 2

    def test_raw_cube_not_renderable(self, tmp_path, cfg_file):
        out = simulate(tmp_path, cfg_file)
        rc = main(["render", "--in", str(out / "meal_00.raw.eatr"), "--frame", "0",
                   "--out", str(tmp_path / "x.pgm")])
        assert rc == 2


class TestEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run([sys.executable, "-m", "eatr", "--version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.startswith("eatr ")

    def test_usage_error_exit_code(self):
        proc = subprocess.run([sys.executable, "-m", "eatr", "simulate"],
                              capture_output=True, text=True)
        assert proc.returncode == 2
