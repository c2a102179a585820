import json
from pathlib import Path

import numpy as np
import pytest

from gridcraft.cli import main


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_gen_world_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("gen-world", "--seed", 0, "--out", a) == 0
    assert run_cli("gen-world", "--seed", 0, "--out", b) == 0
    for name in ("world.json", "state.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "run_manifest.json").exists()


def test_gen_world_rejects_unknown_config_keys(tmp_path):
    cfg = tmp_path / "world.json"
    cfg.write_text(json.dumps({"seed": 0, "sizee": 16}))
    code = run_cli("gen-world", "--world", cfg, "--seed", 0,
                   "--out", tmp_path / "w")
    assert code == 3


def test_missing_config_file_exit_code(tmp_path):
    code = run_cli("gen-world", "--world", tmp_path / "absent.json",
                   "--seed", 0, "--out", tmp_path / "w")
    assert code == 4


def test_unknown_flag_exit_code(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run_cli("gen-world", "--frobnicate", "--out", tmp_path / "w")
    assert exc.value.code == 2


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """A miniature end-to-end pipeline shared by the CLI tests."""
    root = tmp_path_factory.mktemp("pipeline")
    tasks_path = root / "tasks.json"
    from gridcraft.tasks import task_registry, task_to_record
    keep = ["harvest_milk", "harvest_wool", "combat_cow", "combat_sheep",
            "creative_find_water"]
    records = [task_to_record(task_registry()[k]) for k in keep]
    tasks_path.write_text(json.dumps(records))
    world = root / "world.json"
    world.write_text(json.dumps({"seed": 0, "size": 14}))

    assert run_cli("gen-corpus", "--tasks", tasks_path, "--world", world,
                   "--seed", 1, "--n-per-task", 4, "--out",
                   root / "corpus") == 0
    assert run_cli("train-reward", "--corpus", root / "corpus" / "corpus.jsonl",
                   "--steps", 30, "--seed", 2, "--tasks", tasks_path,
                   "--out", root / "reward") == 0
    train_cfg = root / "train.json"
    train_cfg.write_text(json.dumps({
        "tasks": str(tasks_path),
        "ppo": {"ppo_buffer_size": 6400, "si_frequency": 6400,
                "scale_factor": 0.01, "num_envs": 2, "minibatch_size": 64,
                "ppo_epochs": 1},
        "arm": "learned", "variant": "direct",
        "stages": [["harvest_milk"]], "stage_env_steps": [128],
        "world": {"seed": 0, "size": 14},
    }))
    assert run_cli("train-agent", "--config", train_cfg, "--reward-ckpt",
                   root / "reward" / "checkpoint", "--seed", 3,
                   "--tasks", tasks_path, "--out", root / "agent") == 0
    return root, tasks_path, world


def test_train_reward_zero_steps_equals_init(tmp_path, pipeline_dir):
    root, tasks_path, world = pipeline_dir
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    for out in (out1, out2):
        assert run_cli("train-reward", "--corpus",
                       root / "corpus" / "corpus.jsonl", "--steps", 0,
                       "--seed", 5, "--tasks", tasks_path, "--out", out) == 0
    assert (out1 / "checkpoint" / "tensors.bin").read_bytes() == \
        (out2 / "checkpoint" / "tensors.bin").read_bytes()


def test_eval_episode_counting(tmp_path, pipeline_dir):
    root, tasks_path, world = pipeline_dir
    out = tmp_path / "eval"
    assert run_cli("eval", "--policy", root / "agent" / "policy",
                   "--reward-ckpt", root / "reward" / "checkpoint",
                   "--task", "harvest_milk", "--episodes", 2,
                   "--seeds", "1,2,3", "--tasks", tasks_path,
                   "--world", world, "--seed", 0, "--out", out) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["episodes_per_seed"] == 2
    assert len(report["episodes"]) == 6
    assert not report["held_out"]


def test_eval_held_out_flag(tmp_path, pipeline_dir):
    root, tasks_path, world = pipeline_dir
    out = tmp_path / "eval_h"
    assert run_cli("eval", "--policy", root / "agent" / "policy",
                   "--reward-ckpt", root / "reward" / "checkpoint",
                   "--task", "harvest_milk", "--episodes", 1,
                   "--seeds", "1", "--tasks", tasks_path, "--world", world,
                   "--override", "weather=snow", "--seed", 0,
                   "--out", out) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["held_out"]


def test_eval_creative_without_threshold_errors(tmp_path, pipeline_dir):
    root, tasks_path, world = pipeline_dir
    code = run_cli("eval", "--policy", root / "agent" / "policy",
                   "--reward-ckpt", root / "reward" / "checkpoint",
                   "--task", "creative_find_water", "--episodes", 1,
                   "--seeds", "1", "--tasks", tasks_path, "--world", world,
                   "--seed", 0, "--out", tmp_path / "ec")
    assert code == 3


def test_classify_generate(tmp_path, pipeline_dir):
    root, tasks_path, world = pipeline_dir
    out = tmp_path / "cls"
    assert run_cli("classify", "--reward-ckpt", root / "reward" / "checkpoint",
                   "--task", "creative_find_water", "--generate", 3,
                   "--tasks", tasks_path, "--world", world, "--seed", 0,
                   "--out", out) == 0
    result = json.loads((out / "classifier.json").read_text())
    assert len(result["trajectories"]) == 6
    assert 0.0 <= result["f1"] <= 1.0
    # label file + trajectory files exist for the file-driven path
    assert (out / "labels.txt").exists()
    names = [line.split()[0] for line in
             (out / "labels.txt").read_text().splitlines()]
    assert all((out / "trajectories" / f"{n}.jsonl").exists() for n in names)


def test_classify_from_files(tmp_path, pipeline_dir):
    root, tasks_path, world = pipeline_dir
    gen = tmp_path / "gen"
    run_cli("classify", "--reward-ckpt", root / "reward" / "checkpoint",
            "--task", "creative_find_water", "--generate", 3,
            "--tasks", tasks_path, "--world", world, "--seed", 0, "--out", gen)
    out = tmp_path / "cls2"
    assert run_cli("classify", "--reward-ckpt", root / "reward" / "checkpoint",
                   "--task", "creative_find_water",
                   "--trajectories", gen / "trajectories",
                   "--labels", gen / "labels.txt",
                   "--tasks", tasks_path, "--world", world, "--seed", 0,
                   "--out", out) == 0
    a = json.loads((gen / "classifier.json").read_text())
    b = json.loads((out / "classifier.json").read_text())
    assert a["f1"] == b["f1"] and a["threshold"] == pytest.approx(b["threshold"])


def test_replay_roundtrip(tmp_path, pipeline_dir):
    root, tasks_path, world = pipeline_dir
    gen = tmp_path / "gen_r"
    run_cli("classify", "--reward-ckpt", root / "reward" / "checkpoint",
            "--task", "creative_find_water", "--generate", 1,
            "--tasks", tasks_path, "--world", world, "--seed", 0, "--out", gen)
    traj = next((gen / "trajectories").glob("*.jsonl"))
    out = tmp_path / "frames"
    assert run_cli("replay", "--trajectory", traj, "--out", out,
                   "--scale", 4) == 0
    pngs = sorted(out.glob("*.png"))
    from gridcraft.trajectory import read_trajectory
    _, steps = read_trajectory(traj)
    assert len(pngs) == len(steps)
    from PIL import Image
    img = np.asarray(Image.open(pngs[0]))
    assert img.shape == (36, 36, 3)


def test_replay_empty_trajectory(tmp_path):
    from gridcraft.trajectory import write_trajectory
    path = tmp_path / "empty.jsonl"
    write_trajectory(path, [])
    assert run_cli("replay", "--trajectory", path,
                   "--out", tmp_path / "out") == 0
    assert list((tmp_path / "out").glob("*.png")) == []


def test_replay_version_mismatch_exit_code(tmp_path):
    from gridcraft.trajectory import write_trajectory
    path = tmp_path / "tr.jsonl"
    write_trajectory(path, [])
    lines = path.read_text().splitlines()
    header = json.loads(lines[0])
    header["version"] = 9
    path.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
    assert run_cli("replay", "--trajectory", path,
                   "--out", tmp_path / "out") == 5


def test_plot_data(tmp_path, pipeline_dir):
    root, _, _ = pipeline_dir
    metrics = root / "agent" / "metrics.csv"
    # corrupt one row to exercise the skip counter
    noisy = tmp_path / "noisy.csv"
    lines = metrics.read_text().splitlines()
    lines.insert(2, "garbage,row")
    noisy.write_text("\n".join(lines) + "\n")
    out = tmp_path / "plots"
    assert run_cli("plot-data", "--metrics", metrics, noisy,
                   "--window", 1, "--out", out) == 0
    final = (out / "final.csv").read_text().splitlines()
    assert final[0] == "task,seed0,seed1,mean,std"
    curves = list(out.glob("curve_*.csv"))
    assert curves
    header = curves[0].read_text().splitlines()[0]
    assert header == "step,seed0,seed1,mean,std"


def test_plot_data_window_one_identity(tmp_path):
    csv_path = tmp_path / "m.csv"
    csv_path.write_text(
        "step,task,success_rate,return,ppo_loss,si_loss,smoothing_loss\n"
        "10,t,0.5,1.0,0,0,0\n20,t,0.7,1.0,0,0,0\n")
    out = tmp_path / "p"
    assert run_cli("plot-data", "--metrics", csv_path, "--window", 1,
                   "--out", out) == 0
    rows = (out / "curve_t.csv").read_text().splitlines()
    assert rows[1].startswith("10,0.5") and rows[2].startswith("20,0.7")


def test_smoothed_constant_stays_constant(tmp_path):
    csv_path = tmp_path / "m.csv"
    rows = "\n".join(f"{s},t,0.25,1.0,0,0,0" for s in range(0, 100, 10))
    csv_path.write_text(
        "step,task,success_rate,return,ppo_loss,si_loss,smoothing_loss\n"
        + rows + "\n")
    out = tmp_path / "p"
    assert run_cli("plot-data", "--metrics", csv_path, "--window", 4,
                   "--out", out) == 0
    for line in (out / "curve_t.csv").read_text().splitlines()[1:]:
        assert line.split(",")[1] == "0.25"
