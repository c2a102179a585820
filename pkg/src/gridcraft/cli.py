"""Command-line entry point.

Every subcommand is a file-to-file pipeline: read configs, write artifacts
plus a run manifest into the output directory. Exit codes: 0 success,
2 usage, 3 bad configuration, 4 missing file, 5 file-format/version error,
1 unexpected failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from gridcraft import __version__
from gridcraft.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from gridcraft.configio import (
    RunManifest, config_hash, dump_json, load_json, ppo_config_from_dict,
    reward_model_config_from_dict, reward_train_config_from_dict,
    world_config_from_dict, world_config_to_dict,
)
from gridcraft.constants import ENTITY_NAMES
from gridcraft.corpus import build_corpus, load_corpus, save_corpus
from gridcraft.evaluator import (
    ScoreClassifier, classify_and_f1, kmeans2_threshold, run_eval,
    score_trajectory,
)
from gridcraft.metrics import MetricsWriter, plot_data
from gridcraft.policy import PolicyConfig, PolicyNet
from gridcraft.ppo import PPOConfig
from gridcraft.reward_adapter import RewardVariant, precompute_prompts
from gridcraft.reward_train import (
    RewardTrainConfig, load_reward_model, save_reward_checkpoint,
    train_reward_model,
)
from gridcraft.rng import substream
from gridcraft.tasks import task_from_record, task_registry, task_to_record
from gridcraft.text import vocabulary_for_tasks
from gridcraft.train_loop import Trainer, negative_prompts
from gridcraft.trajectory import (
    TrajectoryFormatError, read_trajectory, write_trajectory,
)
from gridcraft.world import ConfigError, WorldConfig, generate_world

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_MISSING = 4
EXIT_FORMAT = 5


def _load_tasks(spec: str):
    if spec == "starter":
        return list(task_registry().values())
    records = load_json(spec)
    if not isinstance(records, list):
        raise ConfigError(f"task manifest {spec} must be a JSON list")
    return [task_from_record(r) for r in records]


def _world_config(args) -> WorldConfig:
    if getattr(args, "world", None):
        return world_config_from_dict(load_json(args.world),
                                      seed_override=args.seed)
    return WorldConfig(seed=args.seed)


def _parse_overrides(pairs):
    out = {}
    for kv in pairs or []:
        if "=" not in kv:
            raise ConfigError(f"override {kv!r} is not key=value")
        k, v = kv.split("=", 1)
        if k not in ("weather", "daylight", "size"):
            raise ConfigError(f"override key {k!r} not supported")
        out[k] = int(v) if k == "size" else v
    return out


# -- subcommands --------------------------------------------------------------

def cmd_gen_world(args) -> int:
    cfg = _world_config(args)
    out = Path(args.out)
    manifest = RunManifest(out, "gen-world", args.seed,
                           config_hash(world_config_to_dict(cfg)))
    state = generate_world(cfg)
    dump_json(out / "world.json", world_config_to_dict(cfg))
    dump_json(out / "state.json", {
        "grid": state.grid.tolist(),
        "agent": {"x": state.agent.x, "y": state.agent.y,
                  "facing": state.agent.facing},
        "entities": [{"kind": ENTITY_NAMES[e.kind], "x": e.x, "y": e.y,
                      "health": e.health} for e in state.entities],
        "tick": state.tick,
    })
    manifest.add_artifact(out / "world.json")
    manifest.add_artifact(out / "state.json")
    manifest.finish()
    print(f"world written to {out}")
    return EXIT_OK


def cmd_gen_corpus(args) -> int:
    tasks = _load_tasks(args.tasks)
    base = _world_config(args)
    out = Path(args.out)
    manifest = RunManifest(out, "gen-corpus", args.seed,
                           config_hash({"tasks": [t.id for t in tasks],
                                        "n": args.n_per_task}))
    pairs, vocab = build_corpus(tasks, base, args.n_per_task, args.seed,
                                pairs_per_trajectory=args.pairs_per_traj,
                                noise=args.noise)
    save_corpus(out / "corpus.jsonl", pairs, vocab)
    manifest.add_artifact(out / "corpus.jsonl")
    manifest.finish()
    print(f"{len(pairs)} pairs written to {out / 'corpus.jsonl'}")
    return EXIT_OK


def cmd_train_reward(args) -> int:
    pairs, vocab = load_corpus(args.corpus)
    tcfg_data = load_json(args.config) if args.config else {}
    if args.steps is not None:
        tcfg_data["steps"] = args.steps
    tcfg = reward_train_config_from_dict(tcfg_data)
    mcfg_data = load_json(args.model_config) if args.model_config else {}
    mcfg = reward_model_config_from_dict(mcfg_data, vocab_size=len(vocab))
    out = Path(args.out)
    manifest = RunManifest(out, "train-reward", args.seed,
                           config_hash({"train": tcfg.to_dict(),
                                        "model": mcfg.to_dict()}))
    model, metrics = train_reward_model(pairs, vocab, mcfg, tcfg, args.seed)
    save_reward_checkpoint(out / "checkpoint", model, vocab,
                           extra={"steps": tcfg.steps, "pairs": len(pairs)})
    with MetricsWriter(out / "reward_train_metrics.csv",
                       fields=["step", "loss", "lr"]) as w:
        for row in metrics:
            w.write_row(row)
    manifest.add_artifact(out / "checkpoint")
    manifest.finish()
    final = metrics[-1]["loss"] if metrics else float("nan")
    print(f"reward model trained ({tcfg.steps} steps, final loss {final:.4f}) "
          f"-> {out / 'checkpoint'}")
    return EXIT_OK


def cmd_train_agent(args) -> int:
    spec = load_json(args.config)
    tasks = _load_tasks(spec.get("tasks", "starter"))
    ppo_cfg = ppo_config_from_dict(spec.get("ppo", {}))
    arm = spec.get("arm", "learned")
    variant = RewardVariant(spec.get("variant", "direct"))
    stages = spec.get("stages")
    if not stages:
        raise ConfigError("training config: missing stages")
    stage_steps = spec.get("stage_env_steps")
    if not stage_steps or len(stage_steps) != len(stages):
        raise ConfigError("training config: stage_env_steps must match stages")
    if "world" in spec:
        base = world_config_from_dict(spec["world"], seed_override=args.seed)
    else:
        base = WorldConfig(seed=args.seed)
    model, vocab = load_reward_model(args.reward_ckpt)
    init_state = None
    if args.init_policy:
        kind, _, init_state, _ = load_checkpoint(args.init_policy)
        if kind != "policy":
            raise ConfigError(f"{args.init_policy} is not a policy checkpoint")
    out = Path(args.out)
    manifest = RunManifest(out, "train-agent", args.seed, config_hash(spec))
    with MetricsWriter(out / "metrics.csv") as writer:
        trainer = Trainer(tasks, model, vocab, ppo_cfg, arm, stages,
                          stage_steps, base, args.seed, variant=variant,
                          init_policy_state=init_state, metrics_writer=writer)
        policy = trainer.run()
    save_checkpoint(out / "policy", "policy",
                    {"policy": trainer.policy_cfg.to_dict(),
                     "ppo": ppo_cfg.to_dict(), "arm": arm,
                     "variant": variant.value},
                    policy.state_dict(),
                    extra={"reward_checkpoint": str(args.reward_ckpt),
                           "env_steps": trainer.global_steps,
                           "tasks": [t.id for t in tasks]})
    manifest.add_artifact(out / "policy")
    manifest.add_artifact(out / "metrics.csv")
    manifest.finish()
    print(f"policy trained for {trainer.global_steps} env steps -> {out / 'policy'}")
    return EXIT_OK


def _load_policy(path) -> tuple:
    kind, config, state, extra = load_checkpoint(path)
    if kind != "policy":
        raise ConfigError(f"{path} holds a {kind!r} checkpoint, not a policy")
    policy = PolicyNet(PolicyConfig(**config["policy"]))
    policy.load_state_dict(state)
    policy.eval()
    return policy, config, extra


def cmd_eval(args) -> int:
    tasks = {t.id: t for t in _load_tasks(args.tasks)}
    if args.task not in tasks:
        raise ConfigError(f"unknown task {args.task!r}")
    task = tasks[args.task]
    policy, config, extra = _load_policy(args.policy)
    reward_path = args.reward_ckpt or extra.get("reward_checkpoint")
    if not reward_path:
        raise ConfigError("no reward checkpoint given and none recorded")
    model, vocab = load_reward_model(reward_path)
    prompt_set = precompute_prompts(
        model, vocab, [task.goal] + negative_prompts(task, list(tasks.values())))
    classifier = None
    if task.is_creative:
        if args.threshold is None:
            raise ConfigError(
                f"creative task {task.id}: pass --threshold from `classify`")
        classifier = ScoreClassifier(prompt_set, args.threshold)
    overrides = _parse_overrides(args.override)
    seeds = [int(s) for s in args.seeds.split(",")]
    base = _world_config(args)
    out = Path(args.out)
    cfg_hash = config_hash({"task": task.id, "episodes": args.episodes,
                            "seeds": seeds, "overrides": overrides})
    manifest = RunManifest(out, "eval", args.seed, cfg_hash)
    report = run_eval(policy, model, prompt_set.embeddings[0], task, base,
                      args.episodes, seeds, config_overrides=overrides,
                      stochastic=args.stochastic, classifier=classifier,
                      config_hash=cfg_hash)
    dump_json(out / "report.json", report.to_dict())
    manifest.add_artifact(out / "report.json")
    manifest.finish()
    print(f"{task.id}: {report.mean:.1f} +/- {report.std:.1f} % success "
          f"({len(seeds)} seeds x {args.episodes} episodes)"
          + (" [held-out config]" if report.held_out else ""))
    return EXIT_OK


def cmd_classify(args) -> int:
    tasks = {t.id: t for t in _load_tasks(args.tasks)}
    if args.task not in tasks:
        raise ConfigError(f"unknown task {args.task!r}")
    task = tasks[args.task]
    model, vocab = load_reward_model(args.reward_ckpt)
    prompt_set = precompute_prompts(
        model, vocab, [task.goal] + negative_prompts(task, list(tasks.values())))
    out = Path(args.out)
    manifest = RunManifest(out, "classify", args.seed,
                           config_hash({"task": task.id}))

    if args.generate:
        from gridcraft.corpus import run_scripted_episode
        from gridcraft.scripted import demonstrator_for, failure_policy_for
        base = _world_config(args)
        rng = substream(args.seed, f"classify:{task.id}")
        names, scores, labels = [], [], []
        traj_dir = out / "trajectories"
        for label, policy_fn in ((1, demonstrator_for), (0, failure_policy_for)):
            policy = policy_fn(task, noise=0.1)
            made = 0
            while made < args.generate:
                run = run_scripted_episode(task, base,
                                           int(rng.integers(2**63)), policy, rng)
                if len(run.frames) < 16:
                    continue
                name = f"{task.id}_{'pos' if label else 'neg'}_{made:03d}"
                write_trajectory(traj_dir / f"{name}.jsonl",
                                 list(zip(range(1, len(run.frames) + 1),
                                          run.actions, run.rewards,
                                          run.events, run.frames)),
                                 task_id=task.id, seed=args.seed)
                names.append(name)
                scores.append(score_trajectory(model, run.frames, prompt_set))
                labels.append(label)
                made += 1
        (out / "labels.txt").write_text(
            "".join(f"{n} {y}\n" for n, y in zip(names, labels)))
    else:
        if not args.trajectories or not args.labels:
            raise ConfigError("classify needs --trajectories and --labels "
                              "(or --generate N)")
        labels_map = {}
        for line in Path(args.labels).read_text().splitlines():
            if line.strip():
                name, y = line.split()
                labels_map[name] = int(y)
        names, scores, labels = [], [], []
        for name in sorted(labels_map):
            path = Path(args.trajectories) / f"{name}.jsonl"
            _, steps = read_trajectory(path)
            frames = np.stack([s[4] for s in steps])
            names.append(name)
            scores.append(score_trajectory(model, frames, prompt_set))
            labels.append(labels_map[name])

    threshold = kmeans2_threshold(scores)
    result = classify_and_f1(scores, threshold, labels)
    dump_json(out / "classifier.json", {
        "task": task.id, "threshold": threshold, "f1": result.f1,
        "precision": result.precision, "recall": result.recall,
        "trajectories": [
            {"id": n, "score": s, "label": y, "prediction": p}
            for n, s, y, p in zip(names, scores, labels, result.predictions)],
    })
    manifest.add_artifact(out / "classifier.json")
    manifest.finish()
    print(f"{task.id}: threshold {threshold:.4f}, F1 {result.f1:.3f} "
          f"on {len(scores)} trajectories")
    return EXIT_OK


def cmd_replay(args) -> int:
    from PIL import Image
    header, steps = read_trajectory(args.trajectory)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scale = args.scale
    for i, (tick, action, reward, events, frame) in enumerate(steps):
        img = (np.clip(frame, 0, 1) * 255).astype(np.uint8).transpose(1, 2, 0)
        img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
        Image.fromarray(img).save(out / f"step_{i:06d}.png")
    print(f"{len(steps)} frames rendered to {out}")
    return EXIT_OK


def cmd_plot_data(args) -> int:
    info = plot_data(args.metrics, args.window, args.out)
    print(f"wrote curves for {len(info['tasks'])} tasks over "
          f"{info['seeds']} seeds to {args.out}"
          + (f" ({info['skipped_rows']} malformed rows skipped)"
             if info["skipped_rows"] else ""))
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gridcraft",
        description="Deterministic grid world with caption-reward agent learning")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, world=True):
        sp.add_argument("--seed", type=int, default=0,
                        help="global seed; all stage substreams derive from it")
        sp.add_argument("--out", required=True, help="output directory")
        if world:
            sp.add_argument("--world", help="world config JSON path")
        sp.add_argument("--tasks", default="starter",
                        help='"starter" or a task manifest JSON path')

    sp = sub.add_parser("gen-world", help="generate and dump a seeded world")
    common(sp)
    sp.set_defaults(func=cmd_gen_world)

    sp = sub.add_parser("gen-corpus", help="scripted demo corpus")
    common(sp)
    sp.add_argument("--n-per-task", type=int, default=20)
    sp.add_argument("--pairs-per-traj", type=int, default=4)
    sp.add_argument("--noise", type=float, default=0.15)
    sp.set_defaults(func=cmd_gen_corpus)

    sp = sub.add_parser("train-reward", help="contrastive reward model")
    common(sp, world=False)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--config", help="reward training config JSON")
    sp.add_argument("--model-config", help="reward model config JSON")
    sp.add_argument("--steps", type=int, help="override training steps")
    sp.set_defaults(func=cmd_train_reward)

    sp = sub.add_parser("train-agent", help="PPO + self-imitation training")
    common(sp, world=False)
    sp.add_argument("--config", required=True, help="training run JSON")
    sp.add_argument("--reward-ckpt", required=True)
    sp.add_argument("--init-policy", help="warm-start policy checkpoint")
    sp.set_defaults(func=cmd_train_agent)

    sp = sub.add_parser("eval", help="success-rate evaluation")
    common(sp)
    sp.add_argument("--policy", required=True)
    sp.add_argument("--reward-ckpt")
    sp.add_argument("--task", required=True)
    sp.add_argument("--episodes", type=int, default=200)
    sp.add_argument("--seeds", default="0,1,2")
    sp.add_argument("--override", action="append",
                    help="world override key=value (weather/daylight/size)")
    sp.add_argument("--stochastic", action="store_true")
    sp.add_argument("--threshold", type=float,
                    help="creative tasks: classifier decision boundary")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("classify", help="reward model as success classifier")
    common(sp)
    sp.add_argument("--reward-ckpt", required=True)
    sp.add_argument("--task", required=True)
    sp.add_argument("--trajectories", help="directory of trajectory files")
    sp.add_argument("--labels", help="label file: lines of `id 0/1`")
    sp.add_argument("--generate", type=int,
                    help="generate N success + N failure scripted trajectories")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("replay", help="render a trajectory file to images")
    sp.add_argument("--trajectory", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--scale", type=int, default=32)
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("plot-data", help="summaries from metrics streams")
    sp.add_argument("--metrics", nargs="+", required=True)
    sp.add_argument("--window", type=int, default=5)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING
    except (TrajectoryFormatError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
