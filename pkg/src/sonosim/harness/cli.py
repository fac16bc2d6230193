"""Command-line interface.

Subcommands: phantom-gen, demo-collect, train, eval, rollout,
randomize-preview, benchmark-robot, compare. All accept --config and
--seed; exit code 0 on success, 2 on usage errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from ..container import ContainerError
from ..demos import collect_demos, make_training_pairs, read_dataset, write_dataset
from ..policy import Policy, load_checkpoint, save_checkpoint
from ..robot import JOINT_NAMES, JointState, actuate
from ..simworld import (
    ImageSpec,
    PlaneId,
    build_phantom,
    randomize,
    render_slice,
    sample_params,
)
from .config import config_to_dict, load_config
from .evaluate import evaluate

__all__ = ["cli_main", "main"]

TASKS = [p.value for p in PlaneId]


def _world(cfg, seed=None):
    phantom_cfg = cfg.phantom if seed is None else replace(cfg.phantom, seed=seed)
    return build_phantom(phantom_cfg.seed, phantom_cfg)


def _seed(args, fallback: int) -> int:
    return fallback if args.seed is None else args.seed


def _image_spec(cfg) -> ImageSpec:
    h, w = cfg.policy.image_hw
    return ImageSpec(height=h, width=w)


# ---------------------------------------------------------------------------


def cmd_phantom_gen(args) -> int:
    cfg = load_config(args.config)
    world = _world(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = _image_spec(cfg)
    summary = {"config": world.config.as_dict(), "hash": world.config_hash(), "targets": {}}
    for t in world.targets:
        img = render_slice(world, t.gt_pose, spec)
        img.to_png(out / f"gt_{t.id.value}.png")
        summary["targets"][t.id.value] = {
            "gt_pose": t.gt_pose.matrix().tolist(),
            "lesions": len(t.lesion_ids),
        }
    (out / "phantom.yaml").write_text(yaml.safe_dump(summary, sort_keys=True))
    print(f"phantom written to {out} (hash {summary['hash']})")
    return 0


def cmd_demo_collect(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg.training.demo_seed)
    world = _world(cfg)
    n = args.n if args.n is not None else cfg.training.demo_counts[args.task]
    ds = collect_demos(world, PlaneId(args.task), n=n, seed=seed, spec=_image_spec(cfg))
    write_dataset(ds, args.out)
    steps = sum(len(d.images) for d in ds.demos)
    print(f"{len(ds.demos)} demos ({steps} steps, {ds.meta['discarded']} discarded) -> {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg.training.seed)
    ds = read_dataset(args.dataset)
    if ds.task != args.task:
        raise ValueError(f"dataset task {ds.task!r} does not match --task {args.task!r}")
    policy_cfg = replace(cfg.policy, conditioning=args.method)
    pairs = make_training_pairs(ds, policy_cfg.window, policy_cfg.horizon)
    policy = Policy(policy_cfg, seed=seed)

    def progress(epoch, loss):
        if args.verbose and (epoch % 10 == 0 or epoch == policy_cfg.epochs - 1):
            print(f"epoch {epoch:4d}  loss {loss:.5f}", file=sys.stderr, flush=True)

    policy.fit(pairs, ds, seed=seed, progress=progress)
    save_checkpoint(
        args.out,
        policy,
        extra_meta={"task": args.task, "dataset": str(args.dataset),
                    "phantom_config_hash": ds.meta.get("phantom_config_hash")},
    )
    print(f"trained {args.method} policy on {len(pairs)} pairs -> {args.out}")
    return 0


def _write_report(report, out: Path, prefix: str = ""):
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{prefix}curves.csv").write_text(report.curves_csv())
    (out / f"{prefix}summary.csv").write_text(report.summary_csv())
    (out / f"{prefix}means.csv").write_text(report.means_csv())


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg.eval.seed)
    world = _world(cfg)
    policy = load_checkpoint(args.checkpoint)
    report = evaluate(
        policy,
        world,
        PlaneId(args.task),
        n_starts=cfg.eval.n_starts,
        seed=seed,
        max_steps=cfg.eval.max_steps,
        backlash=cfg.robot.backlash_model(cfg.eval.regulator_enabled),
        spec=_image_spec(cfg),
    )
    out = Path(args.out)
    _write_report(report, out)
    meta = {
        "task": args.task,
        "seed": seed,
        "n_starts": cfg.eval.n_starts,
        "max_steps": cfg.eval.max_steps,
        "step_semantics": "executed robot steps",
        "mean_final_trans_mm": float(report.final_errors()[0].mean()),
        "mean_initial_trans_mm": float(report.initial_trans.mean()),
    }
    (out / "meta.yaml").write_text(yaml.safe_dump(meta, sort_keys=True))
    if args.plot:
        from .plots import plot_report

        plot_report(report, out / "curves.svg")
    print(
        f"eval {args.task}: mean initial {meta['mean_initial_trans_mm']:.2f} mm -> "
        f"final {meta['mean_final_trans_mm']:.2f} mm ({len(report.traces)} trials) -> {out}"
    )
    return 0


def cmd_rollout(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg.eval.seed)
    world = _world(cfg)
    policy = load_checkpoint(args.checkpoint)
    report = evaluate(
        policy, world, PlaneId(args.task), n_starts=1, seed=seed,
        max_steps=cfg.eval.max_steps,
        backlash=cfg.robot.backlash_model(cfg.eval.regulator_enabled),
        spec=_image_spec(cfg),
    )
    out = Path(args.out)
    _write_report(report, out)
    trace = report.traces[0]
    print(f"rollout {args.task}: final error {trace.trans_err[-1]:.2f} mm -> {out}")
    return 0


def cmd_randomize_preview(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, 0)
    world = _world(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    target = world.target(PlaneId(args.task))
    clean = render_slice(world, target.gt_pose, _image_spec(cfg))
    clean.to_png(out / "clean.png")
    dump = {}
    for i in range(args.count):
        params = sample_params(rng)
        noisy = randomize(clean, params, rng)
        noisy.to_png(out / f"randomized_{i}.png")
        dump[f"randomized_{i}"] = params.__dict__
    (out / "params.yaml").write_text(yaml.safe_dump(dump, sort_keys=True))
    print(f"wrote clean + {args.count} randomized previews -> {out}")
    return 0


def cmd_benchmark_robot(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, 7)
    rng = np.random.default_rng(seed)
    from ..robot import BacklashModel, JointLimits

    limits = JointLimits()
    lo, hi = limits.lo_hi_arrays()
    q = np.zeros(6)
    commands = []
    for _ in range(args.steps):
        q = np.clip(q + rng.normal(0, (hi - lo) / 60), lo, hi)
        commands.append(JointState.from_array(q))
    rows = []
    for enabled in (True, False):
        model = cfg.robot.backlash_model(enabled)
        state = JointState()
        err = np.zeros(6)
        for cmd in commands:
            state = actuate(state, cmd, model, limits)
            err += np.abs(state.as_array() - cmd.as_array())
        rows.append(err / len(commands))
    header = "joint,mae_regulator_on,mae_regulator_off"
    lines = [header]
    for k, name in enumerate(JOINT_NAMES):
        lines.append(f"{name},{rows[0][k]:.6f},{rows[1][k]:.6f}")
    table = "\n".join(lines) + "\n"
    print(table, end="")
    if args.out:
        Path(args.out).write_text(table)
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg.eval.seed)
    world = _world(cfg)
    out = Path(args.out)
    reports = {}
    for label, path in (("policy", args.checkpoint), ("baseline", args.baseline)):
        policy = load_checkpoint(path)
        reports[label] = evaluate(
            policy, world, PlaneId(args.task), n_starts=cfg.eval.n_starts,
            seed=seed, max_steps=cfg.eval.max_steps,
            backlash=cfg.robot.backlash_model(cfg.eval.regulator_enabled),
            spec=_image_spec(cfg),
        )
        _write_report(reports[label], out, prefix=f"{label}_")
    ft_p = reports["policy"].final_errors()[0].mean()
    ft_b = reports["baseline"].final_errors()[0].mean()
    verdict = "policy" if ft_p <= ft_b else "baseline"
    (out / "verdict.yaml").write_text(
        yaml.safe_dump(
            {
                "task": args.task,
                "policy_mean_final_trans_mm": float(ft_p),
                "baseline_mean_final_trans_mm": float(ft_b),
                "lower_final_error": verdict,
            },
            sort_keys=True,
        )
    )
    if args.plot:
        from .plots import plot_comparison

        plot_comparison(reports["policy"], reports["baseline"], ("policy", "baseline"),
                        out / "comparison.svg")
    print(f"compare {args.task}: policy {ft_p:.2f} mm vs baseline {ft_b:.2f} mm -> {out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sonosim", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="YAML run config")
    common.add_argument("--seed", type=int, default=None, help="override the section seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom-gen", parents=[common], help="build the phantom and write previews")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom_gen)

    p = sub.add_parser("demo-collect", parents=[common], help="collect expert demonstrations")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_demo_collect)

    p = sub.add_parser("train", parents=[common], help="train a policy on a dataset")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["keyframe", "concat"], default="keyframe")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rollout", parents=[common], help="run a single episode")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("randomize-preview", parents=[common],
                       help="write clean and randomized renders")
    p.add_argument("--task", default="aorta", choices=TASKS)
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_randomize_preview)

    p = sub.add_parser("benchmark-robot", parents=[common],
                       help="per-joint accuracy, regulator on vs off")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_benchmark_robot)

    p = sub.add_parser("compare", parents=[common],
                       help="evaluate a policy against a baseline checkpoint")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def cli_main(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (ContainerError, FileNotFoundError, ValueError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
