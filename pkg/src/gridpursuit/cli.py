"""Command line entry point: ``gridpursuit <command> [options]``.

Commands: run, train, coevolve, tournament, render, replay. Every command
accepts ``--config FILE`` (YAML), ``--seed`` and ``--out DIR``; explicit
flags override values from the config file.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .coevolution import SCHEMES, CheckpointStore, initial_parameters, run_coevolution, train_single_side
from .config import ConfigError, coevolution_config, env_config, learner_config, load_config, validate_config
from .env import EnvConfig, PursuitEvasionEnv
from .evaluation import tournament
from .learning import MlpPolicy, load_checkpoint, save_checkpoint
from .policies import SCRIPTED, Policy, make_policy
from .rollout import derive_seed, run_episode
from .tasks import UnknownTaskError
from .trace import TraceFormatError, load_trace, render_ascii, replay_trace, write_trace

# options whose values may legitimately start with "-" (task names)
_DASH_VALUE_OPTIONS = ("--task",)


def _fix_dash_values(argv: list[str]) -> list[str]:
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _DASH_VALUE_OPTIONS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", type=Path, help="output directory")


def _env_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("environment overrides")
    g.add_argument("--task", help="variant name, e.g. -O or Pursuit-Evasion-S")
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--pursuers", type=int)
    g.add_argument("--evaders", type=int)
    g.add_argument("--fov", type=int, help="observation radius")
    g.add_argument("--max-steps", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridpursuit", description="Grid-world pursuit-evasion engine")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="play episodes with named policies or checkpoints")
    _common(p)
    _env_flags(p)
    p.add_argument("--pursuer-policy", default="random", help=f"{sorted(SCRIPTED)} or a checkpoint path")
    p.add_argument("--evader-policy", default="random", help=f"{sorted(SCRIPTED)} or a checkpoint path")
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--trace", action="store_true", help="write one trace per episode under --out")

    p = sub.add_parser("train", help="train one side against a fixed opponent")
    _common(p)
    _env_flags(p)
    p.add_argument("--role", choices=("pursuer", "evader"), default="pursuer")
    p.add_argument("--opponent", default="random", help=f"{sorted(SCRIPTED)} or a checkpoint path")
    p.add_argument("--epochs", type=int, default=10)

    p = sub.add_parser("coevolve", help="run a co-evolution scheme into a checkpoint store")
    _common(p)
    _env_flags(p)
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--generations", type=int)
    p.add_argument("--pursuer-epochs", type=int)
    p.add_argument("--evader-epochs", type=int)
    p.add_argument("--no-resume", action="store_true", help="retrain from generation 0")

    p = sub.add_parser("tournament", help="cross-generation capture-rate matrix of a store")
    _common(p)
    _env_flags(p)
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--episodes", type=int, help="episodes per cell")
    p.add_argument("--workers", type=int, default=1, help="evaluate cells in this many processes")

    p = sub.add_parser("render", help="print ASCII frames of a trace (or a fresh world)")
    _common(p)
    _env_flags(p)
    p.add_argument("trace", type=Path, nargs="?")
    p.add_argument("--tick", type=int, help="only this tick (0 = initial state)")

    p = sub.add_parser("replay", help="verify a trace by re-executing it")
    _common(p)
    p.add_argument("trace", type=Path)
    return parser


def _load_cfg(args) -> dict:
    return load_config(args.config) if args.config else validate_config({})


def _seed(args, cfg) -> int:
    if args.seed is not None:
        return args.seed
    return int(cfg.get("seed") or 0)


def _env(args, cfg) -> EnvConfig:
    return env_config(
        cfg, task=args.task, width=args.width, height=args.height, pursuers=args.pursuers,
        evaders=args.evaders, fov=args.fov, max_steps=args.max_steps,
    )


def _policy(spec: str) -> Policy:
    if spec in SCRIPTED:
        return make_policy(spec)
    path = Path(spec)
    if path.is_file():
        return MlpPolicy(*load_checkpoint(path))
    raise ConfigError(f"policy {spec!r} is neither {sorted(SCRIPTED)} nor an existing checkpoint")


def _write_csv(path: Path, rows: list[dict], columns) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    env = _env(args, cfg)
    seed = _seed(args, cfg)
    if args.episodes < 1:
        raise ConfigError("--episodes must be >= 1")
    pp, ep = _policy(args.pursuer_policy), _policy(args.evader_policy)
    rows = []
    for i in range(args.episodes):
        s = derive_seed(seed, "run", i)
        res = run_episode(env, pp, ep, s, record_ticks=args.trace)
        rows.append({
            "episode": i, "seed": s, "steps": res.steps, "status": res.status,
            "captured": res.captured, "capture_rate": res.capture_rate,
            "collisions_ao": res.collisions["agent_obstacle"],
            "collisions_aa": res.collisions["agent_agent"],
            "collisions_pe": res.collisions["pursuer_evader"],
            "pursuer_reward": res.team_return["pursuer"], "evader_reward": res.team_return["evader"],
        })
        if args.trace:
            if args.out is None:
                raise ConfigError("--trace needs --out")
            write_trace(res, env, args.out / "traces" / f"episode_{i:04d}.jsonl")
    if args.out is not None:
        _write_csv(args.out / "episodes.csv", rows, rows[0].keys())
    summary = {
        "task": env.task.name, "episodes": len(rows),
        "capture_rate": sum(r["capture_rate"] for r in rows) / len(rows),
        "mean_steps": sum(r["steps"] for r in rows) / len(rows),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    env = _env(args, cfg)
    seed = _seed(args, cfg)
    section = "evader_learner" if args.role == "evader" and cfg.get("evader_learner") else "learner"
    learner = learner_config(cfg, section)
    co = coevolution_config(cfg, seed=seed, env=env)
    actor, critic, rows = train_single_side(
        env, learner, args.role, _policy(args.opponent), args.epochs, seed,
        initial_parameters(co, args.role), opponent_label=args.opponent,
    )
    if args.out is not None:
        save_checkpoint(args.out / f"{args.role}.ckpt", actor, critic)
        _write_csv(args.out / "stats.csv", rows, rows[0].keys())
    last = rows[-1]
    print(json.dumps({"role": args.role, "epochs": args.epochs, "final_capture_rate": last["capture_rate"],
                      "final_mean_reward": last["mean_reward"]}, sort_keys=True))
    return 0


def cmd_coevolve(args) -> int:
    cfg = _load_cfg(args)
    if args.out is None:
        raise ConfigError("coevolve needs --out")
    co = coevolution_config(
        cfg, seed=_seed(args, cfg), env=_env(args, cfg), scheme=args.scheme,
        generations=args.generations, pursuer_epochs=args.pursuer_epochs, evader_epochs=args.evader_epochs,
    )
    store = run_coevolution(co, args.out, resume=not args.no_resume)
    print(json.dumps({"store": str(store.root), "generations": store.generations, "scheme": co.scheme}))
    return 0


def cmd_tournament(args) -> int:
    cfg = _load_cfg(args)
    env = _env(args, cfg)
    seed = _seed(args, cfg)
    episodes = args.episodes or int(cfg.get("evaluation", {}).get("episodes_per_cell", 10))
    store = CheckpointStore(args.store)
    matrix = tournament(store, env, episodes, seed, workers=args.workers)
    text = matrix.to_csv()
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "tournament.csv").write_text(text)
        rows = [{"generation": k, "pursuer_score": p, "evader_score": e}
                for k, (p, e) in enumerate(zip(matrix.pursuer_scores().tolist(), matrix.evader_scores().tolist()))]
        _write_csv(args.out / "generalization.csv", rows, ("generation", "pursuer_score", "evader_score"))
    sys.stdout.write(text)
    return 0


def cmd_render(args) -> int:
    cfg = _load_cfg(args)
    if args.trace is None:
        env = PursuitEvasionEnv(_env(args, cfg))
        env.reset(_seed(args, cfg))
        print(render_ascii(env.world))
        return 0
    header, ticks = load_trace(args.trace)
    env = PursuitEvasionEnv(EnvConfig.from_dict(header["config"]))
    env.reset(int(header["seed"]))
    world = env.world
    frames = [(0, header["initial"])] + [(t["tick"] + 1, t["agents"]) for t in ticks]
    for n, table in frames:
        if args.tick is not None and n != args.tick:
            continue
        for i, (r, c, alive, captured) in enumerate(table):
            world.positions[i] = (r, c)
            world.alive[i] = alive
            world.captured[i] = captured
        print(f"-- tick {n}")
        print(render_ascii(world))
    return 0


def cmd_replay(args) -> int:
    result = replay_trace(args.trace)
    if result.ok:
        print(f"ok: {result.ticks} ticks replayed")
        return 0
    print(f"replay failed at tick {result.failed_tick} (line {result.line}): {result.reason}", file=sys.stderr)
    return 1


COMMANDS = {
    "run": cmd_run, "train": cmd_train, "coevolve": cmd_coevolve,
    "tournament": cmd_tournament, "render": cmd_render, "replay": cmd_replay,
}


def main(argv: list[str] | None = None) -> int:
    argv = _fix_dash_values(list(sys.argv[1:] if argv is None else argv))
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UnknownTaskError, TraceFormatError, FileNotFoundError, ValueError) as exc:
        print(f"gridpursuit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
