"""Newline-delimited JSON episode traces, replay verification and ASCII frames.

A trace is one header object followed by one object per tick. The header
holds the format tag, the full environment config, the episode seed and
the initial agent table. A tick holds the acting agents, their actions,
rewards, the post-tick agent table ``[row, col, alive, captured]``, raw
collision rows ``[kind, a, b, row, col, outcome_a, outcome_b]``, captures
and the game status. Keys are sorted so identical episodes serialize to
identical bytes.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import EnvConfig, PursuitEvasionEnv
from .rollout import EpisodeResult, _tick_record, interaction_model
from .world import Role, WorldState

TRACE_FORMAT = "gridpursuit-trace"
TRACE_VERSION = 1


class TraceFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _agent_table(world: WorldState) -> list:
    return [
        [int(r), int(c), bool(a), bool(cp)]
        for (r, c), a, cp in zip(world.positions.tolist(), world.alive.tolist(), world.captured.tolist())
    ]


def trace_lines(result: EpisodeResult, config: EnvConfig) -> list[str]:
    if result.ticks is None:
        raise ValueError("episode was run without record_ticks=True")
    header = {
        "format": TRACE_FORMAT,
        "version": TRACE_VERSION,
        "config": config.as_dict(),
        "seed": int(result.seed),
        "mode": interaction_model(config),
        "roles": [int(r) for r in result.initial_world.roles.tolist()],
        "initial": _agent_table(result.initial_world),
    }
    return [_dumps(header)] + [_dumps({"tick": i, **t}) for i, t in enumerate(result.ticks)]


def write_trace(result: EpisodeResult, config: EnvConfig, sink) -> None:
    """Write to a path or an open text stream."""
    text = "".join(line + "\n" for line in trace_lines(result, config))
    if isinstance(sink, (str, Path)):
        Path(sink).parent.mkdir(parents=True, exist_ok=True)
        Path(sink).write_text(text)
    else:
        sink.write(text)


@dataclass
class ReplayResult:
    ok: bool
    ticks: int
    failed_tick: int | None = None
    line: int | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _read_lines(source) -> list[str]:
    if isinstance(source, (str, Path)):
        return Path(source).read_text().splitlines()
    if isinstance(source, io.TextIOBase) or hasattr(source, "read"):
        return source.read().splitlines()
    return list(source)


def _parse(line: str, lineno: int, keys) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(lineno, f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise TraceFormatError(lineno, "record is not an object")
    missing = [k for k in keys if k not in obj]
    if missing:
        raise TraceFormatError(lineno, f"missing fields {missing}")
    return obj


TICK_KEYS = ("tick", "step", "actors", "actions", "rewards", "agents", "collisions", "captures", "status")


def load_trace(source) -> tuple[dict, list[dict]]:
    lines = _read_lines(source)
    if not lines:
        raise TraceFormatError(1, "empty trace")
    header = _parse(lines[0], 1, ("format", "version", "config", "seed", "roles", "initial"))
    if header["format"] != TRACE_FORMAT or header["version"] != TRACE_VERSION:
        raise TraceFormatError(1, f"unsupported trace {header['format']!r} v{header['version']}")
    ticks = [_parse(line, n, TICK_KEYS) for n, line in enumerate(lines[1:], start=2) if line.strip()]
    return header, ticks


def replay_trace(source) -> ReplayResult:
    """Re-run the recorded actions and compare every tick field by field."""
    header, ticks = load_trace(source)
    try:
        config = EnvConfig.from_dict(header["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(1, f"bad config: {exc}") from None
    env = PursuitEvasionEnv(config)
    env.reset(int(header["seed"]))
    if [int(r) for r in env.world.roles.tolist()] != header["roles"] or _agent_table(env.world) != header["initial"]:
        return ReplayResult(False, 0, None, 1, "initial state differs")
    mode = interaction_model(config)
    for n, rec in enumerate(ticks):
        line = n + 2
        if rec["tick"] != n:
            raise TraceFormatError(line, f"tick index {rec['tick']} out of order (expected {n})")
        if env.done:
            return ReplayResult(False, n, n, line, "episode already ended before this tick")
        try:
            actions = {int(k): int(v) for k, v in rec["actions"].items()}
        except (AttributeError, ValueError, TypeError):
            raise TraceFormatError(line, "malformed actions") from None
        try:
            if mode == "simultaneous":
                out = env.step_simultaneous(actions)
            elif mode == "two_swarm":
                out = env.step_two_swarm(env.next_swarm, actions)
            else:
                if len(actions) != 1:
                    return ReplayResult(False, n, n, line, "agent-by-agent tick must hold one action")
                (agent, action), = actions.items()
                out = env.step_agent_by_agent(agent, action)
        except Exception as exc:  # the recorded actions are illegal for the replayed state
            return ReplayResult(False, n, n, line, f"replay step failed: {exc}")
        got = json.loads(_dumps({"tick": n, **_tick_record(out, actions, env.world)}))
        if got != rec:
            diff = sorted(k for k in set(got) | set(rec) if got.get(k) != rec.get(k))
            return ReplayResult(False, n, n, line, f"mismatch in {diff}")
    if not env.done:
        return ReplayResult(False, len(ticks), None, len(ticks) + 1, "trace ends before the episode does")
    return ReplayResult(True, len(ticks))


def render_ascii(world: WorldState) -> str:
    """``P`` pursuer, ``E`` evader, ``#`` obstacle, ``.`` empty, ``*`` captured evader.

    A cell holding more than one live agent shows the count (capped at 9).
    Removed captured evaders leave a ``*`` on an otherwise empty cell.
    """
    h, w = world.height, world.width
    grid = np.full((h, w), ".", dtype="<U1")
    grid[world.obstacles] = "#"
    removed = ~world.alive & world.captured
    for i in np.flatnonzero(removed):
        r, c = world.positions[i]
        if grid[r, c] == ".":
            grid[r, c] = "*"
    counts = np.zeros((h, w), dtype=np.int64)
    alive = np.flatnonzero(world.alive)
    np.add.at(counts, (world.positions[alive, 0], world.positions[alive, 1]), 1)
    for i in alive:
        r, c = world.positions[i]
        if counts[r, c] > 1:
            grid[r, c] = str(min(int(counts[r, c]), 9))
        elif world.captured[i]:
            grid[r, c] = "*"
        else:
            grid[r, c] = "P" if world.roles[i] == Role.PURSUER else "E"
    return "\n".join("".join(row) for row in grid)
