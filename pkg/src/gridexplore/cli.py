"""Command-line entry point: map generation, training, evaluation, comparison
and manifest replay.

Every command writes a JSON run manifest next to its outputs. ``replay``
re-runs a manifest into a new location; the CSV, SVG and checkpoint files it
produces are byte-identical to the originals.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import re
import sys
from pathlib import Path

from . import __version__
from .agent.config import RunConfig, parse_config
from .agent.trainer import evaluate, make_agent, train
from .evaluation import aggregate, write_episodes_csv, write_summary_csv
from .evaluation.svg import render_grid_svg, render_q_svg, render_trajectory_svg, write_svg
from .nn import read_checkpoint, write_checkpoint
from .world import (MIN_GENERATED_SIDE, MapGenConfig, default_room_range, generate_world, read_world,
                    write_world)

log = logging.getLogger("gridexplore")

NET_AGENTS = ("dqn", "fcqn", "afcqn")
AGENTS = ("frontier",) + NET_AGENTS
MANIFEST_NAME = "manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers

def _natural_key(path: Path):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", path.stem)]


def load_maps(directory) -> list:
    """All ``*.txt`` maps in ``directory`` as ``(name, WorldMap)``, naturally sorted."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"map directory {d} does not exist")
    files = sorted(d.glob("*.txt"), key=_natural_key)
    if not files:
        raise FileNotFoundError(f"no *.txt maps in {d}")
    return [(f.stem, read_world(f)) for f in files]


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _map_digests(directory) -> dict:
    return {f.name: _digest(f) for f in sorted(Path(directory).glob("*.txt"), key=_natural_key)}


def _config_from(args) -> RunConfig:
    if getattr(args, "config_text", None) is not None:
        return parse_config(args.config_text)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as f:
            return parse_config(f.read())
    return RunConfig()


def write_manifest(path, command: str, args: dict, cfg: RunConfig | None, seed, outputs, inputs=None):
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "args": args,
        "config": cfg.dumps() if cfg is not None else None,
        "inputs": inputs or {},
        "outputs": [str(o) for o in outputs],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def _load_nets(agents, ckpts: dict):
    params = {}
    for name in agents:
        if name in NET_AGENTS:
            if name not in ckpts:
                raise UsageError(f"agent {name} needs a checkpoint (--ckpt)")
            params[name] = read_checkpoint(ckpts[name], expected_variant=name.upper())
    return params


def _parse_ckpts(values, agents) -> dict:
    """``--ckpt PATH`` (single net agent) or ``--ckpt agent=PATH`` pairs."""
    out = {}
    for v in values or []:
        if "=" in v:
            name, path = v.split("=", 1)
            out[name.strip().lower()] = path
        else:
            nets = [a for a in agents if a in NET_AGENTS]
            if len(nets) != 1:
                raise UsageError("use --ckpt agent=PATH when several network agents are given")
            out[nets[0]] = v
    return out


def _check_agents(agents):
    for a in agents:
        if a not in AGENTS:
            raise UsageError(f"unknown agent {a!r} (choose from {', '.join(AGENTS)})")


# ---------------------------------------------------------------------------
# commands

def cmd_gen_maps(args) -> dict:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    if args.width < MIN_GENERATED_SIDE or args.height < MIN_GENERATED_SIDE:
        raise UsageError(f"--width and --height must be >= {MIN_GENERATED_SIDE}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rooms = tuple(args.rooms) if args.rooms else default_room_range(args.width, args.height)
    files = []
    for k in range(args.count):
        cfg = MapGenConfig(args.width, args.height, resolution=args.resolution, room_count_range=rooms,
                           door_width=args.door_width, seed=args.seed + k)
        path = out / f"map_{k}.txt"
        write_world(generate_world(cfg), path)
        files.append(path)
    rec = {"count": args.count, "width": args.width, "height": args.height, "seed": args.seed,
           "resolution": args.resolution, "rooms": list(rooms), "door_width": args.door_width}
    return write_manifest(out / MANIFEST_NAME, "gen-maps", rec, None, args.seed, files)


def _train_paths(ckpt: Path):
    return ckpt.with_name(ckpt.name + ".train.csv"), ckpt.with_name(ckpt.name + ".manifest.json")


def cmd_train(args) -> dict:
    agent = args.agent.lower()
    if agent not in NET_AGENTS:
        raise UsageError(f"--agent must be one of {', '.join(NET_AGENTS)}")
    cfg = _config_from(args)
    if args.episodes is not None:
        cfg.train.episodes = args.episodes
    if args.seed is not None:
        cfg.train.seed = args.seed
    cfg.validate()
    maps = load_maps(args.maps)

    def progress(ep, ep_log, learner):
        if (ep + 1) % 25 == 0:
            log.info("episode %d return %.3f rate %.3f eps %.3f", ep + 1, ep_log.total_return,
                     ep_log.explored_rate, learner.epsilon)

    params, logs = train(maps, agent.upper(), cfg, progress)
    ckpt = Path(args.out)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    csv_path, manifest_path = _train_paths(ckpt)
    write_checkpoint(params, ckpt)
    write_episodes_csv(logs, csv_path)
    rec = {"agent": agent, "maps": str(Path(args.maps).resolve()), "episodes": cfg.train.episodes, "seed": cfg.train.seed}
    return write_manifest(manifest_path, "train", rec, cfg, cfg.train.seed, [ckpt, csv_path],
                          {"maps": _map_digests(args.maps)})


def _run_eval(agents, ckpts, args, command):
    _check_agents(agents)
    if args.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    cfg = _config_from(args)
    maps = load_maps(args.maps)
    nets = _load_nets(agents, ckpts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    svg_dir = Path(args.svg) if getattr(args, "svg", None) else None
    all_logs, outputs = [], []
    for name in agents:
        agent = make_agent(name, cfg, nets.get(name))
        logs = evaluate(maps, agent, cfg, args.episodes, args.seed, record_q=svg_dir is not None)
        all_logs.extend(logs)
        if svg_dir is not None:
            outputs += _write_svgs(svg_dir, name, logs, nets.get(name))
    episodes_path, summary_path = out / "episodes.csv", out / "summary.csv"
    write_episodes_csv(all_logs, episodes_path)
    write_summary_csv(aggregate(all_logs), summary_path)
    rec = {"agents": list(agents), "ckpts": {k: str(Path(v).resolve()) for k, v in ckpts.items()},
           "maps": str(Path(args.maps).resolve()),
           "episodes": args.episodes, "seed": args.seed, "svg": str(svg_dir) if svg_dir else None}
    inputs = {"maps": _map_digests(args.maps), "ckpts": {k: _digest(v) for k, v in ckpts.items()}}
    return write_manifest(out / MANIFEST_NAME, command, rec, cfg, args.seed,
                          [episodes_path, summary_path, *outputs], inputs)


def _write_svgs(svg_dir: Path, agent: str, logs, params) -> list:
    svg_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for lg in logs:
        stem = f"{agent}_ep{lg.episode_id:04d}"
        grid_path = svg_dir / f"{stem}_grid.svg"
        write_svg(render_grid_svg(lg.final_state), grid_path)
        traj_path = svg_dir / f"{stem}_trajectory.svg"
        write_svg(render_trajectory_svg(lg.final_state, lg.trajectory()), traj_path)
        files += [grid_path, traj_path]
        if lg.q_maps and params is not None:
            h, w = lg.final_state.shape
            s = params.stride
            q_path = svg_dir / f"{stem}_qmap.svg"
            write_svg(render_q_svg(lg.q_maps[-1], h // s, w // s, s), q_path)
            files.append(q_path)
    return files


def cmd_eval(args) -> dict:
    agent = args.agent.lower()
    return _run_eval([agent], _parse_ckpts(args.ckpt, [agent]), args, "eval")


def cmd_compare(args) -> dict:
    agents = [a.strip().lower() for a in args.agents.split(",") if a.strip()]
    if len(agents) < 2 or len(set(agents)) != len(agents):
        raise UsageError("--agents needs at least two distinct agents")
    return _run_eval(agents, _parse_ckpts(args.ckpt, agents), args, "compare")


def cmd_replay(args) -> dict:
    with open(args.manifest, encoding="utf-8") as f:
        m = json.load(f)
    rec, command = m["args"], m["command"]
    out = Path(args.out)
    if command == "gen-maps":
        ns = argparse.Namespace(out=str(out), rooms=rec["rooms"], **{k: rec[k] for k in (
            "count", "width", "height", "seed", "resolution", "door_width")})
        return cmd_gen_maps(ns)
    _check_inputs(m)
    if command == "train":
        ckpt = out / Path(m["outputs"][0]).name
        ns = argparse.Namespace(agent=rec["agent"], maps=rec["maps"], out=str(ckpt), episodes=rec["episodes"],
                                seed=rec["seed"], config=None, config_text=m["config"])
        return cmd_train(ns)
    if command in ("eval", "compare"):
        svg = str(out / "svg") if rec["svg"] else None
        ns = argparse.Namespace(maps=rec["maps"], episodes=rec["episodes"], seed=rec["seed"], out=str(out),
                                svg=svg, config=None, config_text=m["config"])
        return _run_eval(rec["agents"], rec["ckpts"], ns, command)
    raise UsageError(f"cannot replay command {command!r}")


def _check_inputs(manifest):
    inputs = manifest.get("inputs", {})
    maps_dir = manifest["args"].get("maps")
    if maps_dir and inputs.get("maps") and _map_digests(maps_dir) != inputs["maps"]:
        raise ValueError(f"maps in {maps_dir} changed since the manifest was written")
    for name, digest in inputs.get("ckpts", {}).items():
        path = manifest["args"]["ckpts"][name]
        if _digest(path) != digest:
            raise ValueError(f"checkpoint {path} changed since the manifest was written")


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gridexplore", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-maps", help="generate room-and-door maps")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--width", type=int, required=True)
    g.add_argument("--height", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--resolution", type=float, default=0.05)
    g.add_argument("--door-width", type=int, default=4)
    g.add_argument("--rooms", type=int, nargs=2, metavar=("MIN", "MAX"))
    g.set_defaults(func=cmd_gen_maps)

    t = sub.add_parser("train", help="train a network agent")
    t.add_argument("--agent", required=True, choices=NET_AGENTS, type=str.lower)
    t.add_argument("--config")
    t.add_argument("--maps", required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--episodes", type=int)
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="greedy evaluation of one agent")
    e.add_argument("--agent", required=True, choices=AGENTS, type=str.lower)
    e.add_argument("--ckpt", action="append")
    e.add_argument("--config")
    e.add_argument("--maps", required=True)
    e.add_argument("--episodes", type=int, required=True)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--out", default="eval_out")
    e.add_argument("--svg")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="paired evaluation of several agents")
    c.add_argument("--agents", required=True, help="comma-separated, e.g. frontier,afcqn")
    c.add_argument("--ckpt", action="append", help="agent=PATH, repeatable")
    c.add_argument("--config")
    c.add_argument("--maps", required=True)
    c.add_argument("--episodes", type=int, required=True)
    c.add_argument("--seed", type=int, required=True)
    c.add_argument("--out", default="compare_out")
    c.add_argument("--svg")
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("replay", help="re-run a manifest into a new output location")
    r.add_argument("manifest")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        args.func(args)
    except UsageError as exc:
        print(f"gridexplore: usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"gridexplore: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
