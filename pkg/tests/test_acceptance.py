"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that the terminal summary prints under
"acceptance criteria". Criteria 8 to 11 share one AFCQN training run (about
ten minutes on a desktop CPU).
"""

import json
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE, random_belief
from gridexplore.agent import FrontierAgent, NetAgent, RunConfig, parse_config, run_episode, td_targets
from gridexplore.agent.mdp import encode_state
from gridexplore.agent.trainer import evaluate, make_agent, start_pose, train
from gridexplore.cli import main as cli_main
from gridexplore.frontier import detect_frontiers, frontier_policy, segmentation_target
from gridexplore.mapping import (FREE, OCCUPIED, UNKNOWN, LidarConfig, OccupancyGrid, Pose, entropy,
                                 explored_region_rate, observe)
from gridexplore.nn import layers as L
from gridexplore.nn.checkpoint import read_checkpoint, save_checkpoint, write_checkpoint
from gridexplore.nn.network import (NetConfig, NetOutput, OutputGrads, ShapeMismatch, backward,
                                    combine_dueling, forward, init_params, q_values)
from gridexplore.planning import astar, execute_path
from gridexplore.rng import rng_for
from gridexplore.world import MapGenConfig, WorldMap, generate_world
from oracles import (brute_clear, brute_frontiers, brute_seg, exact_dijkstra, numeric_grad, path_octile,
                     rel_err, value_iteration)

TRAIN_CONFIG = """\
episodes = 300
epsilon_decay_steps = 3000
learning_rate = 0.001
target_sync = 200
seed = 0
"""
EVAL_SEED = 123
HELD_OUT_SEED = 999


@contextmanager
def criterion(n, title):
    """Record PASS/FAIL for criterion ``n``; ``detail`` collects measured values."""
    detail = {}
    try:
        yield detail
    except BaseException:
        ACCEPTANCE[n] = (title, False, _fmt(detail))
        print(f"criterion {n} FAIL {title} {_fmt(detail)}")
        raise
    ACCEPTANCE[n] = (title, True, _fmt(detail))
    print(f"criterion {n} PASS {title} {_fmt(detail)}")


def _fmt(detail):
    return " ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in detail.items())


# --- shared AFCQN training run ----------------------------------------------------------------

@pytest.fixture(scope="session")
def trained():
    world = generate_world(MapGenConfig(32, 32, seed=3, room_count_range=(2, 3)))
    cfg = parse_config(TRAIN_CONFIG)
    t0 = time.perf_counter()
    params, logs = train([("train", world)], "AFCQN", cfg)
    return {"world": world, "cfg": cfg, "params": params, "logs": logs, "seconds": time.perf_counter() - t0}


# --- 1 ---------------------------------------------------------------------------------------

def test_criterion_01_astar_matches_dijkstra():
    with criterion(1, "A* cost equals exact Dijkstra on 200 random 15x15 grids, < 5 s") as d:
        t0 = time.perf_counter()
        mismatches = unreachable = 0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            state = rng.choice([FREE, OCCUPIED, UNKNOWN], size=(15, 15), p=[0.7, 0.15, 0.15]).astype(np.int8)
            clearance = int(rng.integers(1, 3))
            free = np.argwhere(state == FREE)
            sy, sx = (int(v) for v in free[rng.integers(len(free))])
            gy, gx = (int(v) for v in free[rng.integers(len(free))])
            ok = brute_clear(state, clearance)
            ok[sy, sx] = True
            expected = exact_dijkstra(ok, (sx, sy), (gx, gy))
            path = astar(OccupancyGrid.from_states(state), (sx, sy), (gx, gy), clearance=clearance)
            if expected is None:
                unreachable += 1
                mismatches += path is not None
            elif path is None or path_octile(path.cells) != expected \
                    or not math.isclose(path.total_cost, float(expected), abs_tol=1e-9):
                mismatches += 1
        d["seconds"] = time.perf_counter() - t0
        d["mismatches"], d["unreachable"] = mismatches, unreachable
        assert mismatches == 0
        assert d["seconds"] < 5.0


# --- 2 ---------------------------------------------------------------------------------------

def test_criterion_02_frontiers_and_labels_match_definitions():
    with criterion(2, "frontiers and segmentation labels match per-cell oracles on 100 random 20x20 grids") as d:
        bad_f = bad_s = 0
        for seed in range(100):
            grid = random_belief(np.random.default_rng(50_000 + seed), 20, 20)
            bad_f += detect_frontiers(grid) != brute_frontiers(grid.state)
            bad_s += not np.array_equal(segmentation_target(grid), brute_seg(grid.state))
        d["frontier_mismatches"], d["label_mismatches"] = bad_f, bad_s
        assert bad_f == 0 and bad_s == 0


# --- 3 ---------------------------------------------------------------------------------------

SMALL_NET = NetConfig(enc_channels=(4, 8, 8), fc_hidden=8, dec_hidden=4, dqn_hidden=8)


def _layer_errors(rng):
    """Per-entry relative error of every layer's backward pass against central differences."""
    errs = {}

    def check(name, fwd, bwd, inputs):
        out = fwd(*inputs)
        r = rng.normal(size=out.shape)
        grads = bwd(r)
        worst = 0.0
        for x, g in zip(inputs, grads):
            num = numeric_grad(lambda: float((fwd(*inputs) * r).sum()), x)
            worst = max(worst, rel_err(g.reshape(-1), num).max())
        errs[name] = worst

    x, w, b = rng.normal(size=(2, 2, 7, 6)), rng.normal(size=(3, 2, 3, 3)), rng.normal(size=3)
    held = {}

    def conv(x, w, b):
        out, held["conv"] = L.conv2d_forward(x, w, b, 2)
        return out
    conv(x, w, b)
    check("conv", conv, lambda dout: L.conv2d_backward(dout, w, held["conv"]), [x, w, b])

    xd, wd, bd = rng.normal(size=(2, 2, 3, 3)), rng.normal(size=(2, 3, 4, 4)), rng.normal(size=3)

    def deconv(x, w, b):
        out, held["deconv"] = L.deconv2d_forward(x, w, b, 2, 1)
        return out
    deconv(xd, wd, bd)
    check("deconv", deconv, lambda dout: L.deconv2d_backward(dout, wd, held["deconv"]), [xd, wd, bd])

    xl, wl, bl = rng.normal(size=(4, 5)), rng.normal(size=(5, 3)), rng.normal(size=3)
    check("linear", lambda x, w, b: L.linear_forward(x, w, b)[0], lambda dout: L.linear_backward(dout, wl, xl),
          [xl, wl, bl])

    xa = rng.normal(size=(2, 3, 4, 4))
    check("leaky_relu", lambda x: L.leaky_relu_forward(x)[0], lambda dout: [L.leaky_relu_backward(dout, xa)], [xa])
    _, pool_cache = L.global_maxpool_forward(xa)
    check("maxpool", lambda x: L.global_maxpool_forward(x)[0],
          lambda dout: [L.global_maxpool_backward(dout, pool_cache)], [xa])

    m, t, v = rng.normal(size=(2, 3, 3)), rng.normal(size=2), rng.normal(size=2)
    check("dueling", L.dueling_forward, lambda dout: L.dueling_backward(dout, m.shape), [m, t, v])

    q = rng.normal(size=(4, 6))
    acts, tgt = rng.integers(0, 6, size=4), rng.normal(size=4)
    num = numeric_grad(lambda: L.td_mse_loss(q, acts, tgt)[0], q)
    errs["td_loss"] = rel_err(L.td_mse_loss(q, acts, tgt)[1].reshape(-1), num).max()
    logits, labels = rng.normal(size=(2, 3, 4, 5)), rng.integers(0, 3, size=(2, 4, 5))
    num = numeric_grad(lambda: L.softmax_xent_loss(logits, labels)[0], logits)
    errs["seg_loss"] = rel_err(L.softmax_xent_loss(logits, labels)[1].reshape(-1), num).max()
    return errs


def _network_errors(variant, rng):
    """Relative error ||a - n|| / max(||a||, ||n||) per parameter tensor, every entry checked."""
    params = init_params(variant, rng, SMALL_NET, input_hw=(16, 16) if variant == "DQN" else None,
                         dtype=np.float64)
    for tensor in params.tensors.values():
        tensor += rng.normal(scale=0.05, size=tensor.shape)
    size = sum(tensor.size for tensor in params.tensors.values())
    x = rng.normal(size=(2, 3, 16, 16))
    out, cache = forward(params, x)
    q = combine_dueling(out)
    acts, tgt = rng.integers(0, q.shape[1], size=2), rng.normal(size=2)
    labels = rng.integers(0, 3, size=(2, 16, 16))
    seg = variant == "AFCQN"

    def loss():
        o, _ = forward(params, x)
        val = L.td_mse_loss(combine_dueling(o), acts, tgt)[0]
        return val + (0.5 * L.softmax_xent_loss(o.seg_logits, labels)[0] if seg else 0.0)

    d_seg = 0.5 * L.softmax_xent_loss(out.seg_logits, labels)[1] if seg else None
    grads = backward(params, cache, OutputGrads(d_q=L.td_mse_loss(q, acts, tgt)[1], d_seg=d_seg))
    worst = 0.0
    for name, tensor in params.tensors.items():
        a, num = grads[name].reshape(-1), numeric_grad(loss, tensor)
        worst = max(worst, np.linalg.norm(a - num) / max(np.linalg.norm(a), np.linalg.norm(num), 1e-300))
    return size, worst


def test_criterion_03_gradients_match_finite_differences():
    with criterion(3, "layer and network gradients match 64-bit finite differences, rel err < 1e-4, < 60 s") as d:
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        layer = _layer_errors(rng)
        d["worst_layer"] = max(layer.values())
        sizes = {}
        for variant in ("DQN", "FCQN", "AFCQN"):
            sizes[variant], d[f"{variant}_err"] = _network_errors(variant, rng)
        d["max_params"] = max(sizes.values())
        d["seconds"] = time.perf_counter() - t0
        assert all(e < 1e-4 for e in layer.values()), layer
        assert all(d[f"{v}_err"] < 1e-4 for v in sizes)
        assert d["max_params"] <= 10_000
        assert d["seconds"] < 60.0


# --- 4 ---------------------------------------------------------------------------------------

def test_criterion_04_entropy_and_rate_are_monotone():
    with criterion(4, "entropy non-increasing, explored rate non-decreasing over 20 scripted episodes") as d:
        cfg = RunConfig()
        steps = violations = 0
        for ep in range(20):
            world = generate_world(MapGenConfig(48, 48, seed=100 + ep))
            start = start_pose(world, 7, ep)
            log = run_episode(world, FrontierAgent(), cfg, "eval", start=start, episode_id=ep)
            blank = OccupancyGrid.for_world(world)
            violations += log.entropy_start > entropy(blank)
            h, rate = log.entropy_start, explored_region_rate(blank, world)
            for s in log.steps:
                steps += 1
                violations += s.entropy_after > h + 1e-12 or s.rho_after < rate - 1e-12
                h, rate = s.entropy_after, s.rho_after
        h_unknown = entropy(OccupancyGrid(10, 10, 0.05))
        d["steps"], d["violations"] = steps, violations
        d["unknown_entropy_err"] = abs(h_unknown - 100 * math.log(2))
        assert violations == 0
        assert d["unknown_entropy_err"] <= 1e-9


# --- 5 ---------------------------------------------------------------------------------------

def test_criterion_05_dueling_identity():
    with criterion(5, "sum over actions of (Q - V) is 0 on 1000 random network outputs") as d:
        rng = np.random.default_rng(5)
        worst = 0.0
        for k in range(1000):
            rows, cols = int(rng.integers(1, 13)), int(rng.integers(1, 13))
            scale = 10.0 ** rng.uniform(-3, 3)
            out = NetOutput(adv_map=rng.normal(size=(2, rows, cols)) * scale, adv_terminal=rng.normal(size=2) * scale,
                            state_value=rng.normal(size=2) * scale)
            q = combine_dueling(out)
            worst = max(worst, np.abs((q - out.state_value[:, None]).sum(axis=1)).max())
        params = init_params("AFCQN", rng)
        for tensor in params.tensors.values():
            tensor += rng.normal(scale=0.1, size=tensor.shape).astype(tensor.dtype)
        x = rng.integers(0, 3, size=(4, 3, 64, 64)) / 2
        out, _ = forward(params, x)
        net_q = q_values(params, x)
        worst = max(worst, float(np.abs((net_q - out.state_value[:, None]).sum(axis=1)).max()))
        d["worst"] = worst
        assert worst < 1e-6


# --- 6 ---------------------------------------------------------------------------------------

def test_criterion_06_tiny_mdp_converges():
    with criterion(6, "TD iteration reaches the value-iteration Q* within 1e-3 on a 2-state/2-action MDP") as d:
        # action 0 stays, action 1 switches; switching from state 1 pays 2
        rewards = [[0.0, 1.0], [0.5, 2.0]]
        nxt = [[0, 1], [1, 0]]
        gamma = 0.9
        q_star = value_iteration(rewards, nxt, gamma)
        q = np.zeros((2, 2))
        r, n = np.array(rewards).ravel(), np.array(nxt).ravel()
        for _ in range(300):
            q = td_targets(r, np.zeros(4, bool), q[n], gamma).reshape(2, 2)
        d["max_err"] = float(np.abs(q - q_star).max())
        assert d["max_err"] < 1e-3


# --- 7 ---------------------------------------------------------------------------------------

def test_criterion_07_frontier_baseline_quality():
    with criterion(7, "nearest-frontier agent mean explored rate >= 0.90 over 20 episodes on 64x64 maps, < 2 min") as d:
        t0 = time.perf_counter()
        cfg = RunConfig()
        maps = [(f"map_{k}", generate_world(MapGenConfig(64, 64, seed=k))) for k in range(20)]
        logs = evaluate(maps, make_agent("frontier", cfg), cfg, 20, 0, threads=0)
        d["mean_rate"] = float(np.mean([lg.explored_rate for lg in logs]))
        d["seconds"] = time.perf_counter() - t0
        assert d["mean_rate"] >= 0.90
        assert d["seconds"] < 120.0


# --- 8 ---------------------------------------------------------------------------------------

def test_criterion_08_learning_signal(trained):
    with criterion(8, "AFCQN 300 episodes: last-50 return > first-50, greedy rate >= 0.75 on 20 paired starts") as d:
        ret = np.array([lg.total_return for lg in trained["logs"]])
        d["first50"], d["last50"] = float(ret[:50].mean()), float(ret[-50:].mean())
        d["train_seconds"] = trained["seconds"]
        cfg, maps = trained["cfg"], [("train", trained["world"])]
        net_logs = evaluate(maps, make_agent("afcqn", cfg, trained["params"]), cfg, 20, EVAL_SEED, threads=0)
        ref_logs = evaluate(maps, make_agent("frontier", cfg), cfg, 20, EVAL_SEED, threads=0)
        assert [lg.start for lg in net_logs] == [lg.start for lg in ref_logs]
        d["eval_rate"] = float(np.mean([lg.explored_rate for lg in net_logs]))
        d["frontier_rate"] = float(np.mean([lg.explored_rate for lg in ref_logs]))
        assert len(ret) == 300
        assert d["last50"] > d["first50"]
        assert d["eval_rate"] >= 0.75
        assert d["train_seconds"] < 30 * 60


# --- 9 ---------------------------------------------------------------------------------------

def _held_out_snapshots(world, count):
    """Belief snapshots from starts the training run never used, after 0 to 3 frontier moves."""
    lidar = LidarConfig()
    rng = rng_for(HELD_OUT_SEED, "start-pose")
    for _ in range(count):
        cells = world.free_cells()
        x, y = cells[rng.integers(len(cells))]
        pose = Pose(int(x), int(y))
        grid = observe(world, OccupancyGrid.for_world(world), pose, lidar)
        for _ in range(int(rng.integers(0, 4))):
            action, _ = frontier_policy(grid, pose)
            path = None if action.is_terminal else astar(grid, pose, action.goal)
            if path is None:
                break
            grid, pose, _ = execute_path(world, grid, path, lidar)
        yield grid, pose


def test_criterion_09_segmentation_head(trained):
    with criterion(9, "segmentation pixel accuracy >= 0.90 on 20 held-out snapshots") as d:
        accs = []
        for grid, pose in _held_out_snapshots(trained["world"], 20):
            out, _ = forward(trained["params"], encode_state(grid, pose))
            accs.append(float((out.seg_logits[0].argmax(0) == segmentation_target(grid)).mean()))
        d["mean_accuracy"], d["min_accuracy"] = float(np.mean(accs)), min(accs)
        assert d["mean_accuracy"] >= 0.90


# --- 10 --------------------------------------------------------------------------------------

def test_criterion_10_size_adaptivity(trained, tmp_path):
    with criterion(10, "trained AFCQN gives 65 and 145 actions on 64x64 and 96x96; DQN rejects a size change") as d:
        ckpt = tmp_path / "afcqn.ckpt"
        write_checkpoint(trained["params"], ckpt)
        params = read_checkpoint(ckpt, expected_variant="AFCQN")
        before = save_checkpoint(params)
        for side, expected in ((64, 65), (96, 145)):
            world = generate_world(MapGenConfig(side, side, seed=side))
            pose = start_pose(world, 0, 0)
            grid = observe(world, OccupancyGrid.for_world(world), pose, LidarConfig())
            q = q_values(params, encode_state(grid, pose))
            d[f"actions_{side}"] = q.shape[1]
            assert q.shape == (1, expected) and np.isfinite(q).all()
        assert save_checkpoint(params) == before
        dqn = init_params("DQN", np.random.default_rng(0), input_hw=(64, 64))
        assert q_values(dqn, np.zeros((1, 3, 64, 64))).shape == (1, 65)
        with pytest.raises(ShapeMismatch):
            forward(dqn, np.zeros((1, 3, 96, 96)))
        d["dqn_rejects"] = True


# --- 11 --------------------------------------------------------------------------------------

def test_criterion_11_frontier_stall_regression(trained):
    with criterion(11, "frontier policy stalls when the sole centroid is the robot cell; AFCQN keeps going") as d:
        # open room larger than the lidar range: the first scan leaves one ring of
        # frontier cells whose centroid is the robot cell
        occ = np.zeros((160, 160), dtype=bool)
        occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
        world, pose = WorldMap(occ), Pose(80, 80)
        grid = observe(world, OccupancyGrid.for_world(world), pose, LidarConfig())
        action, stall = frontier_policy(grid, pose)
        assert stall and action.is_terminal
        cfg = trained["cfg"]
        ref = run_episode(world, FrontierAgent(), cfg, "eval", start=pose)
        assert ref.terminated_by == "stall" and len(ref.steps) == 1
        log = run_episode(world, NetAgent(trained["params"], "afcqn"), cfg, "eval", np.random.default_rng(0),
                          start=pose, epsilon=0.0)
        d["afcqn_steps"], d["afcqn_end"] = len(log.steps), log.terminated_by
        assert log.steps[0].classification != "stall"
        assert log.terminated_by != "stall"
        assert len(log.steps) > 1


# --- 12 --------------------------------------------------------------------------------------

FAST_TRAIN = "episodes = 4\nmax_decisions = 6\nlearn_start = 8\nbatch_size = 4\nbuffer_capacity = 64\n"


def _outputs(manifest):
    return sorted(json.loads(Path(manifest).read_text())["outputs"], key=lambda p: Path(p).name)


def test_criterion_12_replay_is_byte_identical(tmp_path):
    with criterion(12, "every command replayed from its manifest reproduces all outputs byte for byte") as d:
        def run(*argv):
            assert cli_main([str(a) for a in argv]) == 0

        cfg = tmp_path / "fast.cfg"
        cfg.write_text(FAST_TRAIN)
        maps, ckpt = tmp_path / "maps", tmp_path / "ckpt" / "afcqn.ckpt"
        run("gen-maps", "--count", 2, "--width", 32, "--height", 32, "--seed", 11, "--out", maps)
        run("train", "--agent", "afcqn", "--config", cfg, "--maps", maps, "--out", ckpt)
        run("eval", "--agent", "afcqn", "--ckpt", ckpt, "--config", cfg, "--maps", maps, "--episodes", 3,
            "--seed", 4, "--out", tmp_path / "eval", "--svg", tmp_path / "eval" / "svg")
        run("compare", "--agents", "frontier,afcqn", "--ckpt", f"afcqn={ckpt}", "--config", cfg, "--maps", maps,
            "--episodes", 3, "--seed", 5, "--out", tmp_path / "cmp", "--svg", tmp_path / "cmp" / "svg")
        manifests = {"gen-maps": maps / "manifest.json", "train": ckpt.with_name(ckpt.name + ".manifest.json"),
                     "eval": tmp_path / "eval" / "manifest.json", "compare": tmp_path / "cmp" / "manifest.json"}
        files = differing = 0
        kinds = set()
        for command, manifest in manifests.items():
            out = tmp_path / f"replay_{command}"
            run("replay", manifest, "--out", out)
            replayed = out / Path(manifest).name
            originals, copies = _outputs(manifest), _outputs(replayed)
            assert [Path(p).name for p in originals] == [Path(p).name for p in copies]
            for a, b in zip(originals, copies):
                files += 1
                kinds.add(Path(a).suffix)
                differing += Path(a).read_bytes() != Path(b).read_bytes()
        d["files"], d["differing"], d["kinds"] = files, differing, ",".join(sorted(kinds))
        assert {".ckpt", ".csv", ".svg", ".txt"} <= kinds
        assert differing == 0
