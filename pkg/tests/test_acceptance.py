"""Acceptance criteria C1-C10. Each test records one PASS/FAIL line, repeated
in the terminal summary. The training criteria are slow (tens of minutes)."""

import hashlib
import importlib
import time
import zlib

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from articulate import tensor as T
from articulate.active import (ActiveEnv, AgentConfig, EnvConfig, EnvState, dqn_train, greedy_policy, moving_average,
                               oracle_best_action)
from articulate.cli.commands import perceiver
from articulate.geom import JointParams, JointType, apply_transform, manipulation_matrix
from articulate.metrics import sample_errors
from articulate.percept import PerceptConfig, PerceptionModel
from articulate.synth import Dataset, DatasetConfig, make_dataset
from articulate.synth.render import N_VIEWPOINTS
from articulate.tensor.gradcheck import check
from articulate.train import (Stage, StageConfig, load_split, loss_ori, loss_para, loss_pos, movable_only, run_stage,
                              samples_from)

from op_cases import cases

cli_main = importlib.import_module("articulate.cli.main")


# ------------------------------------------------------------ C1 gradients

def _loss_cases():
    def ori_instance(rng):
        while True:
            gu = rng.normal(size=(2, 3))
            gu /= np.linalg.norm(gu, axis=1, keepdims=True)
            votes = rng.normal(size=(2, 5, 3))
            dots = np.einsum("bnk,bk->bn", votes, gu) / np.linalg.norm(votes, axis=-1)
            if np.abs(dots).max() < 0.999:  # stay off the clamped arccos ends
                return gu, votes

    def ori(rng):
        gu, votes = ori_instance(rng)
        return (lambda v: loss_ori(v, gu)), [votes]

    def pos(rng):
        gu, votes = ori_instance(rng)
        gh = rng.normal(size=(2, 3))
        return (lambda v: loss_pos(v, gh, gu)), [votes]
    return {"loss_ori": ori, "loss_pos": pos}


def test_c1_gradient_suite(criterion):
    t0 = time.perf_counter()
    worst, counts = {}, {}
    for name, (fn, make) in sorted(cases().items()):
        rng = np.random.default_rng(zlib.crc32(b"c1" + name.encode()))
        errs = [check(fn, make(rng), rng) for _ in range(100)]
        worst[name], counts[name] = max(errs), len(errs)
    for name, make in _loss_cases().items():
        rng = np.random.default_rng(zlib.crc32(b"c1" + name.encode()))
        errs = []
        for _ in range(100):
            fn, inputs = make(rng)
            errs.append(check(fn, inputs, rng))
        worst[name], counts[name] = max(errs), len(errs)
    elapsed = time.perf_counter() - t0
    bad = {k: v for k, v in worst.items() if not v < 1e-4}
    ok = not bad and min(counts.values()) >= 100 and elapsed < 60
    criterion("C1", ok, f"{len(worst)} functions x >=100 instances, worst rel err {max(worst.values()):.2e} "
                        f"({max(worst, key=worst.get)}), {elapsed:.1f} s; failing: {sorted(bad) or 'none'}")
    assert ok


# ------------------------------------------------------------ C2 geometry

def _oracle_transform(joint, command, pts):
    """Translate the axis to the origin, rotate (scipy), translate back; or slide along u."""
    dv = command - joint.state
    if joint.joint_type == JointType.PRISMATIC:
        return pts + dv * joint.orientation
    rot = Rotation.from_rotvec(dv * joint.orientation)
    return rot.apply(pts - joint.position) + joint.position


def test_c2_geometry_oracle(criterion):
    rng = np.random.default_rng(2024)
    worst = worst_trip = 0.0
    for _ in range(10_000):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        jt = JointType.PRISMATIC if rng.random() < 0.5 else JointType.REVOLUTE
        joint = JointParams(jt, rng.uniform(-2, 2, 3), u, float(rng.uniform(-np.pi, np.pi)))
        command = float(rng.uniform(-np.pi, np.pi))
        pts = rng.uniform(-2, 2, size=(8, 3))
        moved = apply_transform(manipulation_matrix(joint, command), pts)
        worst = max(worst, np.abs(moved - _oracle_transform(joint, command, pts)).max())
        at_target = JointParams(jt, joint.position, u, command)
        back = apply_transform(manipulation_matrix(at_target, joint.state), moved)
        worst_trip = max(worst_trip, np.abs(back - pts).max())
    ok = worst < 1e-10 and worst_trip < 1e-9
    criterion("C2", ok, f"10^4 transforms, max oracle error {worst:.2e} (< 1e-10), round trip {worst_trip:.2e} (< 1e-9)")
    assert ok


# -------------------------------------------------------- C3 loss identities

def test_c3_loss_identities(criterion):
    rng = np.random.default_rng(3)
    axes = [np.eye(3)[i] * s for i in range(3) for s in (1, -1)]
    gt_exact = max(loss_ori(np.tile(a, (4, 1)), a).item() for a in axes)
    generic, antipode, on_axis, slide = 0.0, 0.0, 0.0, 0.0
    for _ in range(200):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        h = rng.normal(size=3)
        generic = max(generic, loss_ori(np.tile(u, (6, 1)) * rng.uniform(0.1, 10, (6, 1)), u).item())
        antipode = max(antipode, abs(loss_ori(np.tile(-u, (6, 1)), u).item() - np.pi))
        on_axis = max(on_axis, loss_pos(h + rng.uniform(-3, 3, (6, 1)) * u, h, u).item())
        votes = rng.normal(size=(6, 3))
        t = rng.uniform(-10, 10)
        slide = max(slide, abs(loss_pos(votes, h + t * u, u).item() - loss_pos(votes, h, u).item()))
    m = PerceptionModel(PerceptConfig(K=8, n_points=32, resolution=16, heads=2))
    decomposition = 0.0
    for k in range(20):
        r = np.random.default_rng(100 + k)
        u = r.normal(size=(4, 3))
        gt = {"joint_type": r.integers(0, 2, 4), "h": r.normal(size=(4, 3)),
              "u": u / np.linalg.norm(u, axis=1, keepdims=True), "v": r.uniform(0, 1, 4)}
        pred = m(r.uniform(0, 1, (4, 16, 16, 3)), r.normal(size=(4, 32, 3)))
        total, rep = loss_para(pred, gt)
        decomposition = max(decomposition, abs(total.item() - (rep.l_type + rep.l_ori + rep.l_pos + rep.l_state)))
    # axis-aligned ground truth is exactly representable; a generic unit vector normalises to
    # within one ulp of itself, which arccos maps to ~1.5e-8 rad
    ok = (gt_exact == 0.0 and generic < 1e-7 and antipode < 1e-7 and on_axis < 1e-12 and slide < 1e-12
          and decomposition < 1e-12)
    criterion("C3", ok, f"L_ori at gt {gt_exact:.1e} (axis-aligned) / {generic:.1e} (generic); |L_ori - pi| at "
                        f"antipode {antipode:.1e}; L_pos on axis {on_axis:.1e}; slide {slide:.1e}; "
                        f"L_para decomposition {decomposition:.1e}")
    assert ok


# ------------------------------------------------------------ C4 symmetry

def test_c4_symmetry(criterion):
    cfg = PerceptConfig()
    m = PerceptionModel(cfg)
    rng = np.random.default_rng(4)
    rgb = rng.uniform(0, 1, (2, cfg.resolution, cfg.resolution, 3))
    cloud = rng.normal(size=(2, cfg.n_points, 3))
    perm = rng.permutation(cfg.n_points)
    with T.no_grad():
        a, b = m(rgb, cloud), m(rgb, cloud[:, perm])
    perm_err = max(np.abs(getattr(a, k).data - getattr(b, k).data).max()
                   for k in ("tau", "rho", "h", "u", "v", "gamma", "cls", "weights"))
    perm_err = max(perm_err, np.abs(a.votes.data[:, perm] - b.votes.data).max())
    wsum = 0.0
    for _ in range(200):
        for layer in m.theta_w.layers:
            layer.w.data = rng.normal(size=layer.w.shape) * 3
            layer.b.data = rng.normal(size=layer.b.shape)
        fbar = [T.Tensor(rng.normal(size=(3, cfg.K))) for _ in range(cfg.n_scales)]
        with T.no_grad():
            _, w = m.mldm_fuse(fbar, T.Tensor(rng.normal(size=(3, 8, cfg.K))))
        wsum = max(wsum, np.abs(w.data.sum(axis=1) - 1).max())
    single = PerceptionModel(PerceptConfig(n_scales=1))
    f = T.Tensor(rng.normal(size=(3, cfg.K)))
    with T.no_grad():
        fr, w1 = single.mldm_fuse([f], T.Tensor(rng.normal(size=(3, 8, cfg.K))))
    identity = np.array_equal(fr.data, f.data) and np.array_equal(w1.data, np.ones((3, 1)))
    ok = perm_err < 1e-9 and wsum < 1e-9 and identity
    criterion("C4", ok, f"permutation max diff {perm_err:.1e} (< 1e-9); MLDM weight-sum error {wsum:.1e} (< 1e-9); "
                        f"single-scale identity {identity}")
    assert ok


# ------------------------------------------------------- C5 / C6 overfit set

OVERFIT_DATA = DatasetConfig()  # 64 training scenes, half prismatic, a quarter immovable selections
OVERFIT_EPOCHS = (20, 120, 40)  # stages 1-3
ABLATION_EPOCHS = (5, 40)  # stages 1-2, matched between the two configurations
MINUTES = 60.0


@pytest.fixture(scope="module")
def overfit_set(tmp_path_factory):
    t0 = time.perf_counter()
    path = tmp_path_factory.mktemp("overfit")
    make_dataset(OVERFIT_DATA, path)
    ds = Dataset(path)
    return load_split(ds, "train"), time.perf_counter() - t0


def _train_errors(model, train):
    mv = movable_only(train)
    e = sample_errors(model.predict(mv.rgb, mv.cloud), mv.gt())
    rev = mv.joint_type == int(JointType.REVOLUTE)
    return e, rev


def test_c5_overfit(overfit_set, criterion):
    train, gen_seconds = overfit_set
    t0 = time.perf_counter()
    model = PerceptionModel(PerceptConfig())
    for stage, epochs in zip(Stage, OVERFIT_EPOCHS):
        run_stage(model, train, StageConfig(stage, epochs=epochs))
    wall = gen_seconds + time.perf_counter() - t0
    tau = model.predict(train.rgb, train.cloud)["tau"]
    mov_acc = 100 * np.mean((tau > 0.5) == (train.movable > 0.5))
    e, rev = _train_errors(model, train)
    type_acc = 100 * e["type_ok"].mean()
    ori = np.rad2deg(e["orientation"].mean())
    rev_state, pri_state = np.rad2deg(e["state"][rev].mean()), e["state"][~rev].mean()
    ok = (type_acc == 100 and mov_acc == 100 and ori < 5 and rev_state < 5 and pri_state < 0.05
          and wall < 15 * MINUTES)
    criterion("C5", ok, f"type acc {type_acc:.1f}%, movability acc {mov_acc:.1f}%, orientation {ori:.2f} deg, "
                        f"state {rev_state:.2f} deg (revolute) / {pri_state:.4f} (prismatic), "
                        f"{wall / MINUTES:.1f} min (epochs {OVERFIT_EPOCHS})")
    assert ok


def test_c6_mldm_ablation(overfit_set, criterion):
    train, _ = overfit_set
    rows = []
    for seed in range(3):
        ori = {}
        for use_mldm in (True, False):
            model = PerceptionModel(PerceptConfig(use_mldm=use_mldm, seed=seed))
            for stage, epochs in zip(Stage, ABLATION_EPOCHS):
                run_stage(model, train, StageConfig(stage, epochs=epochs, seed=seed))
            e, _ = _train_errors(model, train)
            ori[use_mldm] = np.rad2deg(e["orientation"].mean())
        rows.append(ori)
    holds = [r[False] >= r[True] for r in rows]
    ok = sum(holds) >= 2
    detail = ", ".join(f"seed {i}: {r[True]:.2f} vs {r[False]:.2f}" for i, r in enumerate(rows))
    criterion("C6", ok, f"orientation deg full vs no-MLDM ({detail}); ablation >= full on {sum(holds)}/3 "
                        f"(epochs {ABLATION_EPOCHS})")
    assert ok


# ------------------------------------------------------- C7-C9 active sensing

# a larger, lower-resolution training set so the frozen perception generalises to unseen scenes
ACTIVE_DATA = DatasetConfig(train=768, val=256, test=0, seed=7, resolution=32, n_points=128)
ACTIVE_MODEL = PerceptConfig(resolution=32, n_points=128)
ACTIVE_EPOCHS = (10, 40, 40)
ACTIVE_ENV = EnvConfig(resolution=32, n_points=128)
ACTIVE_AGENT = AgentConfig(n_train_scenes=512, lr=3e-4)
HELD_OUT = range(0, 2**30)  # training scenes are drawn from [2**30, 2**31)


@pytest.fixture(scope="module")
def active_run(tmp_path_factory):
    path = tmp_path_factory.mktemp("active")
    make_dataset(ACTIVE_DATA, path)
    ds = Dataset(path)
    model = PerceptionModel(ACTIVE_MODEL)
    train = load_split(ds, "train")
    for stage, epochs in zip(Stage, ACTIVE_EPOCHS):
        if stage == Stage.SCORING:
            ids = ds.split("train") + ds.split("val")
            train = samples_from((ds[i] for i in ids), ids)
        run_stage(model, train, StageConfig(stage, epochs=epochs))
    env = ActiveEnv(perceiver(model), ACTIVE_ENV)
    t0 = time.perf_counter()
    net, episodes = dqn_train(env, ACTIVE_AGENT)
    return env, net, episodes, time.perf_counter() - t0


def test_c7_reward_curve(active_run, criterion):
    _, _, episodes, seconds = active_run
    ma = moving_average([e.reward for e in episodes], window=100)
    q = len(ma) // 4
    first, last = ma[:q].mean(), ma[-q:].mean()
    ok = len(episodes) == 2000 and last > first and seconds < 20 * MINUTES
    criterion("C7", ok, f"100-episode moving average {first:.3f} (first quarter) -> {last:.3f} (last quarter) over "
                        f"{len(episodes)} episodes, {seconds / MINUTES:.1f} min")
    assert ok


def test_c8_oracle_match(active_run, criterion):
    env, net, _, _ = active_run
    policy = greedy_policy(net)
    eligible = one_step = whole = 0
    seeds = iter(HELD_OUT)
    while eligible < 100:
        state = env.reset(next(seeds))
        if oracle_best_action(env, state)[1] <= 0.5:
            continue
        eligible += 1
        one_step += env.view(state.scene_seed, policy(state)).score > 0.5
        s = state
        while not s.done:
            s, _, _, _ = env.step(s, policy(s))
        whole += s.cause == "success"
    scanned = next(seeds)
    # masking over 10^4 states built from held-out views with random reachability
    rng = np.random.default_rng(8)
    feats = [v.cls for (seed, _), v in env._views.items() if seed < 2**30]
    violations = 0
    for _ in range(10_000):
        mask = np.ones(N_VIEWPOINTS, bool)
        mask[rng.choice(N_VIEWPOINTS, size=int(rng.integers(0, 5)), replace=False)] = False
        pos = int(rng.choice(np.flatnonzero(mask)))
        s = EnvState(0, feats[int(rng.integers(len(feats)))], pos, mask, 0, 0.0, 0)
        violations += not mask[policy(s)]
    ok = one_step >= 90 and violations == 0
    criterion("C8", ok, f"one-move success on {one_step}/100 oracle-solvable held-out episodes (>= 90 required; "
                        f"{whole}/100 within the 5-step episode; {scanned} scenes scanned); "
                        f"mask violations {violations}/10000")
    assert ok


def test_c9_active_sensing_benefit(active_run, criterion):
    env, net, _, _ = active_run
    policy = greedy_policy(net)
    rows = []
    for seed in range(200):
        state = env.reset(seed)
        if state.score > 0.5:
            continue
        before, after = env.view(seed, state.position), env.view(seed, policy(state))
        rows.append((int(before.gt.joint_type), abs(float(before.pred["v"]) - before.gt.state),
                     abs(float(after.pred["v"]) - after.gt.state)))
    r = np.array(rows)
    parts, ok = [], len(r) > 0
    for jt, unit in ((JointType.REVOLUTE, "rad"), (JointType.PRISMATIC, "m")):
        sel = r[:, 0] == int(jt)
        b, a = np.median(r[sel, 1]), np.median(r[sel, 2])
        ok = ok and sel.any() and a < b
        parts.append(f"{jt.name.lower()} n={sel.sum()} median {b:.4f} -> {a:.4f} {unit} "
                     f"(reduction {100 * (1 - a / b):.1f}%)")
    criterion("C9", ok, "one sensing step from low-score starts: " + "; ".join(parts))
    assert ok


# ---------------------------------------------------------- C10 determinism

DETERMINISM_CFG = """\
resolution = 32
n_points = 64
train_size = 16
val_size = 4
test_size = 4
K = 8
heads = 2
layers = 1
epochs_stage1 = 2
epochs_stage2 = 2
epochs_stage3 = 2
episodes = 30
n_train_scenes = 4
eps_frames = 50
dqn_batch = 16
target_sync = 20
"""


def _tree_digest(root):
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_c10_determinism(tmp_path, criterion):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(DETERMINISM_CFG)
    digests = []
    for run in ("a", "b"):
        root = tmp_path / run
        for args in (["gen-data"], ["train", "--stage", "1"], ["train", "--stage", "2"], ["train", "--stage", "3"],
                     ["train-dqn"]):
            assert cli_main.main([*args, "--config", str(cfg), "--runs", str(root)]) == 0
        digests.append(_tree_digest(root))
    same = digests[0] == digests[1]
    names = sorted(digests[0])
    ok = same and any(n.endswith("policy.ntar") for n in names) and any(n.endswith("percept_stage3.ntar") for n in names)
    criterion("C10", ok, f"{len(names)} artifacts (dataset, 3 stage checkpoints, metrics/reward logs, policy) "
                         f"byte-identical across two runs: {same}")
    assert ok
