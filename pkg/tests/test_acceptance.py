"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict that is printed in the terminal summary
(and immediately with ``-s``).  Criteria that need the public benchmark files
look for them in ``$DQPGO_DATA`` (default ``<repo>/data``) and fail with an
explanation when they are absent.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, DATA, dataset_dir, find_any, random_graph, random_spd
from dqpgo import chordal, cli, dq, optimizer as opt
from dqpgo.graph import PoseGraph
from dqpgo.graphio import load_graph, parse_graph, write_graph
from dqpgo.metrics import g2o_cost, rpe
from dqpgo.synth import NoiseSpec, make_ring, perturb

DATASETS = {
    "CSAIL": ("csail",),
    "FR079": ("fr079",),
    "M3500": ("m3500", "manhattanolson3500"),
}

# g2o cost after 10 iterations from the file's poses: (identity information, file information)
REFERENCE_COSTS = {"CSAIL": (1.07e-1, 3.90e1), "FR079": (7.19e-2, 3.76e1), "M3500": (3.02e0, 1.38e2)}


def verdict(number, passed, detail):
    ACCEPTANCE.append((number, bool(passed), detail))
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
    if not passed:
        pytest.fail(f"criterion {number}: {detail}", pytrace=False)


def require(number, name):
    path = find_any(*DATASETS[name])
    if path is None:
        verdict(number, False, f"dataset {name} not found in {dataset_dir()} (set DQPGO_DATA)")
    return load_graph(path)


def consistent(g):
    return g.with_measurements(z=dq.compose(dq.inverse(g.nodes[g.edge_i]), g.nodes[g.edge_j]))


# --- 1 -------------------------------------------------------------------

def test_criterion_1_reference_costs():
    rows, ok = [], True
    graphs = {name: require(1, name) for name in DATASETS}
    cfg = opt.SolverConfig(fixed_iterations=10)
    for name, g in graphs.items():
        for label, graph, ref in (("I", g.with_identity_information(), REFERENCE_COSTS[name][0]),
                                  ("Omega", g, REFERENCE_COSTS[name][1])):
            out, _ = opt.optimize(graph, cfg)
            cost = g2o_cost(out)
            rel = abs(cost - ref) / ref
            ok &= rel <= 0.05
            rows.append(f"{name}/{label} {cost:.3e} vs {ref:.2e} ({100 * rel:.1f}%)")
    verdict(1, ok, "; ".join(rows))


# --- 2 -------------------------------------------------------------------

def noisy_benchmark(g, sigma, seed):
    """Ground truth from the optimized benchmark; measurements re-drawn around it."""
    truth, _ = opt.optimize(g, opt.SolverConfig(fixed_iterations=30))
    truth = consistent(truth)
    return truth, perturb(truth, NoiseSpec(sigma, seed))


def test_criterion_2_synthetic_noise_protocol():
    g = require(2, "M3500")
    truth, noisy = noisy_benchmark(g, 0.0224 * np.eye(3), seed=1)
    cfg = opt.SolverConfig(fixed_iterations=30)
    odo = chordal.odometry_initialize(noisy)
    from_odo, _ = opt.optimize(odo, cfg)
    from_chord, _ = opt.optimize(chordal.initialize(noisy), cfg)
    before, after = rpe(odo, truth), rpe(from_odo, truth)
    rt, rr = before.e_t / after.e_t, before.e_r / after.e_r
    c_odo, c_chord = opt.total_cost(from_odo), opt.total_cost(from_chord)
    gap = abs(c_chord - c_odo) / c_odo
    ok = rt >= 5 and rr >= 5 and gap <= 0.01
    verdict(2, ok, f"e_t {before.e_t:.3g}->{after.e_t:.3g} ({rt:.1f}x), "
                   f"e_r {before.e_r:.3g}->{after.e_r:.3g} deg ({rr:.1f}x), "
                   f"chordal vs odometry cost {c_chord:.4g} vs {c_odo:.4g} ({100 * gap:.2f}%)")


# --- 3 -------------------------------------------------------------------

def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def test_criterion_3_kernel_properties():
    n = 10_000
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    x, y, w = dq.random_poses(rng, (3, n), 20.0)
    errs = {}

    errs["log/exp at identity"] = np.abs(dq.log_identity(dq.exp_identity(dq.log_identity(x)))
                                         - dq.log_identity(x)).max()
    errs["exp/log at identity"] = np.abs(dq.log_at(x, dq.exp_identity(dq.log_identity(x)))).max()
    # based maps: y -> Log_x(y) -> Exp_x, and tangent v -> Exp_x(v) -> Log_x
    errs["exp_x(log_x(y))"] = np.abs(dq.log_at(y, dq.exp_at(x, dq.log_at(x, y)))).max()
    v = np.einsum("nij,nj->ni", dq.tangent_basis(x), rng.uniform(-1.5, 1.5, (n, 3)))
    errs["log_x(exp_x(v))"] = np.abs(dq.log_at(x, dq.exp_at(x, v)) - v).max()

    P = dq.tangent_projection(x)
    errs["projection symmetry"] = np.abs(P - np.swapaxes(P, 1, 2)).max()
    errs["projection idempotence"] = np.abs(P @ P - P).max()
    rank = np.linalg.matrix_rank(P, tol=1e-12)
    errs["projection rank"] = float(np.any(rank != 3))

    direct = dq.multiply(x, y)
    errs["left product"] = np.abs(np.einsum("nij,nj->ni", dq.left_matrix(x), y) - direct).max()
    errs["right product"] = np.abs(np.einsum("nij,nj->ni", dq.right_matrix(y), x) - direct).max()
    xyz = dq.compose(dq.compose(x, y), w)
    errs["pose composition"] = np.abs(dq.log_at(xyz, dq.compose(x, dq.compose(y, w)))).max()

    theta, t = dq.to_pose(x)
    pts = rng.uniform(-20, 20, (n, 2))
    expected = np.einsum("nij,nj->ni", rotation(theta), pts) + t
    errs["point transform"] = np.abs(dq.transform_point(x, pts) - expected).max() / 40.0

    elapsed = time.perf_counter() - start
    limits = {k: 1e-10 if "identity" in k and "log" in k or "exp/" in k else 1e-12 for k in errs}
    limits["exp_x(log_x(y))"] = limits["log_x(exp_x(v))"] = 1e-9
    limits["pose composition"] = 1e-12
    bad = [f"{k}={errs[k]:.1e}" for k in errs if not errs[k] <= limits[k]]
    worst = max(errs, key=lambda k: errs[k] / limits[k])
    verdict(3, not bad and elapsed < 10,
            f"{n} cases in {elapsed:.2f}s; worst {worst} {errs[worst]:.1e}"
            + (f"; over limit: {', '.join(bad)}" if bad else ""))


# --- 4 -------------------------------------------------------------------

def fd_reduced_jacobians(xi, xj, z, h=1e-6):
    """Columns d e / d(tangent-basis coordinate) through exp_at, by central differences."""
    out = []
    for which, x in ((0, xi), (1, xj)):
        B = dq.tangent_basis(x)
        cols = []
        for c in range(3):
            plus, minus = dq.exp_at(x, h * B[:, c]), dq.exp_at(x, -h * B[:, c])
            args_p = (plus, xj) if which == 0 else (xi, plus)
            args_m = (minus, xj) if which == 0 else (xi, minus)
            cols.append((opt.edge_error(*args_p, z) - opt.edge_error(*args_m, z)) / (2 * h))
        out.append(np.stack(cols, axis=1))
    return out


def fd_reduced_gradient(g, h=1e-6):
    n = g.num_nodes
    B = dq.tangent_basis(g.nodes)
    grad = np.zeros((n, 3))
    for k in range(n):
        for c in range(3):
            v = np.zeros((n, 4))
            v[k] = h * B[k][:, c]
            diff = opt.total_cost(g, dq.exp_at(g.nodes, v)) - opt.total_cost(g, dq.exp_at(g.nodes, -v))
            grad[k, c] = 0.5 * diff / (2 * h)  # total_cost is twice the objective
    return grad


def test_criterion_4_derivatives():
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    worst_jac = worst_grad = 0.0
    for trial in range(100):
        n = int(rng.integers(2, 9))
        g = random_graph(rng, n, extra=int(rng.integers(0, 4)) % ((n - 1) * (n - 2) // 2 + 1))
        for i, j, z in zip(g.edge_i, g.edge_j, g.z):
            A, Bj = opt.edge_jacobians(g.nodes[i], g.nodes[j], z)
            analytic = [A @ dq.tangent_basis(g.nodes[i]), Bj @ dq.tangent_basis(g.nodes[j])]
            for a, f in zip(analytic, fd_reduced_jacobians(g.nodes[i], g.nodes[j], z)):
                worst_jac = max(worst_jac, np.linalg.norm(a - f) / np.linalg.norm(f))
        grad = opt.riemannian_gradient(g)
        reduced = np.einsum("nji,nj->ni", dq.tangent_basis(g.nodes), grad)
        fd = fd_reduced_gradient(g)
        worst_grad = max(worst_grad, np.linalg.norm(reduced - fd) / np.linalg.norm(fd))
    elapsed = time.perf_counter() - start
    ok = worst_jac <= 1e-5 and worst_grad <= 1e-5 and elapsed < 30
    verdict(4, ok, f"100 graphs in {elapsed:.1f}s; worst relative error: "
                   f"Jacobian {worst_jac:.1e}, gradient {worst_grad:.1e}")


# --- 5 -------------------------------------------------------------------

def test_criterion_5_exactness_and_convergence():
    rng = np.random.default_rng(5)
    two_node = 0.0
    for _ in range(200):
        x = dq.random_poses(rng, 2, 10.0)
        g = PoseGraph(x, [0], [1], [dq.random_poses(rng, (), 10.0)], random_spd(rng, 1))
        new, _, _ = opt.gn_step(g)
        two_node = max(two_node, opt.total_cost(new))

    # noise-free rings from odometry, and from a scrambled start so the solver has work to do
    ring_cost, ring_iters = 0.0, 0
    for seed in range(10):
        truth, odo = make_ring(20, closures=5, seed=seed)
        jitter = dq.from_pose(rng.normal(0, 0.1, 20), rng.normal(0, 0.5, (20, 2)))
        moved = dq.compose(truth.nodes, jitter)
        moved[0] = truth.nodes[0]
        for start in (chordal.odometry_initialize(odo), truth.with_nodes(moved)):
            out, rep = opt.optimize(start)
            ring_cost = max(ring_cost, opt.total_cost(out))
            ring_iters = max(ring_iters, len(rep.records))

    chord = 0.0
    for _ in range(20):
        truth = consistent(random_graph(rng, 15, extra=8, spread=5.0))
        scrambled = dq.random_poses(rng, 15)
        scrambled[0] = truth.nodes[0]
        out = chordal.initialize(truth.with_nodes(scrambled))
        chord = max(chord, np.abs(dq.log_at(truth.nodes, out.nodes)).max())

    ok = two_node < 1e-18 and ring_cost < 1e-12 and ring_iters <= 5 and chord <= 1e-8
    verdict(5, ok, f"2-node cost {two_node:.1e}; ring cost {ring_cost:.1e} in <= {ring_iters} "
                   f"iterations; chordal recovery {chord:.1e}")


# --- 6 -------------------------------------------------------------------

def test_criterion_6_invariances():
    rng = np.random.default_rng(6)
    gauge = flip = rpe_gap = 0.0
    for _ in range(50):
        g = random_graph(rng, 12, extra=6, spread=8.0)
        base = opt.total_cost(g)
        moved = g.with_nodes(dq.compose(dq.random_poses(rng, (), 10.0), g.nodes))
        gauge = max(gauge, abs(opt.total_cost(moved) - base))
        signs = np.where(rng.random(12) < 0.5, -1.0, 1.0)[:, None]
        flip = max(flip, abs(opt.total_cost(g.with_nodes(signs * g.nodes)) - base))

        truth = g.with_nodes(dq.random_poses(rng, 12, 8.0))
        r0 = rpe(g, truth)
        for est, tru in ((moved, truth),
                         (g, truth.with_nodes(dq.compose(dq.random_poses(rng, (), 10.0), truth.nodes)))):
            r = rpe(est, tru)
            rpe_gap = max(rpe_gap, abs(r.e_t - r0.e_t), abs(r.e_r - r0.e_r))
    ok = gauge <= 1e-10 and flip <= 1e-12 and rpe_gap <= 1e-10
    verdict(6, ok, f"gauge {gauge:.1e}; sign flip {flip:.1e}; RPE {rpe_gap:.1e}")


# --- 7 -------------------------------------------------------------------

def pipeline(workdir, source):
    perturbed, result = workdir / "noisy.g2o", workdir / "opt.g2o"
    report, metrics = workdir / "report.csv", workdir / "metrics.csv"
    sigma = ["0.0224", "0", "0", "0.0224", "0", "0.0224"]
    assert cli.main(["perturb", "--input", str(source), "--output", str(perturbed),
                     "--sigma", *sigma, "--seed", "42"]) == 0
    assert cli.main(["optimize", "--input", str(perturbed), "--init", "chordal", "--fixed-iters", "5",
                     "--output", str(result), "--report", str(report)]) == 0
    assert cli.main(["eval", str(result), str(source), "--csv", str(metrics)]) == 0
    stripped = "\n".join(line.rsplit(",", 1)[0] for line in report.read_text().splitlines())
    return perturbed.read_bytes(), result.read_bytes(), stripped, metrics.read_bytes()


def test_criterion_7_roundtrip_and_determinism(tmp_path, capsys):
    fixtures = {p.name: load_graph(p) for p in sorted(DATA.iterdir()) if p.suffix in (".g2o", ".graph", ".gz")}
    m3500 = find_any(*DATASETS["M3500"])
    worst = 0.0
    for g in fixtures.values():
        h = parse_graph(write_graph(g))
        worst = max(worst, np.abs(dq.log_at(g.nodes, h.nodes)).max(), np.abs(dq.log_at(g.z, h.z)).max())
    if m3500 is not None:
        g = load_graph(m3500)
        h = parse_graph(write_graph(g))
        worst = max(worst, np.abs(dq.log_at(g.nodes, h.nodes)).max())

    truth, _ = make_ring(40, closures=6, seed=7)
    (tmp_path / "truth.g2o").write_text(write_graph(truth))
    runs = []
    for k in range(2):
        workdir = tmp_path / f"run{k}"
        workdir.mkdir()
        runs.append(pipeline(workdir, tmp_path / "truth.g2o"))
    capsys.readouterr()
    identical = runs[0] == runs[1]

    detail = f"round trip over {len(fixtures)} fixtures worst {worst:.1e}; pipeline outputs identical: {identical}"
    ok = worst <= 1e-9 and identical and m3500 is not None
    if m3500 is None:
        detail += f"; M3500 not found in {dataset_dir()}"
    verdict(7, ok, detail)
