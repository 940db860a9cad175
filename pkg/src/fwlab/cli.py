"""Scenario-driven command line front end.

Every subcommand reads one JSON scenario file (one schema per subcommand,
versioned by the ``schema`` field), applies ``--set`` overrides, and writes
CSV rows plus a JSON summary into the output directory.  Outputs embed the
tool version, the hash of the resolved scenario, and the seed, and are
byte-identical for identical (scenario, seed, version).

Exit codes: 0 success, 1 input error, 2 a numerical check failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import comparison_harness as ch
from . import filtering_sim as fs
from . import fourier_metric as fm
from . import hamiltonians as ham
from . import prediction_game as pg
from . import sobolev as sb
from ._rng import substream
from .measures import Theta, measure_from_json, measure_to_json

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_CHECK_FAILED = 2

TARGETS = (
    "metric",
    "sobolev-check",
    "commutator-check",
    "dissipation-check",
    "hamiltonian",
    "filter-sim",
    "game-sim",
    "dp-value",
    "comparison-doubling",
)


class ScenarioError(Exception):
    pass


class Scenario:
    """A parsed scenario: name, dispatch target, parameter blob, seed.

    The ``params`` dict is the raw JSON document after overrides; the other
    fields are pulled out of it so dispatch and output metadata never have to
    guess where they live.
    """

    def __init__(self, params: dict, name: str):
        target = params.get("target")
        if target not in DISPATCH:
            raise ScenarioError(
                f"unknown target {target!r}; known: {', '.join(TARGETS)}"
            )
        self.name = str(params.get("name", name))
        self.target = target
        self.params = params
        self.seed = int(params.get("seed", params.get("sim", {}).get("seed", 0)))


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _config_hash(scenario: dict) -> str:
    return hashlib.sha256(_canonical(scenario).encode()).hexdigest()[:16]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header: list, rows: list, meta: dict) -> None:
    lines = [f"# {k}={v}" for k, v in sorted(meta.items())]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", newline="\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", newline="\n")


def read_csv_meta(path: Path) -> dict:
    """Parse the key=value preamble back out of an emitted CSV file."""
    meta = {}
    for line in Path(path).read_text().splitlines():
        if not line.startswith("# "):
            break
        k, _, v = line[2:].partition("=")
        meta[k] = v
    return meta


def _apply_override(scenario: dict, key: str, raw: str) -> None:
    node = scenario
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ScenarioError(f"override path {key!r} crosses a non-object")
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    node[parts[-1]] = val


def _metric_config(scenario: dict, dim: int) -> fm.FourierConfig:
    spec = scenario.get("config", {})
    base = fm.default_config(dim)
    return fm.FourierConfig(
        dim,
        int(spec.get("lambda", base.lam)),
        float(spec.get("k_radius", base.k_radius)),
        int(spec.get("k_nodes_per_axis", base.k_nodes_per_axis)),
        spec.get("quadrature_rule", base.quadrature_rule),
    )


# ---------------------------------------------------------------------------
# subcommand implementations; each returns (exit_code, rows_meta)
# ---------------------------------------------------------------------------


def _run_metric(scenario: dict, out: Path, meta: dict, dump: bool) -> int:
    dim = int(scenario.get("dim", 1))
    cfg = _metric_config(scenario, dim)
    rows = []
    for case in scenario["cases"]:
        mu = measure_from_json(case["mu"])
        nu = measure_from_json(case["nu"])
        inputs_hash = hashlib.sha256(
            (measure_to_json(mu) + measure_to_json(nu)).encode()
        ).hexdigest()[:12]
        value = fm.rho_F(mu, nu, cfg)
        rows.append([case.get("name", "case"), "rho_F", inputs_hash, value, meta["config_hash"]])
        if "theta" in case and "iota" in case:
            th = Theta(float(case["theta"]["t"]), mu, np.asarray(case["theta"]["m"], float))
            io = Theta(float(case["iota"]["t"]), nu, np.asarray(case["iota"]["m"], float))
            rows.append(
                [case.get("name", "case"), "d_F", inputs_hash, fm.d_F(th, io, cfg), meta["config_hash"]]
            )
    _write_csv(out / "metric.csv", ["case", "kind", "inputs_hash", "value", "config_id"], rows, meta)
    return EXIT_OK


def _random_grid_pair(scenario: dict, rng) -> tuple:
    box = sb.Box(
        (-float(scenario.get("length", 32.0)) / 2.0,),
        (float(scenario.get("length", 32.0)),),
        (int(scenario.get("n", 512)),),
    )
    band = int(scenario.get("band", box.nodes[0] // 4))
    return (
        sb.random_band_limited(box, band, rng),
        sb.random_band_limited(box, band, rng),
    )


def _run_sobolev_check(scenario: dict, out: Path, meta: dict, dump: bool) -> int:
    rng = substream(int(scenario.get("seed", 0)), 0)
    count = int(scenario.get("count", 10))
    tol = float(scenario.get("tol", 1e-8))
    rows = []
    worst = 0.0
    for case in range(count):
        f, h = _random_grid_pair(scenario, rng)
        rep = sb.leibniz_identity_check(f, h, 1, tol)
        resid = rep.stats["max_residual"]
        worst = max(worst, resid)
        rows.append([f"case{case}", resid, tol, resid / tol])
    _write_csv(out / "sobolev_check.csv", ["case", "residual", "bound", "ratio"], rows, meta)
    return EXIT_OK if worst <= tol else EXIT_CHECK_FAILED


def _run_commutator_check(scenario: dict, out: Path, meta: dict, dump: bool) -> int:
    rng = substream(int(scenario.get("seed", 0)), 0)
    count = int(scenario.get("count", 20))
    k = int(scenario.get("k", 2))
    rows = []
    for case in range(count):
        f, g = _random_grid_pair(scenario, rng)
        residual, bound = sb.commutator_residual(f, g, k)
        ratio = residual / bound if bound > 0 else 0.0
        rows.append([f"case{case}", residual, bound, ratio])
    _write_csv(out / "commutator_check.csv", ["case", "residual", "bound", "ratio"], rows, meta)
    return EXIT_OK


def _run_dissipation_check(scenario: dict, out: Path, meta: dict, dump: bool) -> int:
    seed = int(scenario.get("seed", 0))
    rng = substream(seed, 0)
    n = int(scenario.get("n", 1024))
    length = float(scenario.get("length", 32.0))
    lam = int(scenario.get("lambda", 4))
    delta = float(scenario.get("delta", 1.2))
    count = int(scenario.get("count", 20))
    box = sb.Box((-length / 2.0,), (length,), (n,))
    xs = box.axes()[0]
    avals = (1.5 + 0.3 * np.sin(xs))[:, None, None]
    bvals = (0.5 * np.cos(xs))[:, None]
    a = sb.GridFunction(box, avals)
    b = sb.GridFunction(box, bvals)
    eps_moll = float(scenario.get("eps_factor", 4.0)) * box.spacings()[0]
    from .measures import SignedAtomicMeasure

    def ratio_of(eta):
        rec = sb.dissipation_check(eta, a, b, lam, delta, eps_moll)
        return rec, (rec.lhs + 0.25 * delta * rec.norm_sq_loss) / rec.norm_sq_weak

    # the constant is fitted on a deterministic design lattice that covers the
    # sampled family's parameter ranges, then the samples are verified
    c_fit = -np.inf
    for sep in (0.05, 0.3, 1.0, 2.5, 6.0):
        for center in (-3.2, -1.6, 0.0, 1.6, 3.2):
            for ang in (np.pi / 4, 1.1):
                wts = np.array([np.cos(ang), -np.sin(ang)])
                eta = SignedAtomicMeasure(
                    1, np.array([[center - sep / 2], [center + sep / 2]]), wts
                )
                c_fit = max(c_fit, ratio_of(eta)[1])
    rows, violations = [], []
    for i in range(count):
        locs = rng.uniform(-3.0, 3.0, size=(2, 1))
        eta = SignedAtomicMeasure(1, locs, np.array([1.0, -1.0]))
        rec, ratio = ratio_of(eta)
        rows.append([f"case{i}", rec.lhs, rec.norm_sq_loss, rec.norm_sq_weak, ratio])
        if ratio > c_fit * (1 + 1e-9) + 1e-12:
            violations.append(i)
    meta = dict(meta, fitted_c=repr(float(c_fit)))
    _write_csv(
        out / "dissipation_check.csv",
        ["case", "lhs", "norm_sq_loss", "norm_sq_weak", "ratio"],
        rows,
        meta,
    )
    return EXIT_OK if not violations else EXIT_CHECK_FAILED


def _run_hamiltonian(scenario: dict, out: Path, meta: dict, dump: bool) -> int:
    kind = scenario.get("kind", "filtering")
    seed = int(scenario.get("seed", 0))
    rows = []
    status = EXIT_OK
    if kind == "filtering":
        factory = ham.COEFFS_REGISTRY.get(scenario.get("problem", "lq1d"))
        if factory is None:
            raise ScenarioError(f"unknown problem {scenario.get('problem')!r}")
        coeffs = factory()
        grid = np.linspace(
            float(scenario.get("control_lo", -2.0)),
            float(scenario.get("control_hi", 2.0)),
            int(scenario.get("control_points", 101)),
        )
        for case in scenario["cases"]:
            mu = measure_from_json(case["mu"])
            alpha = float(case.get("p_slope", 1.0))
            beta = float(case.get("q_const", 1.0))
            jet = ham.JetArgs(
                lambda X, alpha=alpha: alpha * np.atleast_2d(X),
                lambda X, beta=beta: np.full((np.atleast_2d(X).shape[0], 1, 1), beta),
                np.atleast_2d(float(case.get("M", 1.0))),
            )
            val = ham.G_filtering(mu, jet, coeffs, grid)
            rows.append([case.get("name", "case"), "G_filtering", val])
    elif kind == "regret":
        for case in scenario["cases"]:
            mu = measure_from_json(case["mu"])
            M = np.asarray(case["M"], dtype=float)
            qc = np.asarray(case.get("q_const", np.zeros_like(M)), dtype=float)
            q = lambda X, qc=qc: np.broadcast_to(qc, (np.atleast_2d(X).shape[0],) + qc.shape)
            val = ham.G_regret(mu, q, M, ham.RegretSolverConfig(seed=seed))
            rows.append([case.get("name", "case"), "G_regret", val])
    elif kind == "regret-check":
        K = int(scenario.get("K", 2))
        n_samples = int(scenario.get("samples", 25))
        scale = float(scenario.get("constant_scale", 1.0))
        rng = substream(seed, 1)
        cfgs = {K: fm.default_config(K)}
        samples = _regret_samples(K, n_samples, rng)
        report = ham.check_assumptions_regret(samples, cfgs)
        # engineered tightening of the constant for failure-path tests
        max_ratio = report.stats["max_lipschitz_ratio"]
        passed = report.passed and max_ratio <= scale
        rows.append(["max_lipschitz_ratio", "regret-check", max_ratio])
        rows.append(["max_sign_gap", "regret-check", report.stats["max_sign_gap"]])
        status = EXIT_OK if passed else EXIT_CHECK_FAILED
    else:
        raise ScenarioError(f"unknown hamiltonian kind {kind!r}")
    _write_csv(out / "hamiltonian.csv", ["case", "kind", "value"], rows, meta)
    return status


def _regret_samples(K: int, n: int, rng) -> list:
    from .measures import SignedAtomicMeasure

    samples = []
    for _ in range(n):
        n_atoms = int(rng.integers(1, 4))
        locs = rng.uniform(-2.0, 2.0, size=(n_atoms, K))
        w = rng.dirichlet(np.ones(n_atoms))
        mu = SignedAtomicMeasure(K, locs, w, probability=True)
        locs2 = rng.uniform(-2.0, 2.0, size=(n_atoms, K))
        nu = SignedAtomicMeasure(K, locs2, w, probability=True)
        A1 = rng.standard_normal((K, K))
        A2 = rng.standard_normal((K, K))
        M1, M2 = 0.5 * (A1 + A1.T), 0.5 * (A2 + A2.T)
        c1, c2 = rng.standard_normal(K), rng.standard_normal(K)
        B1, B2 = rng.standard_normal((K, K)), rng.standard_normal((K, K))
        B1, B2 = 0.5 * (B1 + B1.T), 0.5 * (B2 + B2.T)

        def make_q(c, B):
            def q(X, c=c, B=B):
                X = np.atleast_2d(X)
                return np.sin(X @ c)[:, None, None] * B

            return q

        samples.append(
            {
                "K": K,
                "mu": mu,
                "nu": nu,
                "q1": make_q(c1, B1),
                "q2": make_q(c2, B2),
                "M1": M1,
                "M2": M2,
                "M": M1,
                "eps": float(rng.uniform(0.05, 0.5)),
                "i": int(rng.integers(1, K + 1)),
                "a": ham.SimplexAction(K, rng.dirichlet(np.ones(2**K))),
            }
        )
    return samples


def _run_filter_sim(scenario: dict, out: Path, meta: dict, dump: bool) -> int:
    factory = ham.COEFFS_REGISTRY.get(scenario.get("coeffs", "lq1d"))
    if factory is None:
        raise ScenarioError(f"unknown coefficient set {scenario.get('coeffs')!r}")
    params = scenario.get("coeffs_params", {})
    coeffs = factory(**params) if params else factory()
    sim = scenario["sim"]
    cfg = fs.SimConfig(
        dt=float(sim["dt"]),
        n_particles=int(sim["n_particles"]),
        horizon=float(sim["horizon"]),
        runs=int(sim.get("runs", 1)),
        seed=int(sim.get("seed", 0)),
    )
    lq = fs.LQParams(horizon=cfg.horizon, **scenario.get("lq", {}))
    policy_name = scenario.get("policy", "zero")
    if policy_name not in fs.POLICY_REGISTRY:
        raise ScenarioError(f"unknown policy {policy_name!r}")
    policy = fs.POLICY_REGISTRY[policy_name](lq)
    mu = measure_from_json(scenario["mu"])
    t0 = float(scenario.get("t", 0.0))

    rows = []
    cost_to_date = 0.0
    prev = None
    for clock, ens, a in fs._run_paths(t0, mu, policy, coeffs, cfg, 0, None, None, None):
        if prev is not None:
            cost_to_date += float(np.mean(coeffs.r(prev[0], prev[1]))) * cfg.dt
        mean = ens.states.mean(axis=0)
        var = float(np.mean((ens.states - mean) ** 2))
        rows.append([clock, float(mean[0]), var, cost_to_date])
        prev = (ens.states, a)
    _write_csv(out / "filter_sim.csv", ["time", "mean", "variance", "cost_to_date"], rows, meta)

    est, stderr = fs.estimate_cost(t0, mu, policy, coeffs, cfg)
    _write_json(
        out / "filter_sim_summary.json",
        {"estimate": est, "std_error": stderr, **meta},
    )
    return EXIT_OK


def _run_game_sim(scenario: dict, out: Path, meta: dict, dump: bool) -> int:
    K = int(scenario["K"])
    T = int(scenario["T"])
    runs = int(scenario.get("runs", 1000))
    seed = int(scenario.get("seed", 0))
    m0 = measure_from_json(scenario["m0"])
    f_name = scenario.get("forecaster", "uniform")
    a_name = scenario.get("adversary", "full-set")
    if f_name not in pg.FORECASTER_REGISTRY:
        raise ScenarioError(f"unknown forecaster {f_name!r}")
    if a_name not in pg.ADVERSARY_REGISTRY:
        raise ScenarioError(f"unknown adversary {a_name!r}")
    forecaster = pg.FORECASTER_REGISTRY[f_name](K)
    adversary = pg.ADVERSARY_REGISTRY[a_name](K)
    est, stderr = pg.monte_carlo_regret(T, m0, forecaster, adversary, runs, seed)
    _write_csv(
        out / "game_sim.csv",
        ["T", "estimate", "std_error"],
        [[T, est, stderr]],
        meta,
    )
    return EXIT_OK


def _run_dp_value(scenario: dict, out: Path, meta: dict, dump: bool) -> int:
    K = int(scenario["K"])
    T = int(scenario["T"])
    m0 = measure_from_json(scenario["m0"])
    grid_name = scenario.get("grid", "vertices")
    if grid_name == "vertices":
        grid = [ham.vertex_action(K, mask) for mask in range(2**K)]
    elif grid_name == "full-set-only":
        grid = [ham.vertex_action(K, 2**K - 1)]
    else:
        raise ScenarioError(f"unknown adversary grid {grid_name!r}")
    cfg = pg.ExactValueConfig(dump_table=dump)
    result = pg.exact_value_small(T, m0, grid, cfg)
    if dump:
        value, table = result
        _write_json(out / "dp_value_table.json", {"value": value, "n_nodes": len(table)})
    else:
        value = result
    _write_csv(out / "dp_value.csv", ["T", "value"], [[T, value]], meta)
    return EXIT_OK


def _run_comparison_doubling(scenario: dict, out: Path, meta: dict, dump: bool) -> int:
    support = np.asarray(scenario["support"], dtype=float)
    if support.ndim == 1:
        support = support[:, None]
    lq = fs.LQParams(**scenario.get("lq", {}))
    slack = float(scenario.get("slack", 0.5))
    m_box = float(scenario.get("m_box", 2.0))
    u = ch.lq_discretized_candidate(support, lq, slack=slack, m_box=m_box, label="u")
    v = ch.lq_discretized_candidate(support, lq, slack=0.0, m_box=m_box, label="v")
    cfg = ch.DoublingConfig(
        horizon=lq.horizon,
        m_box=m_box,
        seed=int(scenario.get("seed", 0)),
        n_starts=int(scenario.get("n_starts", 32)),
        max_iters=int(scenario.get("max_iters", 300)),
    )
    delta = float(scenario.get("delta", 0.01))
    rows = []
    for eps in scenario["eps_sequence"]:
        rep = ch.doubling_maximize(u, v, float(eps), delta, cfg)
        rows.append([eps, rep.value, rep.penalty, rep.d_F, rep.converged])
    _write_csv(
        out / "comparison_doubling.csv",
        ["eps", "value", "penalty", "d_F", "converged"],
        rows,
        meta,
    )
    return EXIT_OK


DISPATCH = {
    "metric": _run_metric,
    "sobolev-check": _run_sobolev_check,
    "commutator-check": _run_commutator_check,
    "dissipation-check": _run_dissipation_check,
    "hamiltonian": _run_hamiltonian,
    "filter-sim": _run_filter_sim,
    "game-sim": _run_game_sim,
    "dp-value": _run_dp_value,
    "comparison-doubling": _run_comparison_doubling,
}


def run(
    scenario_file,
    overrides=(),
    out_dir=None,
    threads=None,
    dump=False,
    expected_target=None,
) -> int:
    """Load a scenario, dispatch to its target, write outputs; returns exit code."""
    try:
        raw = Path(scenario_file).read_text()
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        scenario = json.loads(raw)
    except json.JSONDecodeError as exc:
        print(f"error: scenario is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        for ov in overrides:
            key, sep, val = ov.partition("=")
            if not sep:
                raise ScenarioError(f"override {ov!r} is not key=value")
            _apply_override(scenario, key, val)
        sc = Scenario(scenario, name=Path(scenario_file).stem)
        if expected_target is not None and sc.target != expected_target:
            raise ScenarioError(
                f"scenario targets {sc.target!r} but the {expected_target!r} subcommand was invoked"
            )
        out = Path(out_dir) if out_dir else Path.cwd()
        out.mkdir(parents=True, exist_ok=True)
        meta = {
            "fwlab_version": __version__,
            "config_hash": _config_hash(sc.params),
            "seed": sc.seed,
            "threads": threads or 1,
        }
        return DISPATCH[sc.target](sc.params, out, meta, dump)
    except (ScenarioError, KeyError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fwlab", description="Scenario runner for the numerical laboratory"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in TARGETS:
        p = sub.add_parser(name, help=f"run a {name} scenario")
        p.add_argument("--scenario", required=True, help="path to the scenario JSON file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="K=V",
            help="override a scenario key (dotted paths allowed, repeatable)",
        )
        p.add_argument("--out", default=None, help="output directory (default: cwd)")
        p.add_argument("--threads", type=int, default=None, help="worker cap")
        p.add_argument("--dump", action="store_true", help="emit full value tables")
    args = parser.parse_args(argv)
    code = run(
        args.scenario,
        args.overrides,
        args.out,
        args.threads,
        args.dump,
        expected_target=args.command,
    )
    if code == EXIT_CHECK_FAILED:
        print("one or more checks failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
