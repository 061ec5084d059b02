"""Synthetic DC optimal power flow systems and the benchmark harness.

Systems are desk-scale stand-ins for a real grid: generators and loads sit
on a ring of equal-reactance lines, whose power transfer distribution
factors have the closed form

    T[k, b] = 1[b <= k] - (n - b) / n        (n buses, line k joins k, k+1)

valid for balanced injections.  A subset of ring lines is monitored with
thermal limits.  Dispatch cost is per-generator quadratic a_g P^2 + b_g P.

The benchmark trains each requested method on half the sampled loads,
evaluates optimality/feasibility gaps against the QP oracle on the other
half, measures per-instance inference time, and writes a CSV report plus
optional per-instance gap figures.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import (
    BaselineConfig,
    dc3_infer,
    dc3_train,
    penalty_infer,
    penalty_train,
    projection_infer,
    projection_train,
    reference_optimum,
)
from .errors import EmptyInteriorError, GaugeoptError, InfeasibleError
from .interior import find_interior_artificial
from .linalg import as_vector, freeze, worker_count
from .neural import TrainConfig, pipeline_forward, pipeline_model, train
from .problems import (
    LinConProblem,
    MetricsReport,
    feasibility_gap,
    optimality_gap,
    quadratic_objective,
)
from .reduction import ReducedProblem, reduce_problem

BENCH_METHODS = ("loop", "penalty", "projection", "dc3")


@dataclass(frozen=True)
class DcopfSystem:
    n_gen: int
    n_load: int
    n_line: int
    cost_a: np.ndarray
    cost_b: np.ndarray
    p_min: np.ndarray
    p_max: np.ndarray
    ptdf_gen: np.ndarray
    ptdf_load: np.ndarray
    line_limits: np.ndarray

    def __post_init__(self):
        for name in ("cost_a", "cost_b", "p_min", "p_max", "line_limits"):
            object.__setattr__(self, name, freeze(as_vector(getattr(self, name), name).copy()))
        for name in ("ptdf_gen", "ptdf_load"):
            object.__setattr__(self, name, freeze(np.asarray(getattr(self, name), dtype=float).copy()))
        if np.any(self.p_min >= self.p_max):
            raise ValueError("p_min must be strictly below p_max componentwise")
        if np.any(self.line_limits <= 0):
            raise ValueError("line limits must be positive")
        if np.any(self.cost_a <= 0):
            raise ValueError("quadratic cost coefficients must be positive")


def ring_ptdf(n_bus: int) -> np.ndarray:
    """Closed-form PTDF of a ring with equal line reactances."""
    if n_bus < 2:
        raise ValueError("a ring needs at least 2 buses")
    k = np.arange(n_bus).reshape(-1, 1)
    b = np.arange(n_bus).reshape(1, -1)
    return (b <= k).astype(float) - (n_bus - b) / n_bus


def default_base_load(system: DcopfSystem) -> np.ndarray:
    """Nominal load: 55% of installed capacity spread uniformly over loads."""
    total = 0.55 * float(np.sum(system.p_max))
    return np.full(system.n_load, total / system.n_load)


def generate_system(n_gen: int, n_load: int, n_line: int, seed: int = 0) -> DcopfSystem:
    """Random ring-topology system, deterministic per seed.

    Capacity is sized so the fluctuated load band keeps headroom
    (sum p_max > 1.1 * nominal total load), and monitored-line limits are
    set around the proportional-dispatch flows at nominal load.
    """
    if min(n_gen, n_load, n_line) < 1:
        raise ValueError("n_gen, n_load and n_line must all be >= 1")
    rng = np.random.default_rng(seed)
    n_bus = n_gen + n_load
    order = rng.permutation(n_bus)
    gen_buses = np.sort(order[:n_gen])
    load_buses = np.sort(order[n_gen:])

    t = ring_ptdf(n_bus)
    if n_line <= n_bus:
        monitored = np.sort(rng.choice(n_bus, size=n_line, replace=False))
    else:
        monitored = np.arange(n_line) % n_bus
    d_gen = t[monitored][:, gen_buses]
    d_load = t[monitored][:, load_buses]

    cost_a = rng.uniform(0.5, 2.0, n_gen)
    cost_b = rng.uniform(1.0, 5.0, n_gen)
    p_max = rng.uniform(0.8, 1.6, n_gen)
    p_min = rng.uniform(0.02, 0.10, n_gen) * p_max

    total = 0.55 * float(np.sum(p_max))
    base = np.full(n_load, total / n_load)
    p_prop = total * p_max / np.sum(p_max)
    flow_ref = d_gen @ p_prop - d_load @ base
    line_limits = 1.6 * np.abs(flow_ref) + 0.25 * float(np.max(p_max))

    return DcopfSystem(
        n_gen=n_gen, n_load=n_load, n_line=n_line,
        cost_a=cost_a, cost_b=cost_b, p_min=p_min, p_max=p_max,
        ptdf_gen=d_gen, ptdf_load=d_load, line_limits=line_limits,
    )


def to_lincon(system: DcopfSystem) -> LinConProblem:
    """Dispatch problem in canonical form: u = generation, x = load vector.

    One supply-demand balance equality, generator box rows, and monitored
    line rows in both flow directions (the physical lines are bidirectional
    even though the classic formulation writes one side).
    """
    ng, nl = system.n_gen, system.n_load
    a_eq = np.ones((1, ng))
    b_mat_eq = -np.ones((1, nl))
    b_vec_eq = np.zeros(1)

    eye = np.eye(ng)
    zeros_gl = np.zeros((ng, nl))
    a_ineq = np.vstack([
        eye,                    # P <= p_max
        -eye,                   # -P <= -p_min
        system.ptdf_gen,        # flows <= limits
        -system.ptdf_gen,       # reverse flows <= limits
    ])
    b_mat_ineq = np.vstack([
        zeros_gl,
        zeros_gl,
        -system.ptdf_load,
        system.ptdf_load,
    ])
    b_vec_ineq = np.concatenate([
        -system.p_max,
        system.p_min,
        -system.line_limits,
        -system.line_limits,
    ])
    objective = quadratic_objective(np.diag(2.0 * system.cost_a), system.cost_b)
    return LinConProblem(
        a_eq=a_eq, b_mat_eq=b_mat_eq, b_vec_eq=b_vec_eq,
        a_ineq=a_ineq, b_mat_ineq=b_mat_ineq, b_vec_ineq=b_vec_ineq,
        objective=objective,
    )


@dataclass(frozen=True)
class DcopfDataset:
    base_load: np.ndarray
    samples: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base_load", freeze(as_vector(self.base_load, "base_load").copy()))
        object.__setattr__(self, "samples", freeze(np.asarray(self.samples, dtype=float).copy()))
        object.__setattr__(self, "train_idx", freeze(np.asarray(self.train_idx, dtype=int).copy()))
        object.__setattr__(self, "test_idx", freeze(np.asarray(self.test_idx, dtype=int).copy()))


def sample_dataset(system: DcopfSystem, n_samples: int, fluctuation: float = 0.10,
                   seed: int = 0, max_tries: int = 100) -> DcopfDataset:
    """Componentwise-uniform load fluctuation around the nominal base, 1:1 split.

    Samples whose polytope has no strict interior are rejected and redrawn
    (at most ``max_tries`` times each).
    """
    base = default_base_load(system)
    red = reduce_problem(to_lincon(system))
    rng = np.random.default_rng(seed)
    samples = np.empty((n_samples, system.n_load))
    for i in range(n_samples):
        for attempt in range(max_tries):
            candidate = base * rng.uniform(1.0 - fluctuation, 1.0 + fluctuation, system.n_load)
            try:
                find_interior_artificial(red, candidate)
            except (EmptyInteriorError, InfeasibleError):
                continue
            samples[i] = candidate
            break
        else:
            raise InfeasibleError(
                f"could not draw a feasible load sample in {max_tries} tries "
                f"(sample {i}); the system is too constrained"
            )
    order = rng.permutation(n_samples)
    n_train = n_samples // 2
    train_idx = np.sort(order[:n_train])
    test_idx = np.sort(order[n_train:])
    return DcopfDataset(base_load=base, samples=samples, train_idx=train_idx, test_idx=test_idx)


# ---------------------------------------------------------------------------
# Benchmark harness.
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkRow:
    method: str
    optimality_gap: float | None
    feasibility_gap: float | None
    mean_inference_ms: float | None
    train_seconds: float | None
    status: str

    def metrics_report(self) -> MetricsReport:
        if self.status != "ok":
            raise GaugeoptError(f"method '{self.method}' failed: {self.status}")
        return MetricsReport(
            optimality_gap=self.optimality_gap,
            feasibility_gap=self.feasibility_gap,
            mean_time_per_instance=self.mean_inference_ms / 1e3,
        )


def default_train_configs(seed: int = 0, epochs: int = 400) -> dict:
    """Per-method optimizer settings; penalty-style losses need small steps."""
    return {
        "loop": TrainConfig(mode="solver_in_loop", epochs=epochs, batch_size=25,
                            learning_rate=3e-3, seed=seed),
        "projection": TrainConfig(mode="solver_in_loop", epochs=epochs, batch_size=25,
                                  learning_rate=3e-3, seed=seed),
        "penalty": TrainConfig(mode="objective_only", epochs=epochs, batch_size=25,
                               learning_rate=2e-7, seed=seed),
        "dc3": TrainConfig(mode="objective_only", epochs=epochs, batch_size=25,
                           learning_rate=2e-7, seed=seed),
    }


def _compute_references(red: ReducedProblem, samples) -> np.ndarray:
    workers = worker_count(len(samples))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            refs = list(pool.map(lambda x: reference_optimum(red, x), samples))
    else:
        refs = [reference_optimum(red, x) for x in samples]
    return np.stack(refs)


def run_benchmark(system: DcopfSystem, dataset: DcopfDataset, methods=BENCH_METHODS,
                  cfgs: dict | None = None, baseline_cfg: BaselineConfig | None = None,
                  seed: int = 0, epochs: int = 400, hidden=(16,)):
    """Train and score each method; returns (rows, per-instance series).

    Inference timing starts from cached interior points for the gauge
    pipeline (finding u_o is a per-problem preprocessing step), while the
    projection method's QP is timed because it IS its feasibility layer.
    A method failure becomes a status row, not a crash.
    """
    problem = to_lincon(system)
    red = reduce_problem(problem)
    configs = default_train_configs(seed=seed, epochs=epochs)
    if cfgs:
        configs.update(cfgs)
    bl_cfg = baseline_cfg or BaselineConfig()

    xs_train = dataset.samples[dataset.train_idx]
    xs_test = dataset.samples[dataset.test_idx]
    refs_train = _compute_references(red, xs_train)
    refs_test = _compute_references(red, xs_test)
    indep = red.partition.indep_idx

    u_o_train = [find_interior_artificial(red, x).point for x in xs_train]
    u_o_test = [find_interior_artificial(red, x).point for x in xs_test]

    rows: list[BenchmarkRow] = []
    series: dict[str, dict] = {}
    for method in methods:
        if method not in BENCH_METHODS:
            rows.append(BenchmarkRow(method, None, None, None, None,
                                     f"failed: unknown method '{method}'"))
            continue
        cfg = configs[method]
        try:
            t0 = time.perf_counter()
            if method == "loop":
                model = pipeline_model(red, hidden=hidden, seed=cfg.seed)
                train(model, red, xs_train, cfg, references=refs_train,
                      interior_fn=_indexed_interior(xs_train, u_o_train))

                def infer(i, x):
                    return pipeline_forward(model, red, x, u_o_test[i])[0]
            elif method == "penalty":
                model, _ = penalty_train(red, xs_train, bl_cfg, cfg, hidden=hidden)

                def infer(i, x):
                    return penalty_infer(model, x)
            elif method == "projection":
                model, _ = projection_train(red, xs_train, refs_train[:, indep], cfg,
                                            hidden=hidden)

                def infer(i, x):
                    return projection_infer(model, red, x)
            else:  # dc3
                model, _ = dc3_train(red, xs_train, bl_cfg, cfg, hidden=hidden)

                def infer(i, x):
                    return dc3_infer(model, red, x, bl_cfg)
            train_seconds = time.perf_counter() - t0

            predictions = []
            elapsed = 0.0
            for i, x in enumerate(xs_test):
                t0 = time.perf_counter()
                u = infer(i, x)
                elapsed += time.perf_counter() - t0
                predictions.append(u)
            opt_series = [optimality_gap([u], [r]) for u, r in zip(predictions, refs_test)]
            feas_series = [feasibility_gap(problem, [(u, x)])
                           for u, x in zip(predictions, xs_test)]
            rows.append(BenchmarkRow(
                method=method,
                optimality_gap=float(np.mean(opt_series)),
                feasibility_gap=float(np.mean(feas_series)),
                mean_inference_ms=1e3 * elapsed / len(xs_test),
                train_seconds=train_seconds,
                status="ok",
            ))
            series[method] = {"optimality": opt_series, "feasibility": feas_series}
        except GaugeoptError as exc:
            rows.append(BenchmarkRow(method, None, None, None, None, f"failed: {exc}"))
    return rows, series


def _indexed_interior(xs, points):
    """Interior lookup by sample identity; training never re-solves the LP."""
    table = {xs[i].tobytes(): points[i] for i in range(len(xs))}

    def fn(x):
        key = np.asarray(x, dtype=float).tobytes()
        if key not in table:
            raise GaugeoptError("interior cache miss for unseen training input")
        return table[key]

    return fn


def report_csv_text(rows) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "optimality_gap", "feasibility_gap",
                     "mean_inference_ms", "train_seconds", "status"])
    for row in rows:
        writer.writerow([
            row.method,
            "" if row.optimality_gap is None else repr(row.optimality_gap),
            "" if row.feasibility_gap is None else repr(row.feasibility_gap),
            "" if row.mean_inference_ms is None else f"{row.mean_inference_ms:.4f}",
            "" if row.train_seconds is None else f"{row.train_seconds:.3f}",
            row.status,
        ])
    return buf.getvalue()


def write_report_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(report_csv_text(rows))


def series_csv_text(series: dict) -> str:
    """Per-instance gap series for external plotting."""
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["instance", "method", "optimality_gap", "feasibility_gap"])
    for method in sorted(series):
        data = series[method]
        for i, (o, f) in enumerate(zip(data["optimality"], data["feasibility"])):
            writer.writerow([i, method, repr(float(o)), repr(float(f))])
    return buf.getvalue()


def write_series_csv(series: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(series_csv_text(series))


def render_figures(series: dict, outdir) -> list:
    """Per-instance gap figures rendered alongside the CSV report."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4))
    for method in sorted(series):
        ax.plot(series[method]["optimality"], marker=".", lw=1, label=method)
    ax.set_xlabel("test instance")
    ax.set_ylabel("optimality gap")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("Per-instance optimality gap")
    fig.tight_layout()
    path = outdir / "optimality_gap.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    for method in sorted(series):
        vals = np.maximum(np.asarray(series[method]["feasibility"], dtype=float), 1e-12)
        ax.plot(vals, marker=".", lw=1, label=method)
    ax.set_xlabel("test instance")
    ax.set_ylabel("feasibility gap (clipped at 1e-12)")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("Per-instance feasibility gap")
    fig.tight_layout()
    path = outdir / "feasibility_gap.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths
