"""Metric pipeline over stored instances: per-solver time deviation,
success rate, total reward, and visited-spot counts, with CSV output that
is recomputable bit-identically from the per-run itinerary files."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from pathlib import Path

from . import formats
from .instantiate import llm_op_baseline
from .llm import LlmBackend
from .model import EvalMetrics, Itinerary, OpInstance, evaluate_itinerary
from .opsolver import METHODS, SolverConfig, solve

BASELINE_SOLVER = "llm_op_baseline"

CSV_HEADER = (
    "solver,instances,success_count,success_rate,"
    "time_dev_mean_h,time_dev_sd_h,reward_mean,reward_sd,poi_mean,poi_sd"
)


@dataclass
class SolverRow:
    solver: str
    instances: int
    success_count: int
    time_dev_mean_h: float
    time_dev_sd_h: float
    reward_mean: float
    reward_sd: float
    poi_mean: float
    poi_sd: float

    @property
    def success_rate(self) -> float:
        return self.success_count / self.instances if self.instances else 0.0

    def csv_line(self) -> str:
        return ",".join(
            [
                self.solver,
                str(self.instances),
                str(self.success_count),
                repr(self.success_rate),
                repr(self.time_dev_mean_h),
                repr(self.time_dev_sd_h),
                repr(self.reward_mean),
                repr(self.reward_sd),
                repr(self.poi_mean),
                repr(self.poi_sd),
            ]
        )


@dataclass
class EvalReport:
    rows: list[SolverRow]
    skipped: dict[str, str]

    def csv_text(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv_line() for r in self.rows]) + "\n"


def run_solver(
    instance: OpInstance, solver: str, backend: LlmBackend | None = None
) -> Itinerary:
    if solver in METHODS:
        return solve(instance, SolverConfig(method=solver))
    if solver == BASELINE_SOLVER:
        if backend is None:
            raise ValueError("llm_op_baseline requires a backend")
        return llm_op_baseline(instance, backend)
    raise ValueError(f"unknown solver {solver!r}")


def aggregate(solver: str, metrics: list[EvalMetrics]) -> SolverRow:
    devs = [m.time_deviation_hours for m in metrics]
    rewards = [m.total_reward for m in metrics]
    pois = [float(m.poi_count) for m in metrics]

    def sd(xs: list[float]) -> float:
        return statistics.stdev(xs) if len(xs) > 1 else 0.0

    return SolverRow(
        solver=solver,
        instances=len(metrics),
        success_count=sum(1 for m in metrics if m.success),
        time_dev_mean_h=statistics.fmean(devs),
        time_dev_sd_h=sd(devs),
        reward_mean=statistics.fmean(rewards),
        reward_sd=sd(rewards),
        poi_mean=statistics.fmean(pois),
        poi_sd=sd(pois),
    )


def eval_directory(
    instances_dir: str | Path,
    solvers: list[str],
    backend: LlmBackend | None = None,
    out_dir: str | Path | None = None,
) -> EvalReport:
    """Solve every instance with every solver. Bad instance files are
    skipped and reported; rows aggregate in file-name order."""
    paths = sorted(Path(instances_dir).glob("*.json"))
    if not paths:
        raise FileNotFoundError(f"no instance files in {instances_dir}")
    itineraries_dir = None
    if out_dir is not None:
        itineraries_dir = Path(out_dir) / "itineraries"
        itineraries_dir.mkdir(parents=True, exist_ok=True)

    skipped: dict[str, str] = {}
    instances: list[tuple[str, OpInstance]] = []
    for path in paths:
        try:
            instances.append((path.stem, formats.load_op_instance(path)))
        except formats.FormatError as exc:
            skipped[path.name] = str(exc)

    rows = []
    for solver in solvers:
        metrics: list[EvalMetrics] = []
        for stem, instance in instances:
            itinerary = run_solver(instance, solver, backend)
            metrics.append(evaluate_itinerary(instance, itinerary))
            if itineraries_dir is not None:
                doc = formats.itinerary_to_dict(itinerary)
                doc["instance"] = stem
                doc["solver"] = solver
                formats.write_json(itineraries_dir / f"{stem}__{solver}.json", doc)
        rows.append(aggregate(solver, metrics))

    report = EvalReport(rows=rows, skipped=skipped)
    if out_dir is not None:
        (Path(out_dir) / "metrics.csv").write_text(report.csv_text(), encoding="utf-8")
    return report


def recompute_csv(instances_dir: str | Path, out_dir: str | Path) -> str:
    """Rebuild the metrics CSV purely from the emitted itinerary files plus
    the instance files; must reproduce eval_directory's CSV byte for byte."""
    runs = sorted((Path(out_dir) / "itineraries").glob("*.json"))
    by_solver: dict[str, list[tuple[str, dict]]] = {}
    solver_order: list[str] = []
    for path in runs:
        doc = formats.read_json(path)
        solver = doc["solver"]
        if solver not in by_solver:
            by_solver[solver] = []
            solver_order.append(solver)
        by_solver[solver].append((doc["instance"], doc))
    rows = []
    for solver in solver_order:
        metrics = []
        for stem, doc in sorted(by_solver[solver], key=lambda x: x[0]):
            instance = formats.load_op_instance(Path(instances_dir) / f"{stem}.json")
            total = float(doc["total_min"])
            visited = [s for s in doc["route"] if s != instance.depot_id]
            metrics.append(
                EvalMetrics(
                    time_deviation_hours=abs(instance.budget_minutes - total) / 60.0,
                    success=total <= instance.budget_minutes,
                    total_reward=float(doc["total_reward"]),
                    poi_count=len(visited),
                )
            )
        rows.append(aggregate(solver, metrics))
    return EvalReport(rows=rows, skipped={}).csv_text()


def pretty_table(report: EvalReport) -> str:
    """Comparison table: metrics as rows, solvers as columns."""
    headers = [row.solver for row in report.rows]
    lines = []

    def fmt(mean: float, sd: float) -> str:
        return f"{mean:.2f} ± {sd:.2f}"

    body = [
        (
            "Time Deviation (h) ↓",
            [fmt(r.time_dev_mean_h, r.time_dev_sd_h) for r in report.rows],
        ),
        (
            "Success Rate ↑",
            [
                f"{r.success_rate * 100:.0f}% ({r.success_count}/{r.instances})"
                for r in report.rows
            ],
        ),
        ("Total Reward ↑", [fmt(r.reward_mean, r.reward_sd) for r in report.rows]),
        ("Number of POIs ↑", [fmt(r.poi_mean, r.poi_sd) for r in report.rows]),
    ]
    label_w = max(len(b[0]) for b in body)
    col_w = [max(len(h), max(len(vals[i]) for _, vals in body)) for i, h in enumerate(headers)]
    lines.append(" " * label_w + "  " + "  ".join(h.ljust(col_w[i]) for i, h in enumerate(headers)))
    for label, vals in body:
        lines.append(
            label.ljust(label_w)
            + "  "
            + "  ".join(v.ljust(col_w[i]) for i, v in enumerate(vals))
        )
    return "\n".join(lines)
