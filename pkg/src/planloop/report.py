"""Figure rendering for the report path: route maps for solved instances
and metric bars for evaluation runs. Files only; no interactive display."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import EvalReport
from .model import Itinerary, OpInstance, format_hours_minutes


def itinerary_text(instance_doc: dict | None, itinerary_doc: dict) -> str:
    """Human-readable plan: per-leg travel, per-stop stay, and totals."""
    names = {}
    budget = None
    if instance_doc:
        names = {s["id"]: s["name"] for s in instance_doc.get("spots", [])}
        budget = instance_doc.get("budget_min")
    route = itinerary_doc.get("route", [])
    if not route:
        return "No feasible plan within the budget; stay at the start point."
    lines = []
    stays = {s["spot"]: s["stay_min"] for s in itinerary_doc.get("stays", [])}
    for leg in itinerary_doc.get("legs", []):
        dest = leg["to"]
        lines.append(
            f"  travel {format_hours_minutes(leg['travel_min'])} "
            f"-> {names.get(dest, dest)}"
        )
        if dest in stays:
            lines.append(f"    stay {format_hours_minutes(stays[dest])}")
    total = format_hours_minutes(itinerary_doc.get("total_min", 0.0))
    header = [f"Start at {names.get(route[0], route[0])}"]
    footer = [f"Total trip time: {total}"]
    if budget is not None:
        footer.append(f"Budget: {format_hours_minutes(budget)}")
    return "\n".join(header + lines + footer)


def route_figure(
    instance: OpInstance, itinerary: Itinerary, path: str | Path
) -> Path:
    """Scatter of all spots with the tour drawn through the visited ones;
    visited pins are numbered in visit order starting at the depot, the
    rest stay unnumbered."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 6))
    lons = [s.lon for s in instance.spots]
    lats = [s.lat for s in instance.spots]
    visited = itinerary.ordered_spot_ids[:-1] if not itinerary.is_empty else []
    visited_set = set(visited)
    unvisited = [s for s in instance.spots if s.id not in visited_set]
    ax.scatter(
        [s.lon for s in unvisited],
        [s.lat for s in unvisited],
        c="lightgray",
        edgecolors="gray",
        s=60,
        zorder=2,
        label="not visited",
    )
    if visited:
        index = {s.id: i for i, s in enumerate(instance.spots)}
        route_lons = [lons[index[i]] for i in itinerary.ordered_spot_ids]
        route_lats = [lats[index[i]] for i in itinerary.ordered_spot_ids]
        ax.plot(route_lons, route_lats, "-", color="tab:blue", zorder=1)
        ax.scatter(
            route_lons[:-1],
            route_lats[:-1],
            c="tab:red",
            edgecolors="black",
            s=90,
            zorder=3,
            label="visited",
        )
        for order, spot_id in enumerate(visited, start=1):
            ax.annotate(
                str(order),
                (lons[index[spot_id]], lats[index[spot_id]]),
                textcoords="offset points",
                xytext=(0, 9),
                ha="center",
                fontsize=9,
                fontweight="bold",
            )
    total = format_hours_minutes(itinerary.total_minutes)
    budget = format_hours_minutes(instance.budget_minutes)
    ax.set_title(f"Tour: {total} of {budget} budget")
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def metrics_figure(report: EvalReport, path: str | Path) -> Path:
    """Grouped bars, one panel per metric, one bar per solver."""
    path = Path(path)
    solvers = [r.solver for r in report.rows]
    panels = [
        ("Time deviation (h)", [r.time_dev_mean_h for r in report.rows],
         [r.time_dev_sd_h for r in report.rows]),
        ("Success rate", [r.success_rate for r in report.rows], None),
        ("Total reward", [r.reward_mean for r in report.rows],
         [r.reward_sd for r in report.rows]),
        ("Visited POIs", [r.poi_mean for r in report.rows],
         [r.poi_sd for r in report.rows]),
    ]
    fig, axes = plt.subplots(2, 2, figsize=(9, 7))
    for ax, (title, values, errors) in zip(axes.flat, panels):
        ax.bar(solvers, values, yerr=errors, capsize=4, color="tab:blue")
        ax.set_title(title)
        ax.tick_params(axis="x", rotation=20, labelsize=8)
        if title == "Success rate":
            ax.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
