"""Solve traces and solver-quality metrics.

Events form an append-only log feeding the bound-convergence series, the
primal-dual integral, and the many-body-term series. Exports are bit-stable:
a CSV or JSON round trip reproduces the series exactly.

By default event timestamps come from a deterministic virtual clock (one
microsecond per event) so identical runs export identical bytes; pass
``wall_clock=True`` to record real elapsed seconds instead, at the cost of
byte-level reproducibility.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import dataclass, fields as dataclass_fields

from .ising import IsingModel, many_body_count

EVENT_KINDS = (
    "node_start",
    "bound_update",
    "incumbent_update",
    "optimizer_query",
    "prune",
    "fathom",
    "branch",
    "done",
)

CSV_COLUMNS = (
    "wall_time_s",
    "node_index",
    "kind",
    "lb",
    "ub",
    "expectation",
    "query_index",
    "many_body_fraction",
    "status",
)


@dataclass(frozen=True)
class TraceEvent:
    wall_time_s: float
    node_index: int
    kind: str
    lb: float | None = None
    ub: float | None = None
    expectation: float | None = None
    query_index: int | None = None
    many_body_fraction: float | None = None
    status: str | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


class TraceRecorder:
    """Append-only event sink with a monotone clock."""

    def __init__(self, wall_clock: bool = False):
        self.events: list[TraceEvent] = []
        self._wall_clock = wall_clock
        self._t0 = time.perf_counter()

    def _now(self) -> float:
        if self._wall_clock:
            return time.perf_counter() - self._t0
        return (len(self.events) + 1) * 1e-6

    def record(self, kind: str, node_index: int, **payload) -> TraceEvent:
        event = TraceEvent(
            wall_time_s=self._now(), node_index=node_index, kind=kind, **payload
        )
        if self.events and event.wall_time_s < self.events[-1].wall_time_s:
            event = TraceEvent(
                **{**_event_dict(event), "wall_time_s": self.events[-1].wall_time_s}
            )
        self.events.append(event)
        return event


def _event_dict(event: TraceEvent) -> dict:
    return {f.name: getattr(event, f.name) for f in dataclass_fields(TraceEvent)}


@dataclass(frozen=True)
class BoundSeries:
    """Step functions of the incumbent (upper) and lower bound over a horizon.

    Each step list holds (t, value) pairs with strictly increasing t; a value
    holds from its t until the next step (or ``t_end``).
    """

    ub_steps: tuple[tuple[float, float], ...]
    lb_steps: tuple[tuple[float, float], ...]
    t_end: float


def bound_series(events, axis: str = "nodes") -> BoundSeries:
    """Extract the bound-convergence series from a trace.

    ``axis`` selects the horizontal coordinate: "nodes" uses the node index
    of each event, "seconds" its timestamp.
    """
    if axis not in ("nodes", "seconds"):
        raise ValueError("axis must be 'nodes' or 'seconds'")
    if not events:
        raise ValueError("empty trace")

    def coord(e: TraceEvent) -> float:
        return float(e.node_index) if axis == "nodes" else e.wall_time_s

    ub: list[tuple[float, float]] = []
    lb: list[tuple[float, float]] = []
    for e in events:
        if e.kind == "incumbent_update" and e.ub is not None:
            if ub and ub[-1][0] == coord(e):
                ub[-1] = (coord(e), e.ub)
            else:
                ub.append((coord(e), e.ub))
        if e.kind in ("bound_update", "done") and e.lb is not None:
            if lb and lb[-1][0] == coord(e):
                lb[-1] = (coord(e), e.lb)
            else:
                lb.append((coord(e), e.lb))
    return BoundSeries(ub_steps=tuple(ub), lb_steps=tuple(lb), t_end=coord(events[-1]))


def _step_value(steps, t: float) -> float:
    value = None
    for s_t, s_v in steps:
        if s_t <= t:
            value = s_v
        else:
            break
    assert value is not None
    return value


def primal_dual_integral(series: BoundSeries) -> float:
    """Exact integral of UB(t) - LB(t) over the horizon where both exist."""
    if not series.ub_steps or not series.lb_steps:
        raise ValueError("need at least one UB and one LB step")
    t0 = max(series.ub_steps[0][0], series.lb_steps[0][0])
    breakpoints = sorted(
        {t for t, _ in series.ub_steps if t >= t0}
        | {t for t, _ in series.lb_steps if t >= t0}
        | {t0, series.t_end}
    )
    total = 0.0
    for a, b in zip(breakpoints, breakpoints[1:]):
        if a >= series.t_end:
            break
        gap = _step_value(series.ub_steps, a) - _step_value(series.lb_steps, a)
        if gap < -1e-9:
            raise ValueError(f"bounds crossed at t={a}: gap={gap}")
        total += max(gap, 0.0) * (min(b, series.t_end) - a)
    return total


def many_body_fraction(node_model: IsingModel, master_model: IsingModel) -> float:
    """Fraction of the master's pairwise couplings surviving in a node model."""
    master = many_body_count(master_model)
    if master == 0:
        warnings.warn("master model has no couplings; fraction reported as 1.0")
        return 1.0
    return many_body_count(node_model) / master


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_trace(events, path, format: str | None = None) -> None:
    """Write a trace as CSV or JSON (format inferred from the suffix)."""
    fmt = format or ("json" if str(path).endswith(".json") else "csv")
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for e in events:
                writer.writerow([_cell(getattr(e, col)) for col in CSV_COLUMNS])
    elif fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([_event_dict(e) for e in events], fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown trace format {fmt!r}")


def _parse_cell(column: str, text: str):
    if text == "":
        return None
    if column in ("node_index", "query_index"):
        return int(text)
    if column in ("kind", "status"):
        return text
    return float(text)


def load_trace(path, format: str | None = None) -> list[TraceEvent]:
    fmt = format or ("json" if str(path).endswith(".json") else "csv")
    events: list[TraceEvent] = []
    if fmt == "csv":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != CSV_COLUMNS:
                raise ValueError("trace CSV header does not match the schema")
            for row in reader:
                data = {col: _parse_cell(col, cell) for col, cell in zip(CSV_COLUMNS, row)}
                events.append(TraceEvent(**data))
    elif fmt == "json":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        for data in raw:
            events.append(TraceEvent(**data))
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    return events
