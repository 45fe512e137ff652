"""Step-latency microbenchmark.

Idle path: a stream of HEARTBEATs (pre-filter only).  Active path: one
sustained mission upload, every step accepted.  Results are reported next
to the published reference figures, which were measured on different
hardware and are shown for scale, never asserted.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from tempfile import TemporaryDirectory

from . import cdriver
from .interp import DecodedMessage, GCS_TO_UAV, monitor_init, monitor_step
from .pipeline import Compiled
from .scenarios import generate_scenario
from .synth import emit_monitor

# Published reference points (different hardware): idle-state step and
# active-monitoring step of the same monitor architecture.
REFERENCE_IDLE_NS = 123
REFERENCE_ACTIVE_NS = 3_880
REFERENCE_LABEL = "published reference, different hardware"

MAX_MISSION_ITEMS = 65_534  # count refinement admits 1..65534


@dataclass(frozen=True)
class PathStats:
    samples: int
    median_ns: float
    p99_ns: float
    mean_ns: float


@dataclass(frozen=True)
class BenchReport:
    engine: str
    iterations: int
    idle: PathStats
    active: PathStats

    def rows(self) -> list[list[str]]:
        def fmt(ns: float) -> str:
            return f"{ns / 1000:.2f}"

        return [
            ["path", "engine", "median_us", "p99_us", "mean_us", "samples"],
            ["idle", self.engine, fmt(self.idle.median_ns), fmt(self.idle.p99_ns),
             fmt(self.idle.mean_ns), str(self.idle.samples)],
            ["active", self.engine, fmt(self.active.median_ns), fmt(self.active.p99_ns),
             fmt(self.active.mean_ns), str(self.active.samples)],
            ["idle", REFERENCE_LABEL, fmt(REFERENCE_IDLE_NS), "-", "-", "-"],
            ["active", REFERENCE_LABEL, fmt(REFERENCE_ACTIVE_NS), "-", "-", "-"],
        ]

    def to_json(self) -> dict:
        return {
            "engine": self.engine,
            "iterations": self.iterations,
            "idle": vars(self.idle) | {"reference_ns": REFERENCE_IDLE_NS},
            "active": vars(self.active) | {"reference_ns": REFERENCE_ACTIVE_NS},
            "reference_label": REFERENCE_LABEL,
        }


def _stats(samples: list[int]) -> PathStats:
    ordered = sorted(samples)
    p99 = ordered[min(len(ordered) - 1, int(len(ordered) * 0.99))]
    return PathStats(
        samples=len(samples),
        median_ns=statistics.median(ordered),
        p99_ns=float(p99),
        mean_ns=statistics.fmean(ordered),
    )


def _idle_script(compiled: Compiled, iterations: int) -> list[tuple[int, DecodedMessage]]:
    hb = compiled.dialect.schema("HEARTBEAT")
    msg_id = hb.msg_id if hb is not None else 0
    msg = DecodedMessage(msg_id, {"type": 2, "autopilot": 3, "base_mode": 1,
                                  "custom_mode": 0, "system_status": 4, "mavlink_version": 3})
    return [(GCS_TO_UAV, msg)] * iterations


def _active_script(compiled: Compiled, iterations: int) -> list[list[tuple[int, DecodedMessage]]]:
    """Mission scripts totalling at least `iterations` accepted steps."""
    scripts = []
    remaining = iterations
    while remaining > 0:
        n = min(MAX_MISSION_ITEMS, max(1, (remaining - 2 + 1) // 2))
        script = list(generate_scenario("happy", (n,), compiled.dialect).script)
        scripts.append(script)
        remaining -= len(script)
    return scripts


def bench_step_latency(compiled: Compiled, engine: str = "interpreter",
                       iterations: int = 10_000,
                       driver_exe: str | Path | None = None) -> BenchReport:
    if iterations < 1:
        raise ValueError("iterations must be positive")
    assert compiled.graph is not None

    idle = _idle_script(compiled, iterations)
    active_scripts = _active_script(compiled, iterations)

    if engine == "interpreter":
        idle_ns = _time_interpreter(compiled, [idle])
        active_ns = _time_interpreter(compiled, active_scripts)
    elif engine == "compiled":
        idle_ns = _time_compiled(compiled, [idle], driver_exe)
        active_ns = _time_compiled(compiled, active_scripts, driver_exe)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    return BenchReport(engine=engine, iterations=iterations,
                       idle=_stats(idle_ns), active=_stats(active_ns))


def _time_interpreter(compiled: Compiled, scripts) -> list[int]:
    samples: list[int] = []
    for script in scripts:
        mon = monitor_init(compiled.graph)
        for direction, msg in script:
            t0 = time.perf_counter_ns()
            mon, _ = monitor_step(mon, direction, msg)
            samples.append(time.perf_counter_ns() - t0)
    return samples


def _time_compiled(compiled: Compiled, scripts, driver_exe) -> list[int]:
    lines: list[str] = []
    for script in scripts:
        lines.append(cdriver.RESET_LINE)
        lines.extend(cdriver.trace_line(d, m) for d, m in script)
    with TemporaryDirectory(prefix="mavmon-bench-") as tmp:
        exe = driver_exe
        if exe is None:
            unit = emit_monitor(compiled.graph, compiled.spec, compiled.report)
            exe = cdriver.build_driver(unit, tmp)
        out = cdriver.run_driver(exe, lines, timing=True)
    samples = []
    for row in out:
        parts = row.split()
        if parts[0] == "RESET":
            continue
        samples.append(int(parts[1]))
    return samples


def write_report(report: BenchReport, out_dir: str | Path) -> dict[str, Path]:
    """Write latency.csv plus a latency.png figure into `out_dir`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "latency.csv"
    with csv_path.open("w", newline="") as fh:
        csv.writer(fh).writerows(report.rows())

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    paths = ["idle", "active"]
    ours = [report.idle.median_ns / 1000, report.active.median_ns / 1000]
    ref = [REFERENCE_IDLE_NS / 1000, REFERENCE_ACTIVE_NS / 1000]
    x = range(len(paths))
    ax.bar([i - 0.2 for i in x], ours, width=0.4, label=f"this run ({report.engine})")
    ax.bar([i + 0.2 for i in x], ref, width=0.4, label=REFERENCE_LABEL)
    ax.set_xticks(list(x))
    ax.set_xticklabels(paths)
    ax.set_ylabel("median step latency (us)")
    ax.set_yscale("log")
    ax.set_title("monitor step latency")
    ax.legend()
    fig.tight_layout()
    png_path = out / "latency.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "png": png_path}
