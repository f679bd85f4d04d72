"""Canned experiment recipes.

Each recipe reproduces one study: it applies the shipped calibration
constants, pins the workload and system variants that study used, runs the
sweep, and emits a CSV plus two-column plot-data series. Recipes that model
a published comparison carry their own operating point (workload size,
array-speed setting, in-flight window) where one shared configuration cannot
reproduce every headline number; those pins live here, in data, not in the
model code.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .analysis import (REPORT_COLUMNS, TABLE5_COLUMNS, devmem_threshold,
                       mix_models_for_threshold, mix_time, roofline_sweep,
                       rows_to_csv, sweep)
from .calibration import calibrated_defaults
from .errors import ConfigError
from .system import RunConfig, run_config

GEMM_LANE_GRID = [2, 4, 8, 16]
GEMM_RATE_GRID = [2, 4, 8, 16, 32, 64]
PACKET_GRID = [64, 128, 256, 512, 1024, 2048, 4096]
# 4/8/16/32/64 GB/s link settings for the packet study
PACKET_BW_POINTS = [(4, 8), (8, 8), (16, 8), (16, 16), (16, 32)]
MEM_PRESETS = ["ddr3", "ddr4", "ddr5", "hbm2", "gddr6"]
TABLE5_SIZES = [64, 128, 256, 512, 1024, 2048]
VIT_MODELS = ["base", "large", "huge"]

# Reference transformer systems: host memory behind three link speeds, and
# device-side memory.
VIT_SYSTEMS = {
    "pcie-2gb": {"pcie.lanes": 4, "pcie.lane_rate_gbps": 4, "mem.preset": "ddr4",
                 "pcie.packet_bytes": 256},
    "pcie-8gb": {"pcie.lanes": 8, "pcie.lane_rate_gbps": 8, "mem.preset": "ddr4",
                 "pcie.packet_bytes": 256},
    "pcie-64gb": {"pcie.lanes": 16, "pcie.lane_rate_gbps": 32, "mem.preset": "hbm2",
                  "pcie.packet_bytes": 256},
    "devmem": {"mode": "devmem", "mem.device_preset": "hbm2",
               "pcie.packet_bytes": 64},
}

# Figure-specific operating points (see module docstring).
FIG5_POINT = {"workload.n": 1024, "accel.compute_scale": 1.35,
              "pcie.window_bytes": 2304}
FIG6_POINT = {"workload.n": 2048, "accel.compute_scale": 0.25,
              "accel.burst_bytes": 32768, "mode": "devmem",
              "mem.device_preset": "hbm2"}
VIT_POINT = {"workload.kind": "vit", "accel.compute_scale": 1.3}
FIG6_BANDWIDTHS = [8, 16, 25.6, 32, 50, 64, 100, 128, 200, 256]
FIG6_LATENCIES = [1, 3, 6, 12, 18, 24, 30, 36]


@dataclass
class FigureOutput:
    name: str
    rows: list
    series: dict[str, list[tuple]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def write(self, outdir: str) -> list[str]:
        os.makedirs(outdir, exist_ok=True)
        paths = []
        csv_path = os.path.join(outdir, f"{self.name}.csv")
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(rows_to_csv(self.rows))
        paths.append(csv_path)
        for label, points in self.series.items():
            dat = os.path.join(outdir, f"{self.name}_{label}.dat")
            with open(dat, "w", encoding="utf-8") as fh:
                for x, y in points:
                    fh.write(f"{_num(x)} {_num(y)}\n")
            paths.append(dat)
        return paths


def _num(v):
    return f"{v:.6f}".rstrip("0").rstrip(".") if isinstance(v, float) else str(v)


def base_config() -> RunConfig:
    return RunConfig.defaults().apply(calibrated_defaults())


def _quick_thin(values, quick, keep=3):
    if not quick or len(values) <= keep:
        return values
    step = max(1, (len(values) - 1) // (keep - 1))
    out = values[::step]
    return out if out[-1] == values[-1] else out + [values[-1]]


def fig2(quick: bool = False) -> FigureOutput:
    """Roofline: fix the link at 8 GB/s, vary per-tile compute time."""
    cfg = base_config().apply({"workload.n": 1024, "pcie.lanes": 8,
                               "pcie.lane_rate_gbps": 8})
    scales = [0.1, 0.2, 0.4, 0.8, 1.2, 1.8, 2.7, 4.0]
    if quick:
        scales = [0.1, 0.4, 0.8, 1.8, 4.0]
    result = roofline_sweep(cfg, scales)
    rows = sweep(cfg, {"accel.compute_scale": scales})
    series = {"roofline": [(p.compute_time_ns, p.normalized_exec_time)
                           for p in result.points]}
    notes = [f"crossover_compute_ns={_num(result.crossover_compute_ns)}"
             if result.has_crossover else "no crossover in range"]
    return FigureOutput("fig2", rows, series, notes)


def fig3(quick: bool = False) -> FigureOutput:
    """Execution time of GEMM-2048 across lane count and lane rate."""
    cfg = base_config().apply({"workload.n": 2048})
    rows = sweep(cfg, {"pcie.lanes": _quick_thin(GEMM_LANE_GRID, quick),
                       "pcie.lane_rate_gbps": _quick_thin(GEMM_RATE_GRID, quick)})
    series = {}
    for lanes in _quick_thin(GEMM_LANE_GRID, quick):
        pts = [(r["pcie.lane_rate_gbps"], r["normalized_exec_time"])
               for r in rows if r["pcie.lanes"] == lanes]
        series[f"lanes{lanes}"] = sorted(pts)
    return FigureOutput("fig3", rows, series)


def fig4(quick: bool = False) -> FigureOutput:
    """Execution time of GEMM-2048 across packet sizes at five link speeds."""
    cfg = base_config().apply({"workload.n": 2048})
    rows = []
    series = {}
    bw_points = PACKET_BW_POINTS[1:2] if quick else PACKET_BW_POINTS
    run_id = 0
    for lanes, rate in bw_points:
        sub = sweep(cfg.apply({"pcie.lanes": lanes, "pcie.lane_rate_gbps": rate}),
                    {"pcie.packet_bytes": _quick_thin(PACKET_GRID, quick, keep=5)})
        for row in sub:
            row["run_id"] = run_id
            run_id += 1
        rows.extend(sub)
        gbps = lanes * rate // 8
        series[f"bw{gbps}gb"] = [(r["pcie.packet_bytes"], r["total_ns"]) for r in sub]
    fastest = min(r["total_ns"] for r in rows)
    for r in rows:
        r["normalized_exec_time"] = r["total_ns"] / fastest
    return FigureOutput("fig4", rows, series)


def fig5(quick: bool = False) -> FigureOutput:
    """Device-side vs host-side placement across the memory presets."""
    cfg = base_config().apply(FIG5_POINT)
    presets = _quick_thin(MEM_PRESETS, quick)
    rows = []
    run_id = 0
    results = {}
    for preset in presets:
        variants = {
            "devmem": cfg.apply({"mode": "devmem", "mem.device_preset": preset}),
            "host-2gb": cfg.apply({"mem.preset": preset, "pcie.lanes": 4,
                                   "pcie.lane_rate_gbps": 4}),
            "host-64gb": cfg.apply({"mem.preset": preset, "pcie.lanes": 16,
                                    "pcie.lane_rate_gbps": 32}),
        }
        for label, vcfg in variants.items():
            report = run_config(vcfg)
            row = {"run_id": run_id}
            row.update(report.config)
            for col in REPORT_COLUMNS:
                row[col] = getattr(report, col)
            for col in TABLE5_COLUMNS:
                row[col] = report.translation[col]
            rows.append(row)
            results[(preset, label)] = report.total_ns
            run_id += 1
    fastest = min(r["total_ns"] for r in rows)
    for r in rows:
        r["normalized_exec_time"] = r["total_ns"] / fastest
    # speedup relative to device-side DDR4, one series per variant
    baseline = results.get(("ddr4", "devmem")) or min(results.values())
    series = {}
    for label in ("devmem", "host-2gb", "host-64gb"):
        series[label] = [(i, baseline / results[(p, label)])
                         for i, p in enumerate(presets)]
    return FigureOutput("fig5", rows, series,
                        notes=[f"presets={','.join(presets)}"])


def fig6(quick: bool = False) -> FigureOutput:
    """Memory bandwidth (a) and latency (b) sweeps on device-side HBM2."""
    cfg = base_config().apply(FIG6_POINT)
    bw_rows = sweep(cfg, {"mem.device_bandwidth_gbps": _quick_thin(FIG6_BANDWIDTHS, quick)})
    lat_rows = sweep(cfg, {"mem.device_latency_ns": _quick_thin(FIG6_LATENCIES, quick)})
    for i, row in enumerate(lat_rows):
        row["run_id"] = len(bw_rows) + i
    rows = bw_rows + lat_rows
    series = {
        "bandwidth": [(r["mem.device_bandwidth_gbps"], r["normalized_exec_time"])
                      for r in bw_rows],
        "latency": [(r["mem.device_latency_ns"], r["normalized_exec_time"])
                    for r in lat_rows],
    }
    return FigureOutput("fig6", rows, series)


def _vit_reports(quick: bool = False):
    cfg = base_config().apply(VIT_POINT)
    models = ["base"] if quick else VIT_MODELS
    reports = {}
    for model in models:
        for sys_name, overrides in VIT_SYSTEMS.items():
            vcfg = cfg.apply({"workload.vit": model}).apply(overrides)
            reports[(model, sys_name)] = run_config(vcfg)
    return reports


def _reports_to_rows(reports):
    rows = []
    for run_id, ((model, sys_name), report) in enumerate(sorted(
            reports.items(), key=lambda kv: kv[0])):
        row = {"run_id": run_id, "system": sys_name}
        row.update(report.config)
        for col in REPORT_COLUMNS:
            row[col] = getattr(report, col)
        for col in TABLE5_COLUMNS:
            row[col] = report.translation[col]
        rows.append(row)
    fastest = min(r["total_ns"] for r in rows)
    for r in rows:
        r["normalized_exec_time"] = r["total_ns"] / fastest
    return rows


def fig7(quick: bool = False) -> FigureOutput:
    """ViT inference across the four reference systems."""
    reports = _vit_reports(quick)
    rows = _reports_to_rows(reports)
    models = sorted({m for m, _ in reports})
    series = {}
    for sys_name in VIT_SYSTEMS:
        base = {m: reports[(m, "pcie-2gb")].total_ns for m in models}
        series[sys_name] = [(i, base[m] / reports[(m, sys_name)].total_ns)
                            for i, m in enumerate(models)]
    return FigureOutput("fig7", rows, series,
                        notes=[f"models={','.join(models)}"])


def fig8(quick: bool = False) -> FigureOutput:
    """GEMM and non-GEMM components of the fig7 runs."""
    reports = _vit_reports(quick)
    rows = _reports_to_rows(reports)
    models = sorted({m for m, _ in reports})
    series = {}
    for sys_name in VIT_SYSTEMS:
        series[f"{sys_name}_gemm"] = [
            (i, reports[(m, sys_name)].gemm_ns / 1e6) for i, m in enumerate(models)]
        series[f"{sys_name}_nongemm"] = [
            (i, reports[(m, sys_name)].nongemm_ns / 1e6) for i, m in enumerate(models)]
    return FigureOutput("fig8", rows, series,
                        notes=[f"models={','.join(models)}", "series in ms"])


def fig9(quick: bool = False) -> FigureOutput:
    """Mix-model curves: overall time vs non-GEMM fraction, per link speed."""
    reports = _vit_reports(quick=False)
    model = "large"
    rows = _reports_to_rows({k: v for k, v in reports.items() if k[0] == model})
    series = {}
    notes = []
    for sys_name in ("pcie-2gb", "pcie-8gb", "pcie-64gb"):
        dev_m, pcie_m = mix_models_for_threshold(
            reports[(model, "devmem")], reports[(model, sys_name)])
        pts_p, pts_d = [], []
        for i in range(0, 101, 2 if quick else 1):
            w_ng = i / 100
            pts_p.append((i, mix_time(pcie_m, 1 - w_ng)))
            pts_d.append((i, mix_time(dev_m, 1 - w_ng)))
        series[sys_name] = pts_p
        series[f"devmem_vs_{sys_name}"] = pts_d
        th = devmem_threshold(dev_m, pcie_m)
        if th.w_nongemm_star is not None:
            notes.append(f"threshold_{sys_name}_w_nongemm_pct="
                         f"{th.w_nongemm_star * 100:.2f}")
        else:
            notes.append(f"threshold_{sys_name}=none({th.dominant} dominates)")
    return FigureOutput("fig9", rows, series, notes)


def table5(quick: bool = False) -> FigureOutput:
    """Translation metrics across matrix sizes at the 8 GB/s link."""
    cfg = base_config().apply({"pcie.lanes": 8, "pcie.lane_rate_gbps": 8})
    sizes = _quick_thin(TABLE5_SIZES, quick, keep=4)
    rows = sweep(cfg, {"workload.n": sizes})
    series = {"overhead_pct": [(r["workload.n"], r["Trans Overhead"]) for r in rows]}
    return FigureOutput("table5", rows, series)


RECIPES = {
    "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6,
    "fig7": fig7, "fig8": fig8, "fig9": fig9, "table5": table5,
}


def run_figure(name: str, quick: bool = False) -> FigureOutput:
    try:
        recipe = RECIPES[name]
    except KeyError:
        raise ConfigError(
            f"unknown figure '{name}'; valid names: {', '.join(sorted(RECIPES))}"
        ) from None
    return recipe(quick=quick)
