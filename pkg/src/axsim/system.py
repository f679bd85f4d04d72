"""Run configuration and the composed system simulation.

A run wires the event engine, interconnect, memory path, SMMU, and
accelerator together and executes one workload graph. GEMM operations stream
through the DMA at burst granularity (one outstanding burst descriptor, so
every burst pays the pipeline fill of its path); non-GEMM operations execute
on the host CPU timeline. Operations serialize in graph order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import pcie as pcie_mod
from .accel import (ELEM_BYTES, TILE, GemmOp, LocalBuffer, SystolicConfig,
                    plan_blocks, tile_compute_ns)
from .engine import Engine
from .errors import ConfigError, SimFault
from .memsys import (AccessMode, Cache, CacheSpec, IOCACHE_SPEC, MemoryDevice,
                     preset)
from .smmu import PAGE_BYTES, PageTable, Smmu, footprint_pages
from .workload import (NonGemmOp, NonGemmParams, WorkloadGraph, build_gemm,
                       build_vit, nongemm_time, vit_spec)

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_bool(s):
    if isinstance(s, bool):
        return s
    try:
        return _BOOL[str(s).strip().lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got '{s}'") from None


# Key -> (default, parser). Defaults reproduce the reference system: 1 GHz
# host clock, PCIe x4 at 4 Gb/s effective, DDR3 host memory, 2 MB LLC,
# 32 kB IOCache, DC access, 16x16 systolic array.
DEFAULTS: dict[str, tuple] = {
    "pcie.lanes": (4, int),
    "pcie.lane_rate_gbps": (4.0, float),
    "pcie.packet_bytes": (256, int),
    "pcie.header_bytes": (24, int),
    "pcie.window_bytes": (8192, int),
    "pcie.rc_latency_ns": (150, int),
    "pcie.switch_latency_ns": (50, int),
    "pcie.turnaround_ns": (100, int),
    "mem.preset": ("ddr3", str),
    "mem.placement": ("host", str),
    "mem.bandwidth_gbps": (0.0, float),   # 0 = preset value
    "mem.latency_ns": (0.0, float),       # 0 = preset value
    "mem.device_preset": ("", str),
    "mem.device_bandwidth_gbps": (0.0, float),
    "mem.device_latency_ns": (0.0, float),
    "cache.llc_bytes": (2 * 1024 * 1024, int),
    "cache.iocache_bytes": (32 * 1024, int),
    "mode": ("dc", str),
    "membus.latency_ns": (10, int),
    "snoop.latency_ns": (20, int),
    "smmu.enabled": (True, _parse_bool),
    "smmu.utlb_entries": (32, int),
    "smmu.levels": (3, int),
    "smmu.walk_cache_entries": (2048, int),
    "accel.rows": (16, int),
    "accel.cols": (16, int),
    "accel.fill_cycles": (32, int),
    "accel.compute_scale": (1.0, float),
    "accel.buffer_bytes": (8 * 1024 * 1024, int),
    "accel.burst_bytes": (12288, int),
    "nongemm.cost_scale": (1.0, float),
    "numa.bandwidth_gbps": (8.0, float),
    "numa.latency_ns": (0.0, float),
    "sim.t_other_ns": (0, int),
    "workload.kind": ("gemm", str),
    "workload.n": (64, int),
    "workload.vit": ("base", str),
    "workload.seq_len": (197, int),
    "workload.vit_heads": (0, int),
}


class RunConfig(dict):
    """Flat, validated key-value configuration."""

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls((k, v) for k, (v, _) in DEFAULTS.items())

    def apply(self, overrides: dict) -> "RunConfig":
        out = RunConfig(self)
        for key, value in overrides.items():
            out[key] = coerce(key, value)
        return out

    def snapshot(self) -> dict:
        return {k: self[k] for k in sorted(self)}


def coerce(key: str, value):
    if key not in DEFAULTS:
        raise ConfigError(f"unknown configuration key '{key}'")
    _, parser = DEFAULTS[key]
    try:
        return parser(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = RunConfig(base) if base is not None else RunConfig.defaults()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got '{raw.strip()}'")
        key, _, value = line.partition("=")
        try:
            cfg[key.strip()] = coerce(key.strip(), value.strip())
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return cfg


def format_config(cfg: RunConfig) -> str:
    return "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg)) + "\n"


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


@dataclass
class SimReport:
    total_ns: int = 0
    gemm_ns: int = 0
    nongemm_ns: int = 0
    bytes_h2d: int = 0
    bytes_d2h: int = 0
    translation: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def validate(self):
        if self.gemm_ns + self.nongemm_ns > self.total_ns:
            raise SimFault("component times exceed total")


# Virtual layout of the operand regions, one 256 GiB slot per GEMM op.
# Operands are stored panel-major (16-row panels of A, 16-column panels of B,
# output tiles packed per panel) so every DMA burst reads one contiguous range.
_REGION_STRIDE = 1 << 38
_OPERAND_STRIDE = 1 << 36
_PA_OFFSET = 1 << 52


class _GemmPipeline:
    """Fetch engine, systolic array, and writeback engine for one GEMM.

    Fetch items run strictly in order with one outstanding burst descriptor.
    An A block is gated on the previous row block's compute finishing (its
    buffer half is recycled); B panel q is gated on compute of panel q-2
    (two panel slots). Block columns compute in order once their operands
    arrive; finished output tiles stage onto the d2h stream.
    """

    def __init__(self, sys: "System", op: GemmOp, start: float, region: int):
        self.sys = sys
        self.op = op
        self.start = start
        self.plan = plan_blocks(op, sys.buffer.capacity)
        self.tile_ns = tile_compute_ns(op, sys.systolic)
        self.panel_bytes = TILE * op.k * ELEM_BYTES
        self.cols = op.tiles_n
        self.rows = self.plan.row_blocks
        slot = (1 + region) * _REGION_STRIDE
        self.a_base = slot
        self.b_base = slot + _OPERAND_STRIDE
        self.c_base = slot + 2 * _OPERAND_STRIDE
        total_bytes = op.a_bytes + op.b_bytes + op.c_bytes
        self.cache_resident = (sys.mode is AccessMode.DC
                               and total_bytes <= sys.llc.spec.capacity_bytes)
        self.seen_b: set[int] = set()

        # fetch queue: per row block, the A block then every B panel
        self.fetch_items: list[tuple] = []
        for r in range(self.rows):
            self.fetch_items.append(("A", r))
            for j in range(self.cols):
                self.fetch_items.append(("B", r, j))
        self.fetch_idx = 0
        self.fetch_busy = False
        self.fetch_free_at = start

        self.a_ready: dict[int, float] = {}
        self.b_ready: dict[tuple, float] = {}
        self.compute_q = 0  # next block column, linear index r*cols+j
        self.compute_busy = False
        self.compute_done_q = -1
        self.compute_free_at = start
        self.wb_free_at = start
        self.last_wb = start
        self.finished = None

    def bm(self, r: int) -> int:
        return min(self.plan.block_rows, self.op.tiles_m - r * self.plan.block_rows)

    # -- fetch engine -------------------------------------------------------

    def _gate_of(self, item) -> int:
        """Compute index (linear) that must be done before this fetch."""
        if item[0] == "A":
            return item[1] * self.cols - 1
        r, j = item[1], item[2]
        return r * self.cols + j - 2

    def try_fetch(self, _=None):
        if self.fetch_busy or self.fetch_idx >= len(self.fetch_items):
            return
        item = self.fetch_items[self.fetch_idx]
        if self._gate_of(item) > self.compute_done_q:
            return  # a compute completion will wake us
        self.fetch_idx += 1
        self.fetch_busy = True
        if item[0] == "A":
            r = item[1]
            addr = self.a_base + r * self.plan.block_rows * self.panel_bytes
            nbytes = self.bm(r) * self.panel_bytes
            warm = False  # A is visited exactly once
            if r > 0:  # gate guarantees the previous block is fully consumed
                self.sys.buffer.release(self.bm(r - 1) * self.panel_bytes)
        else:
            _, r, j = item
            addr = self.b_base + j * self.panel_bytes
            nbytes = self.panel_bytes
            warm = self.cache_resident and j in self.seen_b
            self.seen_b.add(j)
        self.sys.buffer.acquire(nbytes)
        begin = max(self.sys.engine.now, self.fetch_free_at)
        duration = self.sys.fetch_burst_ns(addr, nbytes, warm)
        end = begin + duration
        self.fetch_free_at = end
        self.sys.count_fetch(nbytes)
        self.sys.engine.schedule(int(math.ceil(end)), self._fetch_done, item)

    def _fetch_done(self, item):
        self.fetch_busy = False
        if item[0] == "A":
            self.a_ready[item[1]] = self.fetch_free_at
        else:
            self.b_ready[(item[1], item[2])] = self.fetch_free_at
        self.try_compute()
        self.try_fetch()

    # -- systolic array -----------------------------------------------------

    def try_compute(self, _=None):
        if self.compute_busy or self.compute_q >= self.rows * self.cols:
            return
        r, j = divmod(self.compute_q, self.cols)
        if r not in self.a_ready or (r, j) not in self.b_ready:
            return
        ready = max(self.a_ready[r], self.b_ready[(r, j)],
                    self.compute_free_at, self.sys.engine.now)
        end = ready + self.bm(r) * self.tile_ns
        self.compute_busy = True
        self.compute_free_at = end
        self.sys.engine.schedule(int(math.ceil(end)), self._compute_done, (r, j))

    def _compute_done(self, rj):
        r, j = rj
        self.compute_busy = False
        self.compute_done_q = r * self.cols + j
        self.compute_q += 1
        self.sys.buffer.release(self.panel_bytes)  # B panel consumed
        wb_bytes = self.bm(r) * TILE * TILE * ELEM_BYTES
        wb_addr = self.c_base + (j * self.op.tiles_m + r * self.plan.block_rows) * TILE * TILE * ELEM_BYTES
        self._writeback(wb_addr, wb_bytes, self.compute_free_at)
        if self.compute_done_q == self.rows * self.cols - 1:
            self.sys.buffer.release(self.bm(r) * self.panel_bytes)  # last A block
            self.finished = max(self.compute_free_at, self.last_wb)
        self.try_fetch()
        self.try_compute()

    # -- writeback engine ----------------------------------------------------

    def _writeback(self, addr: int, nbytes: int, ready: float):
        t = max(self.wb_free_at, ready)
        off = 0
        while off < nbytes:
            leg = min(self.sys.burst_bytes, nbytes - off)
            stall = self.sys.translate_range(addr + off, leg)
            t += stall + self.sys.writeback_burst_ns(leg)
            off += leg
        self.wb_free_at = t
        self.last_wb = max(self.last_wb, t)
        self.sys.count_writeback(nbytes)

    def run(self) -> float:
        self.sys.engine.schedule(int(math.ceil(self.start)), self.try_fetch)
        self.sys.engine.run()
        if self.finished is None:
            raise SimFault("GEMM pipeline did not complete")
        return self.finished


class System:
    """One simulated system instance; owns every component."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.engine = Engine()
        self.pcie = pcie_mod.PcieConfig(
            lanes=cfg["pcie.lanes"],
            lane_rate_gbps=cfg["pcie.lane_rate_gbps"],
            packet_bytes=cfg["pcie.packet_bytes"],
            header_bytes=cfg["pcie.header_bytes"],
            window_bytes=cfg["pcie.window_bytes"],
            rc_latency_ns=cfg["pcie.rc_latency_ns"],
            switch_latency_ns=cfg["pcie.switch_latency_ns"],
            turnaround_ns=cfg["pcie.turnaround_ns"],
        )
        try:
            self.mode = AccessMode(cfg["mode"])
        except ValueError:
            raise ConfigError(f"mode must be dc|dm|devmem, got '{cfg['mode']}'") from None

        placement = cfg["mem.placement"]
        if placement not in ("host", "device"):
            raise ConfigError("mem.placement must be host|device")
        self.host_spec = preset(cfg["mem.preset"], "host",
                                cfg["mem.bandwidth_gbps"], cfg["mem.latency_ns"])
        device_name = cfg["mem.device_preset"] or (
            cfg["mem.preset"] if placement == "device" else "")
        if self.mode is AccessMode.DEVMEM and not device_name:
            raise ConfigError("mode=devmem needs device-side memory: set "
                              "mem.device_preset (or mem.placement=device)")
        if device_name:
            bw = cfg["mem.device_bandwidth_gbps"] or (
                cfg["mem.bandwidth_gbps"] if placement == "device" else 0.0)
            lat = cfg["mem.device_latency_ns"] or (
                cfg["mem.latency_ns"] if placement == "device" else 0.0)
            self.device_spec = preset(device_name, "device", bw, lat)
        else:
            self.device_spec = None

        self.host_mem = MemoryDevice(self.host_spec)
        self.device_mem = MemoryDevice(self.device_spec) if self.device_spec else None
        self.llc = Cache(CacheSpec(capacity_bytes=cfg["cache.llc_bytes"]))
        self.iocache = Cache(CacheSpec(
            capacity_bytes=cfg["cache.iocache_bytes"],
            associativity=IOCACHE_SPEC.associativity,
            hit_latency_ns=IOCACHE_SPEC.hit_latency_ns))
        self.systolic = SystolicConfig(
            rows=cfg["accel.rows"], cols=cfg["accel.cols"],
            tile_fill_cycles=cfg["accel.fill_cycles"],
            compute_scale=cfg["accel.compute_scale"])
        self.buffer = LocalBuffer(cfg["accel.buffer_bytes"])
        self.burst_bytes = int(cfg["accel.burst_bytes"])
        if self.burst_bytes < self.pcie.packet_bytes:
            raise ConfigError("accel.burst_bytes must be >= pcie.packet_bytes")

        self.smmu_enabled = bool(cfg["smmu.enabled"]) and self.mode is not AccessMode.DEVMEM
        self.page_table = PageTable(levels=cfg["smmu.levels"])
        # walk reads travel the DC path: uncached PTE lines pay the walker's
        # request issue, MemBus + DRAM + coherence snoop; cached lines return
        # at LLC speed
        cold_read = (20 + self.host_spec.fixed_latency_ns + cfg["membus.latency_ns"]
                     + cfg["snoop.latency_ns"])
        self.smmu = Smmu(self.page_table, utlb_entries=cfg["smmu.utlb_entries"],
                         walk_read_cold_ns=float(cold_read),
                         walk_read_warm_ns=float(self.llc.spec.hit_latency_ns * 2),
                         walk_cache_entries=cfg["smmu.walk_cache_entries"])
        self.nongemm_params = NonGemmParams(
            cost_scale=cfg["nongemm.cost_scale"],
            numa_bandwidth_gbps=cfg["numa.bandwidth_gbps"],
            numa_latency_ns=cfg["numa.latency_ns"])

        self.bytes_h2d = 0
        self.bytes_d2h = 0
        self._regions = 0

    # -- path timing ---------------------------------------------------------

    def _mem_extra_fill(self, warm: bool) -> float:
        mb = self.cfg["membus.latency_ns"]
        if self.mode is AccessMode.DM:
            return mb + self.host_spec.fixed_latency_ns
        hit = self.llc.spec.hit_latency_ns + self.iocache.spec.hit_latency_ns
        if warm:
            return hit
        return hit + mb + self.host_spec.fixed_latency_ns + self.cfg["snoop.latency_ns"]

    def fetch_burst_ns(self, addr: int, nbytes: int, warm: bool) -> float:
        """Duration of streaming one contiguous range h2d, burst by burst."""
        total = 0.0
        if self.mode is AccessMode.DEVMEM:
            fill = float(self.device_spec.fixed_latency_ns)
            rate = self.device_mem.stream_rate()
        else:
            link_tp = pcie_mod.throughput(self.pcie)
            rate = link_tp if warm else min(link_tp, self.host_mem.stream_rate())
            fill = pcie_mod.first_packet_fill_ns(self.pcie) + self._mem_extra_fill(warm)
        off = 0
        while off < nbytes:
            leg = min(self.burst_bytes, nbytes - off)
            stall = self.translate_range(addr + off, leg)
            total += stall + fill + leg / rate
            off += leg
        return total

    def writeback_burst_ns(self, nbytes: int) -> float:
        if self.mode is AccessMode.DEVMEM:
            return self.device_spec.fixed_latency_ns + nbytes / self.device_mem.stream_rate()
        bw = pcie_mod.effective_bandwidth(self.pcie)
        p = self.pcie.packet_bytes
        fixed = (self.pcie.rc_latency_ns + self.pcie.switch_latency_ns
                 + self.pcie.hops * (p + self.pcie.header_bytes) / bw
                 + self.cfg["membus.latency_ns"] + self.host_spec.fixed_latency_ns)
        tp = min(pcie_mod.throughput(self.pcie), self.host_mem.stream_rate())
        return fixed + nbytes / tp

    def translate_range(self, addr: int, nbytes: int) -> int:
        """Translate every page one burst touches; returns total stall ns."""
        if not self.smmu_enabled:
            return 0
        stall = 0
        p = self.pcie.packet_bytes
        page = addr - addr % PAGE_BYTES
        end = addr + nbytes
        while page < end:
            lo, hi = max(addr, page), min(end, page + PAGE_BYTES)
            requests = max(1, math.ceil((hi - lo) / p))
            _, s = self.smmu.translate(lo, count=requests)
            stall += s
            page += PAGE_BYTES
        return stall

    def count_fetch(self, nbytes: int):
        if self.mode is not AccessMode.DEVMEM:
            self.bytes_h2d += nbytes

    def count_writeback(self, nbytes: int):
        if self.mode is not AccessMode.DEVMEM:
            self.bytes_d2h += nbytes

    # -- run orchestration ----------------------------------------------------

    def run_gemm(self, op: GemmOp, start: float) -> float:
        region = self._regions
        self._regions += 1
        pipeline = _GemmPipeline(self, op, start, region)
        # regions are mapped at panel granularity (ragged edges padded)
        panel = pipeline.panel_bytes
        for base, size in ((pipeline.a_base, op.tiles_m * panel),
                           (pipeline.b_base, op.tiles_n * panel),
                           (pipeline.c_base, op.tiles * TILE * TILE * ELEM_BYTES)):
            self.page_table.map_region(base, size, base + _PA_OFFSET)
        return pipeline.run()

    def run(self, graph: WorkloadGraph | None = None) -> SimReport:
        if graph is None:
            graph = build_workload(self.cfg)
        residency = "device" if self.mode is AccessMode.DEVMEM else "host"
        clock = float(self.cfg["sim.t_other_ns"])
        gemm_ns = 0.0
        nongemm_ns = 0.0
        for op in graph.ops:
            if isinstance(op, GemmOp):
                end = self.run_gemm(op, clock)
                gemm_ns += end - clock
                clock = end
            elif isinstance(op, NonGemmOp):
                dur = nongemm_time(op, residency, self.nongemm_params)
                nongemm_ns += dur
                clock += dur
            else:
                raise SimFault(f"unknown op type {type(op)!r}")

        gemms = graph.gemm_ops
        if len(gemms) == 1 and not graph.nongemm_ops and gemms[0].m == gemms[0].n == gemms[0].k:
            footprint = footprint_pages(gemms[0].m)
        else:
            footprint = graph.footprint_pages()
        total = int(math.ceil(clock))
        report = SimReport(
            total_ns=total,
            gemm_ns=int(gemm_ns),
            nongemm_ns=int(nongemm_ns),
            bytes_h2d=self.bytes_h2d,
            bytes_d2h=self.bytes_d2h,
            translation=self.smmu.snapshot(footprint, total),
            config=self.cfg.snapshot(),
        )
        report.validate()
        return report


def build_workload(cfg: RunConfig) -> WorkloadGraph:
    kind = cfg["workload.kind"]
    if kind == "gemm":
        return build_gemm(cfg["workload.n"])
    if kind == "vit":
        spec = vit_spec(cfg["workload.vit"], cfg["workload.seq_len"],
                        cfg["workload.vit_heads"])
        return build_vit(spec)
    raise ConfigError(f"workload.kind must be gemm|vit, got '{kind}'")


def run_config(cfg: RunConfig) -> SimReport:
    return System(cfg).run()
