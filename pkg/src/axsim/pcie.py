"""PCIe-like interconnect model.

Two routes to the same answer: a closed-form throughput/latency model used by
the system simulator at DMA-burst granularity, and a per-packet event model
(store-and-forward through Switch and Root Complex with a bounded in-flight
window). The two must agree within 1% for transfers of 64 KiB and up; the
test suite enforces that.

Conventions: bandwidth is in GB/s which equals bytes/ns at 1 ns resolution.
Lane rate is the effective post-encoding rate, so link bandwidth is simply
lanes * rate / 8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import Engine
from .errors import ConfigError

VALID_LANES = (1, 2, 4, 8, 16)


@dataclass(frozen=True)
class PcieConfig:
    lanes: int = 4
    lane_rate_gbps: float = 4.0
    packet_bytes: int = 256
    header_bytes: int = 24
    window_bytes: int = 8192
    rc_latency_ns: int = 150
    switch_latency_ns: int = 50
    turnaround_ns: int = 100
    hops: int = 2  # store-and-forward stages: Switch, Root Complex

    def __post_init__(self):
        if self.lanes not in VALID_LANES:
            raise ConfigError(f"pcie.lanes must be one of {VALID_LANES}, got {self.lanes}")
        if self.lane_rate_gbps <= 0:
            raise ConfigError("pcie.lane_rate_gbps must be > 0")
        p = self.packet_bytes
        if not (64 <= p <= 4096) or p & (p - 1):
            raise ConfigError(f"pcie.packet_bytes must be a power of two in [64, 4096], got {p}")
        if self.header_bytes < 0:
            raise ConfigError("pcie.header_bytes must be >= 0")
        if self.window_bytes < p:
            raise ConfigError(
                f"pcie.window_bytes ({self.window_bytes}) must be >= packet_bytes ({p})"
            )
        if min(self.rc_latency_ns, self.switch_latency_ns, self.turnaround_ns) < 0:
            raise ConfigError("pcie latencies must be >= 0")


def effective_bandwidth(cfg: PcieConfig) -> float:
    """Link bandwidth in bytes/ns (= GB/s): lanes x effective lane rate / 8."""
    if cfg.lanes <= 0 or cfg.lane_rate_gbps <= 0:
        raise ConfigError("need at least one lane and a positive lane rate")
    return cfg.lanes * cfg.lane_rate_gbps / 8.0


def fixed_path_ns(cfg: PcieConfig) -> float:
    """Latency of the request/turnaround/completion path excluding serialization.

    The read request crosses Switch and RC as a zero-byte packet, the endpoint
    turns it around, and the completion pays Switch + RC latency again on the
    way back.
    """
    return 2 * (cfg.rc_latency_ns + cfg.switch_latency_ns) + cfg.turnaround_ns


def round_trip_ns(cfg: PcieConfig, payload: int | None = None) -> float:
    p = payload if payload is not None else cfg.packet_bytes
    bw = effective_bandwidth(cfg)
    return fixed_path_ns(cfg) + cfg.hops * (p + cfg.header_bytes) / bw


def throughput(cfg: PcieConfig) -> float:
    """Steady-state payload throughput in bytes/ns.

    min of the link serialization limit BW*p/(p+H) and the in-flight window
    limit floor(W/p)*p / RTT(p).
    """
    p = cfg.packet_bytes
    bw = effective_bandwidth(cfg)
    link_limit = bw * p / (p + cfg.header_bytes)
    window_limit = (cfg.window_bytes // p) * p / round_trip_ns(cfg)
    return min(link_limit, window_limit)


def first_packet_fill_ns(cfg: PcieConfig) -> float:
    """Time until the first payload byte batch lands: fixed path + one
    store-and-forward serialization per hop."""
    bw = effective_bandwidth(cfg)
    return fixed_path_ns(cfg) + cfg.hops * (cfg.packet_bytes + cfg.header_bytes) / bw


def transfer_time(total_bytes: int, cfg: PcieConfig) -> float:
    """Closed-form duration of one DMA transfer of total_bytes.

    fill + total/TP. When the link serialization is the binding limit the
    fill is the first packet's path latency; when the in-flight window binds,
    packets circulate in window-sized generations and the pipeline transient
    is the serialization tail of one window instead.
    """
    if total_bytes <= 0:
        raise ConfigError("transfer size must be > 0")
    p = cfg.packet_bytes
    bw = effective_bandwidth(cfg)
    ser = (p + cfg.header_bytes) / bw
    link_limit = bw * p / (p + cfg.header_bytes)
    window_packets = cfg.window_bytes // p
    window_limit = window_packets * p / round_trip_ns(cfg)
    if window_limit < link_limit:
        # packets circulate in window-sized generations; the pipeline
        # transient is the serialization tail of one window
        fill = (window_packets - 1) * ser
        return fill + total_bytes / window_limit
    return first_packet_fill_ns(cfg) + total_bytes / link_limit


@dataclass
class Transfer:
    direction: str  # "h2d" or "d2h"
    total_bytes: int
    issue_time: int = 0
    completion_time: int = 0


def simulate_transfer(total_bytes: int, cfg: PcieConfig, trace: bool = False):
    """Per-packet event simulation of one read transfer.

    Requests are issued as long as outstanding payload fits the window; each
    completion is forwarded store-and-forward through both hops with FIFO
    links. Returns the completion time, or (completion, arrival_times) when
    trace is set.
    """
    if total_bytes <= 0:
        raise ConfigError("transfer size must be > 0")
    p = cfg.packet_bytes
    if p > cfg.window_bytes:
        raise ConfigError("packet larger than in-flight window")
    bw = effective_bandwidth(cfg)
    req_fixed = cfg.rc_latency_ns + cfg.switch_latency_ns

    eng = Engine()
    sizes = [p] * (total_bytes // p)
    if total_bytes % p:
        sizes.append(total_bytes % p)

    state = {
        "next": 0,
        "outstanding": 0,
        "delivered": 0,
        "hop1_free": 0.0,  # RC egress (completer side)
        "hop2_free": 0.0,  # Switch egress
        "arrivals": [],
    }

    def try_issue(_):
        while state["next"] < len(sizes) and state["outstanding"] + sizes[state["next"]] <= cfg.window_bytes:
            size = sizes[state["next"]]
            state["next"] += 1
            state["outstanding"] += size
            # request flight + endpoint turnaround, then the completion enters hop 1
            ready = eng.now + req_fixed + cfg.turnaround_ns
            eng.schedule(ready, start_completion, size)

    def start_completion(size):
        ser = (size + cfg.header_bytes) / bw
        egress = max(eng.now, state["hop1_free"]) + ser
        state["hop1_free"] = egress
        eng.schedule(math.ceil(egress + cfg.rc_latency_ns), forward_hop2, size)

    def forward_hop2(size):
        ser = (size + cfg.header_bytes) / bw
        egress = max(eng.now, state["hop2_free"]) + ser
        state["hop2_free"] = egress
        eng.schedule(math.ceil(egress + cfg.switch_latency_ns), deliver, size)

    def deliver(size):
        state["outstanding"] -= size
        state["delivered"] += size
        state["arrivals"].append(eng.now)
        try_issue(None)

    eng.schedule(0, try_issue)
    done = eng.run()
    assert state["delivered"] == total_bytes, "packet conservation violated"
    if trace:
        return done, state["arrivals"]
    return done
