"""Parametric memory hierarchy: DRAM device presets, LRU caches, access modes.

DRAM is a fixed-latency bandwidth pipe with line-granular channel
interleaving; requests on distinct channels overlap, requests on the same
channel serialize. No bank or row state is modeled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import ConfigError

LINE_BYTES = 64
MEMBUS_LATENCY_NS = 10


class AccessMode(Enum):
    DC = "dc"          # through IOCache/LLC, misses go to host DRAM
    DM = "dm"          # host DRAM directly, no cache lookup
    DEVMEM = "devmem"  # device-side DRAM, no PCIe traversal


@dataclass(frozen=True)
class MemoryDeviceSpec:
    name: str
    channels: int
    data_width_bits: int
    bandwidth_gbps: float  # aggregate GB/s (= bytes/ns)
    data_rate_mts: int
    fixed_latency_ns: int
    placement: str = "host"

    def __post_init__(self):
        if self.bandwidth_gbps <= 0:
            raise ConfigError(f"memory bandwidth must be > 0 ({self.name})")
        if self.channels < 1:
            raise ConfigError(f"memory needs >= 1 channel ({self.name})")
        if self.placement not in ("host", "device"):
            raise ConfigError(f"placement must be host|device ({self.name})")


# Memory configuration table. First-word latencies are calibration defaults
# (14 ns DDR-class, 12 ns HBM2/GDDR6); the other columns are fixed.
PRESETS: dict[str, MemoryDeviceSpec] = {
    "ddr3": MemoryDeviceSpec("ddr3", 1, 64, 12.8, 1600, 14),
    "ddr4": MemoryDeviceSpec("ddr4", 1, 64, 19.2, 2400, 14),
    "ddr5": MemoryDeviceSpec("ddr5", 2, 32, 25.6, 3200, 14),
    "hbm2": MemoryDeviceSpec("hbm2", 2, 128, 64.0, 2000, 12),
    "gddr6": MemoryDeviceSpec("gddr6", 2, 64, 32.0, 2000, 12),
}


def preset(name: str, placement: str = "host",
           bandwidth_gbps: float = 0.0, latency_ns: float = 0.0) -> MemoryDeviceSpec:
    """Look up a preset, optionally overriding bandwidth/latency (0 = keep)."""
    try:
        spec = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown memory preset '{name}' (have {sorted(PRESETS)})") from None
    if bandwidth_gbps:
        spec = replace(spec, bandwidth_gbps=bandwidth_gbps)
    if latency_ns:
        spec = replace(spec, fixed_latency_ns=int(latency_ns))
    return replace(spec, placement=placement)


@dataclass(frozen=True)
class CacheSpec:
    capacity_bytes: int = 2 * 1024 * 1024  # LLC preset
    line_bytes: int = LINE_BYTES
    associativity: int = 16
    hit_latency_ns: int = 4

    def __post_init__(self):
        if self.capacity_bytes % (self.line_bytes * self.associativity):
            raise ConfigError("cache capacity must divide into line*associativity sets")

    @property
    def sets(self) -> int:
        return self.capacity_bytes // (self.line_bytes * self.associativity)


IOCACHE_SPEC = CacheSpec(capacity_bytes=32 * 1024, associativity=8, hit_latency_ns=2)


class Cache:
    """Set-associative LRU cache over 64-byte lines."""

    def __init__(self, spec: CacheSpec):
        self.spec = spec
        self._sets: list[dict[int, int]] = [dict() for _ in range(spec.sets)]
        self._tick = 0
        self.hits = 0
        self.misses = 0

    def _locate(self, address: int):
        line = address // self.spec.line_bytes
        return self._sets[line % self.spec.sets], line

    def lookup(self, address: int, allocate: bool = True) -> bool:
        """Probe (and on miss optionally allocate) the line holding address."""
        ways, line = self._locate(address)
        self._tick += 1
        if line in ways:
            ways[line] = self._tick
            self.hits += 1
            return True
        self.misses += 1
        if allocate:
            if len(ways) >= self.spec.associativity:
                victim = min(ways, key=ways.get)
                del ways[victim]
            ways[line] = self._tick
        return False

    def contains(self, address: int) -> bool:
        ways, line = self._locate(address)
        return line in ways


class MemoryDevice:
    """Channel-interleaved DRAM timing model."""

    def __init__(self, spec: MemoryDeviceSpec):
        self.spec = spec
        self._channel_free = [0.0] * spec.channels
        self.bytes_served = 0

    @property
    def channel_bandwidth(self) -> float:
        return self.spec.bandwidth_gbps / self.spec.channels

    def service(self, address: int, size: int, arrival: float) -> float:
        """Completion time of one request; lines round-robin over channels."""
        if size <= 0:
            raise ConfigError("zero-byte memory request")
        first = address // LINE_BYTES
        last = (address + size - 1) // LINE_BYTES
        done = arrival
        for ch in range(self.spec.channels):
            nlines = sum(1 for ln in range(first, last + 1) if ln % self.spec.channels == ch)
            if not nlines:
                continue
            start = max(arrival, self._channel_free[ch])
            end = start + nlines * LINE_BYTES / self.channel_bandwidth
            self._channel_free[ch] = end
            done = max(done, end)
        self.bytes_served += size
        return done + self.spec.fixed_latency_ns

    def stream_rate(self) -> float:
        """Throughput seen by a long line-sequential stream (all channels)."""
        return self.spec.bandwidth_gbps


class MemoryPath:
    """Composition of cache hierarchy and DRAM behind one access mode."""

    def __init__(self, mode: AccessMode, host: MemoryDevice | None,
                 device: MemoryDevice | None, llc: Cache | None,
                 snoop_ns: int = 20, membus_ns: int = MEMBUS_LATENCY_NS):
        if mode is AccessMode.DEVMEM and device is None:
            raise ConfigError("mode=devmem requires a device-side memory spec (mem.device_preset)")
        if mode is not AccessMode.DEVMEM and host is None:
            raise ConfigError("host-side access mode without host memory")
        self.mode = mode
        self.host = host
        self.device = device
        self.llc = llc
        self.snoop_ns = snoop_ns
        self.membus_ns = membus_ns

    def access(self, address: int, size: int, arrival: float, write: bool = False) -> float:
        """Completion time for one request under the configured mode."""
        if self.mode is AccessMode.DEVMEM:
            return self.device.service(address, size, arrival)
        if self.mode is AccessMode.DM:
            return self.host.service(address, size, arrival + self.membus_ns)
        # DC: probe per line; hits return at hit latency, misses pay
        # MemBus + DRAM + coherence snoop.
        spec = self.llc.spec
        t_hit = arrival + spec.hit_latency_ns
        first = address - address % spec.line_bytes
        miss_lines = [
            ln for ln in range(first, address + size, spec.line_bytes)
            if not self.llc.lookup(ln)
        ]
        if not miss_lines:
            return t_hit
        done = t_hit
        for ln in miss_lines:
            done = max(done, self.host.service(
                ln, spec.line_bytes, arrival + spec.hit_latency_ns + self.membus_ns))
        return done + self.snoop_ns
