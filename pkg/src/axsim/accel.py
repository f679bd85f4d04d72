"""Systolic-array GEMM accelerator: functional model, tile timing, and the
operand blocking that the DMA engine streams.

The array is output-stationary: an output tile accumulates over the full
inner dimension in one pass, so per-tile time is scale * (k + fill) cycles.
The DMA keeps a panel block of A rows resident in the local buffer and
streams B column panels past it, which makes B traffic proportional to the
number of row blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

TILE = 16
ELEM_BYTES = 4


@dataclass(frozen=True)
class SystolicConfig:
    rows: int = TILE
    cols: int = TILE
    clock_ghz: float = 1.0
    tile_fill_cycles: int = 2 * TILE  # array fill + drain
    compute_scale: float = 1.0

    def __post_init__(self):
        if self.rows != self.cols:
            raise ConfigError("systolic array must be square")
        if self.compute_scale <= 0:
            raise ConfigError("accel.compute_scale must be > 0")


@dataclass(frozen=True)
class GemmOp:
    m: int
    n: int
    k: int

    def __post_init__(self):
        if min(self.m, self.n, self.k) < 1:
            raise ConfigError("GEMM dimensions must be >= 1")

    @property
    def tiles_m(self) -> int:
        return math.ceil(self.m / TILE)

    @property
    def tiles_n(self) -> int:
        return math.ceil(self.n / TILE)

    @property
    def tiles(self) -> int:
        return self.tiles_m * self.tiles_n

    @property
    def a_bytes(self) -> int:
        return self.m * self.k * ELEM_BYTES

    @property
    def b_bytes(self) -> int:
        return self.k * self.n * ELEM_BYTES

    @property
    def c_bytes(self) -> int:
        return self.m * self.n * ELEM_BYTES

    @property
    def flops(self) -> int:
        return 2 * self.m * self.n * self.k


def gemm_functional(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Integer GEMM with wraparound 32-bit arithmetic.

    Accumulating in int64 and truncating to 32 bits afterwards is exact:
    both wrap modulo powers of two and only the low 32 bits survive.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ConfigError(f"GEMM shape mismatch: {a.shape} x {b.shape}")
    with np.errstate(over="ignore"):
        acc = a.astype(np.int64) @ b.astype(np.int64)
    return (acc & 0xFFFFFFFF).astype(np.uint32).astype(np.int32)


def systolic_matmul(a: np.ndarray, b: np.ndarray, buffer_bytes: int = 8 * 1024 * 1024) -> np.ndarray:
    """Functional model of the array: walk the output in the same panel-block
    order the DMA streams, accumulating per 16x16 tile in wrapping int32."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ConfigError(f"GEMM shape mismatch: {a.shape} x {b.shape}")
    op = GemmOp(a.shape[0], b.shape[1], a.shape[1])
    from_plan = max(1, (buffer_bytes // 2) // (TILE * op.k * ELEM_BYTES))
    bm = min(from_plan, MAX_RESIDENT_PANELS, op.tiles_m)
    out = np.zeros((op.m, op.n), dtype=np.int64)
    a64 = a.astype(np.int64)
    b64 = b.astype(np.int64)
    for r0 in range(0, op.tiles_m, bm):
        rows = slice(r0 * TILE, min((r0 + bm) * TILE, op.m))
        for j in range(op.tiles_n):
            cols = slice(j * TILE, min((j + 1) * TILE, op.n))
            acc = np.zeros((rows.stop - rows.start, cols.stop - cols.start), np.int64)
            for k0 in range(0, op.k, TILE):
                ks = slice(k0, min(k0 + TILE, op.k))
                acc = (acc + a64[rows, ks] @ b64[ks, cols]) & 0xFFFFFFFF
            out[rows, cols] = acc
    return (out & 0xFFFFFFFF).astype(np.uint32).astype(np.int32)


def gemm_compute_time(op: GemmOp, cfg: SystolicConfig) -> int:
    """Total systolic compute time in ns: tiles * scale * (k + fill)."""
    per_tile = cfg.compute_scale * (op.k + cfg.tile_fill_cycles) / cfg.clock_ghz
    return int(round(op.tiles * per_tile))


def tile_compute_ns(op: GemmOp, cfg: SystolicConfig) -> float:
    return cfg.compute_scale * (op.k + cfg.tile_fill_cycles) / cfg.clock_ghz


class LocalBuffer:
    """Occupancy tracker for the accelerator-side staging buffer."""

    def __init__(self, capacity_bytes: int):
        if capacity_bytes <= 0:
            raise ConfigError("accel.buffer_bytes must be > 0")
        self.capacity = capacity_bytes
        self.occupancy = 0
        self.peak = 0

    def acquire(self, nbytes: int):
        if self.occupancy + nbytes > self.capacity:
            raise ConfigError(
                f"local buffer overflow: {self.occupancy + nbytes} > {self.capacity} bytes"
            )
        self.occupancy += nbytes
        self.peak = max(self.peak, self.occupancy)

    def release(self, nbytes: int):
        self.occupancy -= nbytes
        assert self.occupancy >= 0, "buffer occupancy went negative"


@dataclass(frozen=True)
class BlockPlan:
    """Streaming schedule for one GEMM: A row-panel blocks stay resident
    while B column panels stream past them."""

    op: GemmOp
    block_rows: int          # A panels resident per block (bm)
    a_block_bytes: int       # one resident A block
    b_panel_bytes: int       # one streamed B panel
    row_blocks: int          # ceil(tiles_m / bm)

    @property
    def fetch_bytes(self) -> int:
        # A once, B refetched per row block.
        return self.op.a_bytes + self.row_blocks * self.op.b_bytes

    @property
    def writeback_bytes(self) -> int:
        return self.op.c_bytes

    @property
    def total_bytes(self) -> int:
        return self.fetch_bytes + self.writeback_bytes


# The controller's panel descriptor table tracks at most this many resident
# A panels, independent of buffer capacity.
MAX_RESIDENT_PANELS = 16


def plan_blocks(op: GemmOp, buffer_bytes: int) -> BlockPlan:
    """Choose the A-block height: bounded by the descriptor table, the tile
    rows of the operation, and half the buffer (the other half holds the
    double-buffered B panels and staged output tiles)."""
    panel_bytes = TILE * op.k * ELEM_BYTES
    bm = max(1, (buffer_bytes // 2) // panel_bytes)
    bm = min(bm, MAX_RESIDENT_PANELS, op.tiles_m)
    a_block = bm * panel_bytes
    b_panel = op.k * TILE * ELEM_BYTES
    if a_block + 2 * b_panel + bm * TILE * TILE * ELEM_BYTES > buffer_bytes:
        raise ConfigError(
            f"accel.buffer_bytes={buffer_bytes} cannot hold one {op.k}-deep tile panel"
        )
    return BlockPlan(op, bm, a_block, b_panel, math.ceil(op.tiles_m / bm))
