"""Address translation on the accelerator path: micro-TLB, page-table walker,
and the translation statistics counters.

Cycle counts equal nanoseconds (1 GHz clock). Page-table entries live in host
memory; a walk issues one dependent 64-byte read per level. PTE lines are
cached after first touch, so the first walk that touches a PTE line is a
"cold" walk and its seven line-neighbours walk "warm".
"""

from __future__ import annotations

import bisect
import math
from collections import OrderedDict
from dataclasses import dataclass, field

from .errors import ConfigError, SimFault

PAGE_BYTES = 4096
PTE_BYTES = 8
PTES_PER_LINE = 8


def footprint_pages(matrix_n: int) -> int:
    """Pages needed by the three n x n operand matrices of 4-byte elements."""
    if matrix_n < 1:
        raise ConfigError("matrix dimension must be >= 1")
    return math.ceil(3 * matrix_n * matrix_n * 4 / PAGE_BYTES)


class TranslationFault(SimFault):
    pass


@dataclass
class TranslationStats:
    footprint_pages: int = 0
    translation_count: int = 0
    translation_cycles: int = 0
    ptw_count: int = 0
    ptw_cycles: int = 0
    utlb_lookups: int = 0
    utlb_misses: int = 0
    stall_cycles: int = 0

    @property
    def translation_mean_cycles(self) -> float:
        return self.translation_cycles / self.translation_count if self.translation_count else 0.0

    @property
    def ptw_mean_cycles(self) -> float:
        return self.ptw_cycles / self.ptw_count if self.ptw_count else 0.0

    def overhead_percent(self, total_execution_ns: int) -> float:
        if total_execution_ns <= 0:
            return 0.0
        return 100.0 * self.stall_cycles / total_execution_ns

    def validate(self):
        if self.utlb_misses > self.utlb_lookups:
            raise SimFault("uTLB misses exceed lookups")
        if self.ptw_count > self.utlb_misses:
            raise SimFault("more walks than misses (coalescing can only reduce)")


@dataclass
class PageTable:
    levels: int = 3
    page_size: int = PAGE_BYTES
    mappings: dict[int, int] = field(default_factory=dict)  # single-page entries
    _ranges: list[tuple[int, int, int]] = field(default_factory=list)

    def map_page(self, vpage: int, ppage: int):
        self.mappings[vpage] = ppage

    def map_region(self, base_va: int, size: int, base_pa: int):
        """Map a contiguous region; stored as a range, not per-page entries."""
        if base_va % self.page_size or base_pa % self.page_size:
            raise ConfigError("regions must be page aligned")
        first = base_va // self.page_size
        npages = math.ceil(size / self.page_size)
        self._ranges.append((first, first + npages, base_pa // self.page_size))
        self._ranges.sort()

    @property
    def mapped_pages(self) -> int:
        return len(self.mappings) + sum(end - start for start, end, _ in self._ranges)

    def lookup(self, vpage: int) -> int:
        hit = self.mappings.get(vpage)
        if hit is not None:
            return hit
        idx = bisect.bisect_right(self._ranges, (vpage, float("inf"), 0)) - 1
        if idx >= 0:
            start, end, pa = self._ranges[idx]
            if start <= vpage < end:
                return pa + (vpage - start)
        raise TranslationFault(
            f"unmapped virtual page {vpage:#x} ({self.mapped_pages} pages mapped)"
        )


class Smmu:
    """uTLB + table walker. translate() returns (paddr, stall_ns).

    A uTLB miss first probes a bounded page-granular walk cache (the SMMU's
    secondary TLB); only a miss there performs the full multi-level walk.
    Walk reads pay the memory-path latency the first time their PTE line is
    touched and a cached-line latency afterwards. Footprints whose revisit
    distance exceeds the walk cache therefore walk at full cost every sweep,
    which is what makes very large matrices expensive to translate.
    """

    def __init__(self, table: PageTable, utlb_entries: int = 32,
                 hit_ns: int = 1, walk_read_cold_ns: float = 44.0,
                 walk_read_warm_ns: float = 8.0, walk_cache_entries: int = 2048,
                 walk_cache_hit_ns: float = 4.0):
        if utlb_entries < 1:
            raise ConfigError("smmu.utlb_entries must be >= 1")
        self.table = table
        self.utlb_entries = utlb_entries
        self.hit_ns = hit_ns
        self.walk_read_cold_ns = walk_read_cold_ns
        self.walk_read_warm_ns = walk_read_warm_ns
        self.walk_cache_entries = walk_cache_entries
        self.walk_cache_hit_ns = walk_cache_hit_ns
        self._utlb: OrderedDict[int, int] = OrderedDict()
        self._walk_cache: OrderedDict[int, None] = OrderedDict()
        self._touched_pte_lines: set[tuple[int, int]] = set()
        self.stats = TranslationStats()

    def _walk(self, vpage: int) -> float:
        """Dependent reads, one per level; the first touch of a PTE line pays
        the full memory path, later touches the cached-line latency."""
        stall = 0.0
        for level in range(self.table.levels):
            shift = 9 * (self.table.levels - 1 - level)
            key = (level, (vpage >> shift) // PTES_PER_LINE)
            if key in self._touched_pte_lines:
                stall += self.walk_read_warm_ns
            else:
                self._touched_pte_lines.add(key)
                stall += self.walk_read_cold_ns
        self.stats.ptw_count += 1
        self.stats.ptw_cycles += int(stall)
        return stall

    def translate(self, vaddr: int, count: int = 1) -> tuple[int, int]:
        """Translate `count` back-to-back requests landing on vaddr's page.

        Consecutive same-page requests are coalesced by the request
        interface: they count as translations but only the first probes the
        uTLB. Hits are pipelined and do not stall the stream.
        """
        vpage, offset = divmod(vaddr, self.table.page_size)
        self.stats.translation_count += count
        self.stats.utlb_lookups += 1
        if vpage in self._utlb:
            self._utlb.move_to_end(vpage)
            ppage = self._utlb[vpage]
            stall = self.hit_ns
            self.stats.translation_cycles += count * self.hit_ns
            self.stats.stall_cycles += self.hit_ns
        else:
            self.stats.utlb_misses += 1
            if vpage in self._walk_cache:
                self._walk_cache.move_to_end(vpage)
                stall = self.walk_cache_hit_ns
                ppage = self.table.lookup(vpage)
            else:
                ppage = self.table.lookup(vpage)
                stall = self._walk(vpage)
                self._walk_cache[vpage] = None
                if len(self._walk_cache) > self.walk_cache_entries:
                    self._walk_cache.popitem(last=False)
            self._utlb[vpage] = ppage
            if len(self._utlb) > self.utlb_entries:
                self._utlb.popitem(last=False)
            self.stats.translation_cycles += int(math.ceil(stall)) + (count - 1) * self.hit_ns
            self.stats.stall_cycles += int(math.ceil(stall))
        return ppage * self.table.page_size + offset, int(math.ceil(stall))

    def snapshot(self, footprint: int, total_execution_ns: int) -> dict[str, float]:
        """The eight reporting metrics, keyed by their table row names."""
        s = self.stats
        s.validate()
        return {
            "Memory Footprint (Pages)": float(footprint),
            "Translation Times": float(s.translation_count),
            "Trans Mean Time": s.translation_mean_cycles,
            "PTW Times": float(s.ptw_count),
            "PTW Mean Time": s.ptw_mean_cycles,
            "uTLB Lookup times": float(s.utlb_lookups),
            "uTLB Misses times": float(s.utlb_misses),
            "Trans Overhead": s.overhead_percent(total_execution_ns),
        }
