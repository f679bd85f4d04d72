"""Workload graphs: standalone GEMMs and ViT inference decomposed into GEMM
and Non-GEMM operations.

Non-GEMM operations run on the host CPU with a per-element cost; when their
tensors live in device memory every access crosses the interconnect, which is
charged as a per-byte NUMA penalty on top of the local cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .accel import ELEM_BYTES, GemmOp
from .errors import ConfigError

# (cost ns/element, data passes) per kind. Costs are calibration constants,
# scaled globally by nongemm.cost_scale.
NONGEMM_KINDS = {
    "softmax": (4.0, 3),
    "layernorm": (3.0, 3),
    "gelu": (2.0, 2),
    "residual_add": (1.0, 3),
}


@dataclass(frozen=True)
class NonGemmOp:
    kind: str
    element_count: int

    def __post_init__(self):
        if self.kind not in NONGEMM_KINDS:
            raise ConfigError(f"unknown non-GEMM kind '{self.kind}'")
        if self.element_count <= 0:
            raise ConfigError("non-GEMM op needs a positive element count")

    @property
    def bytes_touched(self) -> int:
        return self.element_count * ELEM_BYTES * NONGEMM_KINDS[self.kind][1]


@dataclass(frozen=True)
class VitSpec:
    name: str
    layers: int
    hidden: int
    heads: int
    seq_len: int = 197  # 224x224 image, 16x16 patches, plus class token

    def __post_init__(self):
        if self.hidden % self.heads:
            raise ConfigError(
                f"hidden ({self.hidden}) must divide evenly over heads ({self.heads})"
            )

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads


VIT_PRESETS = {
    "base": VitSpec("base", 12, 768, 12),
    "large": VitSpec("large", 24, 1024, 16),
    "huge": VitSpec("huge", 32, 1280, 16),
}


@dataclass
class WorkloadGraph:
    name: str
    ops: list = field(default_factory=list)

    def add(self, op):
        self.ops.append(op)

    @property
    def gemm_ops(self) -> list[GemmOp]:
        return [op for op in self.ops if isinstance(op, GemmOp)]

    @property
    def nongemm_ops(self) -> list[NonGemmOp]:
        return [op for op in self.ops if isinstance(op, NonGemmOp)]

    def gemm_flops(self) -> int:
        return sum(op.flops for op in self.gemm_ops)

    def operand_bytes(self) -> int:
        return sum(op.a_bytes + op.b_bytes + op.c_bytes for op in self.gemm_ops)

    def footprint_pages(self) -> int:
        touched = self.operand_bytes() + sum(op.bytes_touched for op in self.nongemm_ops)
        return math.ceil(touched / 4096)


def build_gemm(n: int) -> WorkloadGraph:
    if n < 1:
        raise ConfigError("workload.n must be >= 1")
    g = WorkloadGraph(f"gemm-{n}")
    g.add(GemmOp(n, n, n))
    return g


def vit_spec(name: str, seq_len: int = 197, heads: int = 0) -> VitSpec:
    try:
        base = VIT_PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown ViT model '{name}' (have {sorted(VIT_PRESETS)})") from None
    return VitSpec(base.name, base.layers, base.hidden,
                   heads or base.heads, seq_len)


def build_vit(spec: VitSpec) -> WorkloadGraph:
    """Per-layer op sequence of a ViT encoder at batch 1.

    layernorm -> QKV projection -> per-head attention scores -> softmax ->
    per-head attention*V -> output projection -> residual -> layernorm ->
    MLP up -> GELU -> MLP down -> residual.
    """
    s, d, h, dh = spec.seq_len, spec.hidden, spec.heads, spec.head_dim
    g = WorkloadGraph(f"vit-{spec.name}")
    for _ in range(spec.layers):
        g.add(NonGemmOp("layernorm", s * d))
        g.add(GemmOp(s, 3 * d, d))                       # QKV projection
        for _ in range(h):
            g.add(GemmOp(s, s, dh))                      # scores = Q . K^T
        g.add(NonGemmOp("softmax", h * s * s))
        for _ in range(h):
            g.add(GemmOp(s, dh, s))                      # scores . V
        g.add(GemmOp(s, d, d))                           # output projection
        g.add(NonGemmOp("residual_add", s * d))
        g.add(NonGemmOp("layernorm", s * d))
        g.add(GemmOp(s, 4 * d, d))                       # MLP up
        g.add(NonGemmOp("gelu", s * 4 * d))
        g.add(GemmOp(s, d, 4 * d))                       # MLP down
        g.add(NonGemmOp("residual_add", s * d))
    return g


@dataclass(frozen=True)
class NonGemmParams:
    cost_scale: float = 1.0
    numa_bandwidth_gbps: float = 8.0
    numa_latency_ns: float = 0.0  # per 64-byte access when device-resident


def nongemm_time(op: NonGemmOp, residency: str, params: NonGemmParams) -> float:
    """Host CPU execution time in ns; device residency adds interconnect cost."""
    cost, _ = NONGEMM_KINDS[op.kind]
    t = op.element_count * cost * params.cost_scale
    if residency == "device":
        t += op.bytes_touched / params.numa_bandwidth_gbps
        t += (op.bytes_touched / 64) * params.numa_latency_ns
    return t
