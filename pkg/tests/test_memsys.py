import pytest

from axsim.errors import ConfigError
from axsim.memsys import (AccessMode, Cache, CacheSpec, MemoryDevice,
                          MemoryPath, PRESETS, preset)

# memory configuration table: channel count, data width, GB/s, MT/s
EXPECTED_PRESETS = {
    "ddr3": (1, 64, 12.8, 1600),
    "ddr4": (1, 64, 19.2, 2400),
    "ddr5": (2, 32, 25.6, 3200),
    "hbm2": (2, 128, 64.0, 2000),
    "gddr6": (2, 64, 32.0, 2000),
}


def test_presets_match_reference_table_exactly():
    assert set(PRESETS) == set(EXPECTED_PRESETS)
    for name, (ch, width, bw, mts) in EXPECTED_PRESETS.items():
        spec = PRESETS[name]
        assert (spec.channels, spec.data_width_bits,
                spec.bandwidth_gbps, spec.data_rate_mts) == (ch, width, bw, mts)


def test_unknown_preset_named_in_error():
    with pytest.raises(ConfigError, match="ddr9"):
        preset("ddr9")


def test_preset_overrides():
    spec = preset("hbm2", "device", bandwidth_gbps=50.0, latency_ns=7)
    assert spec.bandwidth_gbps == 50.0
    assert spec.fixed_latency_ns == 7
    assert spec.placement == "device"


def test_single_read_service_time_ddr4():
    # 64 B on the DDR4 preset: fixed latency + 64/19.2 ns
    dev = MemoryDevice(preset("ddr4"))
    done = dev.service(address=0, size=64, arrival=0.0)
    assert done == pytest.approx(14 + 64 / 19.2, abs=1e-9)


def test_same_channel_requests_serialize():
    dev = MemoryDevice(preset("ddr4"))  # one channel
    first = dev.service(0, 64, 0.0)
    second = dev.service(64, 64, 0.0)
    assert second == pytest.approx(first + 64 / 19.2, abs=1e-9)


def test_distinct_channels_overlap():
    dev = MemoryDevice(preset("ddr5"))  # two channels, line interleaved
    t0 = dev.service(0, 64, 0.0)    # line 0 -> channel 0
    t1 = dev.service(64, 64, 0.0)   # line 1 -> channel 1
    assert t0 == pytest.approx(t1)


def test_zero_byte_request_rejected():
    with pytest.raises(ConfigError):
        MemoryDevice(preset("ddr3")).service(0, 0, 0.0)


def test_channel_conservation():
    # aggregate delivered rate never exceeds the spec bandwidth
    spec = preset("hbm2")
    dev = MemoryDevice(spec)
    total = 1 << 20
    done = 0.0
    for addr in range(0, total, 4096):
        done = max(done, dev.service(addr, 4096, 0.0))
    assert total / done <= spec.bandwidth_gbps * (1 + 1e-9) + 1e-9


def test_cache_read_after_write_hits():
    cache = Cache(CacheSpec())
    assert cache.lookup(0x1000) is False      # write allocates
    assert cache.lookup(0x1000) is True       # read after write hits
    assert cache.contains(0x1000)


def test_cache_lru_eviction():
    spec = CacheSpec(capacity_bytes=4 * 64, line_bytes=64, associativity=4)
    cache = Cache(spec)  # one set, four ways
    for i in range(4):
        cache.lookup(i * 64)
    cache.lookup(0)             # refresh line 0
    cache.lookup(4 * 64)        # evicts line 1 (least recent)
    assert cache.contains(0)
    assert not cache.contains(64)


def test_cache_geometry_validated():
    with pytest.raises(ConfigError):
        CacheSpec(capacity_bytes=1000, line_bytes=64, associativity=16)


def host_path(mode):
    return MemoryPath(mode, MemoryDevice(preset("ddr4")), None,
                      Cache(CacheSpec()))


def test_dc_hit_returns_at_hit_latency():
    path = host_path(AccessMode.DC)
    path.access(0, 64, 0.0)                      # miss fills the line
    t = path.access(0, 64, 1000.0)
    assert t == 1000.0 + path.llc.spec.hit_latency_ns


def test_dc_miss_pays_membus_dram_and_snoop():
    path = host_path(AccessMode.DC)
    t = path.access(0, 64, 0.0)
    hit = path.llc.spec.hit_latency_ns
    expected = hit + 10 + 14 + 64 / 19.2 + 20
    assert t == pytest.approx(expected, abs=1e-9)


def test_dm_skips_the_cache():
    path = MemoryPath(AccessMode.DM, MemoryDevice(preset("ddr4")), None, None)
    t = path.access(0, 64, 0.0)
    assert t == pytest.approx(10 + 14 + 64 / 19.2, abs=1e-9)


def test_dm_never_allocates_cache_lines():
    path = MemoryPath(AccessMode.DM, MemoryDevice(preset("ddr4")), None,
                      Cache(CacheSpec()))
    for addr in range(0, 1024, 64):
        path.access(addr, 64, 0.0, write=True)
        path.access(addr, 64, 0.0)
    assert path.llc.hits == path.llc.misses == 0
    assert not path.llc.contains(0)


def test_devmem_requires_device_memory():
    with pytest.raises(ConfigError, match="device"):
        MemoryPath(AccessMode.DEVMEM, MemoryDevice(preset("ddr4")), None, None)


def test_devmem_bypasses_interconnect_layers():
    path = MemoryPath(AccessMode.DEVMEM, None, MemoryDevice(preset("hbm2")), None)
    # a single line engages one of the two channels; no MemBus, no snoop
    t = path.access(0, 64, 0.0)
    assert t == pytest.approx(12 + 64 / 32.0, abs=1e-9)
