"""Calibration constants and the tuner that maintains them.

The model has a handful of free constants the underlying studies never pin
down (packet header size, endpoint turnaround, in-flight window, DMA burst
size, array speed, non-GEMM cost scale, NUMA penalty). The shipped values
below were produced by `axsim calibrate` against the target set in
`analysis` and are applied on top of the raw defaults by every canned
recipe and by the acceptance suite.
"""

from __future__ import annotations

import importlib.resources as resources

from .errors import ConfigError

CALIBRATED_FILE = "calibrated.cfg"


def calibrated_defaults() -> dict:
    """Parse the shipped constants file into an override mapping."""
    text = resources.files("axsim.data").joinpath(CALIBRATED_FILE).read_text()
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{CALIBRATED_FILE}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def format_constants(constants: dict) -> str:
    lines = ["# calibrated model constants (written by `axsim calibrate`)"]
    lines += [f"{k}={constants[k]}" for k in sorted(constants)]
    return "\n".join(lines) + "\n"
