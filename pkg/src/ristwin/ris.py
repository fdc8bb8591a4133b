"""Phase-shift configuration algebra for a 1-bit RIS.

Phases live in [0, 2*pi); a one-bit config restricts every entry to exactly
{0, pi}, so its element factors e^{j*theta} are the exact reals +1/-1. The
composite channel is h_d + sum_i g_i e^{j*theta_i} h_i, summed strictly in
element-index order so results are bit-reproducible.
"""

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np

CONTINUOUS = "continuous"
ONE_BIT = "one_bit"

TWO_PI = 2.0 * math.pi
PI = math.pi


@dataclass(frozen=True, eq=False)
class PhaseConfig:
    """Per-element phase shifts plus their quantization class."""

    phases: np.ndarray
    quantization: str

    def __post_init__(self):
        p = np.array(self.phases, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("phases must be a non-empty 1-D vector")
        if np.any(p < 0.0) or np.any(p >= TWO_PI):
            raise ValueError("phases must lie in [0, 2*pi)")
        if self.quantization == ONE_BIT:
            if not np.all((p == 0.0) | (p == PI)):
                raise ValueError("one_bit phases must be exactly 0 or pi")
        elif self.quantization != CONTINUOUS:
            raise ValueError(f"unknown quantization {self.quantization!r}")
        p.setflags(write=False)
        object.__setattr__(self, "phases", p)

    @property
    def n(self):
        return self.phases.size

    @property
    def bits(self):
        """ON/OFF view: bit 0 = phase 0 (OFF), bit 1 = phase pi (ON)."""
        if self.quantization != ONE_BIT:
            raise ValueError("bit view requires a one_bit config")
        return (self.phases == PI).astype(int)


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Reduced search space produced by a twin-side method."""

    configs: tuple
    method_label: str
    source_note: str = ""

    def __post_init__(self):
        configs = tuple(self.configs)
        if not configs:
            raise ValueError("candidate set must be non-empty")
        n = configs[0].n
        if any(c.n != n for c in configs):
            raise ValueError("all candidate configs must share N")
        if self.method_label not in ("dt_dpo", "dt_cir", "manual"):
            raise ValueError(f"unknown method label {self.method_label!r}")
        object.__setattr__(self, "configs", configs)


def all_zero(n):
    """All elements OFF (phase 0) - the measurement baseline."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return PhaseConfig(np.zeros(n), ONE_BIT)


def from_bits(bits):
    bits = np.asarray(bits, dtype=int)
    return PhaseConfig(np.where(bits == 1, PI, 0.0), ONE_BIT)


def quantize_phases(config):
    """Nearest-level 1-bit quantization by chord distance on the unit circle.

    An element maps to 0 iff its phase lies in [0, pi/2] or [3*pi/2, 2*pi);
    the chord-distance ties at pi/2 and 3*pi/2 resolve to 0.
    """
    if config.quantization != CONTINUOUS:
        raise ValueError("quantize_phases expects a continuous config")
    p = config.phases
    quantized = np.where((p <= PI / 2.0) | (p >= 3.0 * PI / 2.0), 0.0, PI)
    return PhaseConfig(quantized, ONE_BIT)


def invert(config):
    """Binary inverse: swap 0 <-> pi on every element."""
    if config.quantization != ONE_BIT:
        raise ValueError("invert expects a one_bit config")
    return PhaseConfig(PI - config.phases, ONE_BIT)


def _element_factor(theta):
    # exact +-1 for the quantized levels keeps inversion symmetry bitwise
    if theta == 0.0:
        return 1.0
    if theta == PI:
        return -1.0
    return cmath.exp(1j * theta)


def composite_coefficient(h_d, h, g, phases):
    """h_d + sum_i g_i e^{j theta_i} h_i, summed in index order, then + h_d."""
    s = 0j
    for hi, gi, theta in zip(h, g, phases):
        s += gi * _element_factor(theta) * hi
    return s + h_d


def apply_config(snapshot, config):
    """Composite channel coefficient of the snapshot under a phase config."""
    if config.n != snapshot.n:
        raise ValueError(f"config has {config.n} elements, snapshot has {snapshot.n}")
    return composite_coefficient(snapshot.h_d, snapshot.h, snapshot.g, config.phases)


def bit_grid(config, rows, cols, invert_polarity=False):
    """Row-major ASCII '0'/'1' grid of the panel, one text line per row."""
    bits = config.bits
    if rows * cols != config.n:
        raise ValueError(f"{rows}x{cols} grid cannot hold {config.n} elements")
    if invert_polarity:
        bits = 1 - bits
    lines = ["".join(str(b) for b in bits[r * cols:(r + 1) * cols]) for r in range(rows)]
    return "\n".join(lines) + "\n"


def config_to_json(config, invert_polarity=False):
    doc = {"n": int(config.n), "quantization": config.quantization}
    if config.quantization == ONE_BIT:
        bits = config.bits
        if invert_polarity:
            bits = 1 - bits
        doc["bits"] = [int(b) for b in bits]
    doc["phases"] = [float(p) for p in config.phases]
    return json.dumps(doc, indent=2) + "\n"


def config_from_json(text):
    doc = json.loads(text)
    quant = doc["quantization"]
    if "phases" in doc:
        return PhaseConfig(np.array(doc["phases"], dtype=float), quant)
    if quant == ONE_BIT and "bits" in doc:
        return from_bits(doc["bits"])
    raise ValueError("config document needs 'phases' (or 'bits' for one_bit)")
