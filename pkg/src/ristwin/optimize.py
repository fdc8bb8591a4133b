"""Phase-selection algorithms over a channel snapshot.

Methods and their search-space sizes:
  analytic_phases    continuous coherent alignment (the power upper bound)
  dt_cir             analytic phases quantized to 1 bit, candidate set of 1
  iterative_search   greedy per-element bit-flip sweeps (coordinate descent)
  dt_dpo             iterative optimum plus its binary inverse, set of 2
  exhaustive_search  all 2^N one-bit configs (guarded to N <= 20)
  random_search      seeded uniform baseline

Every power evaluation goes through the same index-ordered composite sum, so
reported powers are directly comparable across methods.
"""

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np

from .ris import (PI, CONTINUOUS, ONE_BIT, PhaseConfig, CandidateSet,
                  all_zero, from_bits, invert, quantize_phases,
                  composite_coefficient)

EXHAUSTIVE_MAX_N = 20

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class SearchReport:
    method: str
    best_config: PhaseConfig
    best_power: float
    evaluations: int
    passes: int | None = None
    trace: tuple | None = None  # (evaluation index, best power) at improvements


def _abs2(z):
    return z.real * z.real + z.imag * z.imag


def _power(snapshot, phases):
    return _abs2(composite_coefficient(snapshot.h_d, snapshot.h, snapshot.g, phases))


def _wrap(x):
    w = math.fmod(x, TWO_PI)
    if w < 0.0:
        w += TWO_PI
    if w >= TWO_PI:
        w = 0.0
    return w


def analytic_phases(snapshot):
    """Continuous phases aligning every cascaded term with the direct path.

    theta_i = arg(h_d) - arg(h_i) - arg(g_i) (mod 2*pi). A zero direct
    coefficient contributes reference phase 0, and elements whose cascaded
    coefficient vanishes get phase 0; both choices leave the power unchanged.
    """
    alpha_d = cmath.phase(snapshot.h_d) if snapshot.h_d != 0 else 0.0
    phases = np.empty(snapshot.n)
    for i in range(snapshot.n):
        hi = complex(snapshot.h[i])
        gi = complex(snapshot.g[i])
        if hi * gi == 0:
            phases[i] = 0.0
        else:
            phases[i] = _wrap(alpha_d - cmath.phase(hi) - cmath.phase(gi))
    return PhaseConfig(phases, CONTINUOUS)


def dt_cir(snapshot):
    """Channel-extraction route: analytic phases, 1-bit quantized, one candidate."""
    config = quantize_phases(analytic_phases(snapshot))
    return CandidateSet((config,), "dt_cir",
                        source_note="analytic phase alignment quantized to 1 bit")


def iterative_search(snapshot, init, max_passes=10):
    """Greedy coordinate descent over element bit flips.

    Sweeps elements in index order; a flip is kept only on strict power
    improvement. Stops when a full sweep keeps no flip or after max_passes
    sweeps, so a convergence stop is a verified 1-flip local optimum.
    """
    if init.quantization != ONE_BIT:
        raise ValueError("iterative_search requires a one_bit init")
    if init.n != snapshot.n:
        raise ValueError(f"init has {init.n} elements, snapshot has {snapshot.n}")
    if max_passes < 1:
        raise ValueError("max_passes must be >= 1")

    phases = np.array(init.phases)
    power = _power(snapshot, phases)
    evaluations = 1
    trace = [(1, power)]
    passes = 0
    while passes < max_passes:
        passes += 1
        improved = False
        for i in range(snapshot.n):
            phases[i] = PI - phases[i]
            trial = _power(snapshot, phases)
            evaluations += 1
            if trial > power:
                power = trial
                improved = True
                trace.append((evaluations, power))
            else:
                phases[i] = PI - phases[i]
        if not improved:
            break
    return SearchReport("iterative", PhaseConfig(phases, ONE_BIT), power,
                        evaluations, passes=passes, trace=tuple(trace))


def dt_dpo(snapshot, max_passes=10):
    """Direct-optimization route: iterative optimum and its binary inverse."""
    best = iterative_search(snapshot, all_zero(snapshot.n), max_passes).best_config
    return CandidateSet((best, invert(best)), "dt_dpo",
                        source_note=f"iterative search from all-zero, max_passes={max_passes}")


def exhaustive_search(snapshot, record_trace=False):
    """Global optimum over all 2^N one-bit configs.

    Refuses N > 20: the space doubles per element and 2^N evaluations are
    exactly the cost this package exists to avoid. Configs are scanned in
    ascending row-major binary value, so ties keep the smallest bit vector.
    Partial sums are shared along a prefix tree; every leaf still sees the
    exact index-ordered sum.
    """
    n = snapshot.n
    if n > EXHAUSTIVE_MAX_N:
        raise ValueError(
            f"exhaustive search over N={n} elements needs 2^{n} evaluations; "
            f"refusing N > {EXHAUSTIVE_MAX_N}")
    # complex(gi) * complex(hi) is bitwise what the composite sum computes for
    # factor +1, and IEEE negation makes s - c exactly the factor -1 term
    c = [complex(gi) * complex(hi) for hi, gi in zip(snapshot.h, snapshot.g)]
    h_d = complex(snapshot.h_d)

    best_power = -1.0
    best_value = 0
    count = 0
    trace = []
    stack = [(0, 0j, 0)]
    while stack:
        depth, s, value = stack.pop()
        if depth == n:
            count += 1
            p = _abs2(s + h_d)
            if p > best_power:
                best_power = p
                best_value = value
                if record_trace:
                    trace.append((count, p))
            continue
        # push the set-bit branch first so the clear-bit branch pops first
        stack.append((depth + 1, s - c[depth], (value << 1) | 1))
        stack.append((depth + 1, s + c[depth], value << 1))

    bits = [(best_value >> (n - 1 - i)) & 1 for i in range(n)]
    return SearchReport("exhaustive", from_bits(bits), best_power, count,
                        trace=tuple(trace) if record_trace else None)


def random_search(snapshot, trials, seed):
    """Baseline: best of `trials` uniform one-bit configs from a seeded RNG."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, 2, size=(trials, snapshot.n))
    c = [complex(gi) * complex(hi) for hi, gi in zip(snapshot.h, snapshot.g)]
    h_d = complex(snapshot.h_d)

    best_power = -1.0
    best_bits = draws[0]
    trace = []
    for t in range(trials):
        s = 0j
        row = draws[t]
        for i in range(snapshot.n):
            s = s - c[i] if row[i] else s + c[i]
        p = _abs2(s + h_d)
        if p > best_power:
            best_power = p
            best_bits = row
            trace.append((t + 1, p))
    return SearchReport("random", from_bits(best_bits), best_power, trials,
                        trace=tuple(trace))


def report_to_json(report):
    doc = {
        "method": report.method,
        "n": int(report.best_config.n),
        "best_bits": [int(b) for b in report.best_config.bits],
        "best_power_linear": report.best_power,
        "best_power_db": (10.0 * math.log10(report.best_power)
                          if report.best_power > 0 else "-inf"),
        "evaluations": int(report.evaluations),
    }
    if report.passes is not None:
        doc["passes"] = int(report.passes)
    if report.trace is not None:
        doc["trace"] = [[int(i), float(p)] for i, p in report.trace]
    return json.dumps(doc, indent=2) + "\n"


def candidates_to_json(cs):
    doc = {
        "method_label": cs.method_label,
        "source_note": cs.source_note,
        "n": int(cs.configs[0].n),
        "configs": [{"bits": [int(b) for b in c.bits]} if c.quantization == ONE_BIT
                    else {"phases": [float(p) for p in c.phases]}
                    for c in cs.configs],
    }
    return json.dumps(doc, indent=2) + "\n"
