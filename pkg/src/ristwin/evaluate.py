"""Metrics and experiments: received power, RSRP gain, coverage maps,
scene perturbation, and the twin-gap comparison between a clean digital
scene and a perturbed stand-in for the physical deployment.

Gains are always measured against the all-zero (every element OFF) baseline
on the same snapshot. Zero-power endpoints produce +-inf sentinels in memory;
serializers write out-of-band markers instead of float infinities.
"""

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .scene import Antenna, Facet, RisPanel, Material, with_receiver
from .channel import channel_snapshot
from .ris import all_zero, apply_config
from .optimize import _abs2, iterative_search, dt_dpo, dt_cir


def received_power(snapshot, config):
    """|h_d + g^T diag(e^{j theta}) h|^2, linear scale."""
    return _abs2(apply_config(snapshot, config))


def rsrp_db(snapshot, config, tx_power_dbm):
    """Received power in dBm for the given transmit power; -inf if dead."""
    p = received_power(snapshot, config)
    if p <= 0.0:
        return float("-inf")
    return tx_power_dbm + 10.0 * math.log10(p)


def rsrp_gain_db(snapshot, config):
    """dB improvement of `config` over the all-zero baseline."""
    p = received_power(snapshot, config)
    p0 = received_power(snapshot, all_zero(snapshot.n))
    if p0 > 0.0 and p > 0.0:
        return 10.0 * math.log10(p / p0)
    if p0 > 0.0:
        return float("-inf")
    if p > 0.0:
        return float("inf")
    return float("nan")


def operation_count(method, n):
    """Physical-world cost model: configurations loaded and measured."""
    counts = {"benchmark": n, "iterative": n, "dt_dpo": 2, "dt_cir": 1,
              "exhaustive": 2 ** n}
    if method not in counts:
        raise ValueError(f"unknown method {method!r}")
    return counts[method]


# ---------------------------------------------------------------------------
# coverage maps

@dataclass(frozen=True, eq=False)
class GridSpec:
    origin: np.ndarray
    x_axis: np.ndarray
    y_axis: np.ndarray
    nx: int
    ny: int
    cell_size: float

    def __post_init__(self):
        for name in ("origin", "x_axis", "y_axis"):
            v = np.array(getattr(self, name), dtype=float)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.nx < 1 or self.ny < 1 or self.cell_size <= 0.0:
            raise ValueError("grid needs nx, ny >= 1 and cell_size > 0")

    def cell_center(self, ix, iy):
        return (self.origin
                + (ix + 0.5) * self.cell_size * self.x_axis
                + (iy + 0.5) * self.cell_size * self.y_axis)

    def x_coords(self):
        base = float(np.dot(self.origin, self.x_axis))
        return base + (np.arange(self.nx) + 0.5) * self.cell_size

    def y_coords(self):
        base = float(np.dot(self.origin, self.y_axis))
        return base + (np.arange(self.ny) + 0.5) * self.cell_size


@dataclass(frozen=True, eq=False)
class CoverageMap:
    grid: GridSpec
    rsrp_db: np.ndarray  # shape (ny, nx): one row per y line of the grid

    def __post_init__(self):
        a = np.array(self.rsrp_db, dtype=float)
        if a.shape != (self.grid.ny, self.grid.nx):
            raise ValueError(f"rsrp grid must be ({self.grid.ny}, {self.grid.nx})")
        a.setflags(write=False)
        object.__setattr__(self, "rsrp_db", a)

    def nearest_cell(self, point):
        """(ix, iy) of the cell whose center is closest to `point`."""
        rel = np.asarray(point, dtype=float) - self.grid.origin
        ix = int(np.clip(round(float(np.dot(rel, self.grid.x_axis)) / self.grid.cell_size - 0.5),
                         0, self.grid.nx - 1))
        iy = int(np.clip(round(float(np.dot(rel, self.grid.y_axis)) / self.grid.cell_size - 0.5),
                         0, self.grid.ny - 1))
        return ix, iy


def default_grid(scene, nx, ny, cell_size=None):
    """Horizontal plane at Rx height, cells of half a wavelength by default,
    laid out so the deployment Rx sits exactly at the center of cell
    (nx // 2, ny // 2)."""
    dep = scene.deployment
    if cell_size is None:
        cell_size = dep.wavelength / 2.0
    x_axis = np.array([1.0, 0.0, 0.0])
    y_axis = np.array([0.0, 1.0, 0.0])
    origin = (dep.rx.position
              - (nx // 2 + 0.5) * cell_size * x_axis
              - (ny // 2 + 0.5) * cell_size * y_axis)
    return GridSpec(origin, x_axis, y_axis, nx, ny, cell_size)


def _coverage_rows(scene, config, grid, max_bounces, iy_start, iy_stop):
    tx_pos = scene.deployment.tx.position
    tx_power = scene.deployment.tx_power_dbm
    out = np.empty((iy_stop - iy_start, grid.nx))
    for iy in range(iy_start, iy_stop):
        for ix in range(grid.nx):
            center = grid.cell_center(ix, iy)
            if np.array_equal(center, tx_pos):
                out[iy - iy_start, ix] = float("-inf")
                continue
            snap = channel_snapshot(with_receiver(scene, center), max_bounces)
            out[iy - iy_start, ix] = rsrp_db(snap, config, tx_power)
    return out


def coverage_map(scene, config, grid, max_bounces=2, threads=1):
    """RSRP map over virtual receivers at every cell center.

    Cells are independent pure functions of the scene, so the result is
    bit-identical for any `threads`; rows are assembled in index order.
    """
    if config.n != scene.deployment.ris.n_elements:
        raise ValueError(f"config has {config.n} elements, panel has "
                         f"{scene.deployment.ris.n_elements}")
    if threads <= 1 or grid.ny == 1:
        rows = _coverage_rows(scene, config, grid, max_bounces, 0, grid.ny)
        return CoverageMap(grid, rows)
    bounds = np.linspace(0, grid.ny, min(threads, grid.ny) + 1, dtype=int)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_coverage_rows, scene, config, grid, max_bounces,
                               int(b0), int(b1))
                   for b0, b1 in zip(bounds[:-1], bounds[1:]) if b1 > b0]
        rows = np.vstack([f.result() for f in futures])
    return CoverageMap(grid, rows)


def _format_db(v):
    return f"{v:.4f}" if math.isfinite(v) else "NA"


def coverage_to_csv(cov):
    """Header row of x coordinates, leading column of y coordinates, dB values
    to 4 decimal places; dead cells are the out-of-band marker NA."""
    grid = cov.grid
    lines = ["," + ",".join(f"{x:.6f}" for x in grid.x_coords())]
    for iy, y in enumerate(grid.y_coords()):
        lines.append(f"{y:.6f}," + ",".join(_format_db(v) for v in cov.rsrp_db[iy]))
    return "\n".join(lines) + "\n"


def coverage_to_ppm(cov, floor_db, ceil_db):
    """Binary P6 heatmap: linear blue-to-red ramp between floor and ceiling;
    dead cells render black."""
    if ceil_db <= floor_db:
        raise ValueError("ceil_db must exceed floor_db")
    vals = cov.rsrp_db
    finite = np.isfinite(vals)
    t = np.clip((np.where(finite, vals, floor_db) - floor_db) / (ceil_db - floor_db), 0.0, 1.0)
    r = np.rint(255.0 * t).astype(np.uint8)
    b = np.rint(255.0 * (1.0 - t)).astype(np.uint8)
    g = np.zeros_like(r)
    rgb = np.stack([r, g, b], axis=-1)
    rgb[~finite] = 0
    header = f"P6\n{cov.grid.nx} {cov.grid.ny}\n255\n".encode("ascii")
    return header + rgb.tobytes()


# ---------------------------------------------------------------------------
# perturbation: the stand-in for the physical twin

@dataclass(frozen=True)
class PerturbationSpec:
    """Rigid geometric jitter plus pattern/reflection offsets.

    geometry_jitter_sigma is the per-coordinate Gaussian sigma in meters;
    each facet is translated rigidly (never per vertex, so planarity and
    convexity survive) and each entity position gets its own offset.
    """

    geometry_jitter_sigma: float = 0.0
    pattern_exponent_delta: float = 0.0
    reflection_delta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.geometry_jitter_sigma < 0.0:
            raise ValueError("sigma must be >= 0")


def perturb_scene(scene, spec):
    """Deterministically jitter a scene; the output always validates.

    Draw order is fixed: one 3-vector per facet in order, then tx, rx, and
    the RIS center. Reflection coefficients are clamped to [0, 1] and the
    pattern exponent to >= 0, so no perturbation can invalidate the scene.
    """
    rng = np.random.default_rng(spec.seed)
    sigma = spec.geometry_jitter_sigma
    facets = tuple(
        Facet(f.vertices + rng.normal(0.0, sigma, 3)[None, :], f.material)
        for f in scene.facets)
    tx_off = rng.normal(0.0, sigma, 3)
    rx_off = rng.normal(0.0, sigma, 3)
    ris_off = rng.normal(0.0, sigma, 3)

    materials = {
        name: Material(name, float(np.clip(m.reflection_coefficient + spec.reflection_delta,
                                           0.0, 1.0)))
        for name, m in scene.materials.items()}
    dep = scene.deployment
    ris = dep.ris
    panel = RisPanel(
        center=ris.center + ris_off,
        normal=ris.normal,
        up=ris.up,
        rows=ris.rows,
        cols=ris.cols,
        element_spacing=ris.element_spacing,
        pattern_exponent=max(ris.pattern_exponent + spec.pattern_exponent_delta, 0.0),
    )
    deployment = replace(
        dep,
        tx=Antenna(dep.tx.position + tx_off, dep.tx.gain_dbi),
        rx=Antenna(dep.rx.position + rx_off, dep.rx.gain_dbi),
        ris=panel,
    )
    return replace(scene, facets=facets, materials=materials, deployment=deployment)


# ---------------------------------------------------------------------------
# twin-gap experiment

@dataclass(frozen=True)
class TwinGapRecord:
    rx_id: int
    rx_position: tuple
    gain_db_benchmark: float
    gain_db_dt_dpo: float
    gain_db_dt_cir: float
    ops_benchmark: int
    ops_dt_dpo: int
    ops_dt_cir: int


@dataclass(frozen=True)
class TwinGapReport:
    records: tuple


def _best_applied(candidates, snapshot):
    """Config from the set with the highest power on `snapshot`; first wins ties."""
    best = candidates.configs[0]
    best_p = received_power(snapshot, best)
    for c in candidates.configs[1:]:
        p = received_power(snapshot, c)
        if p > best_p:
            best, best_p = c, p
    return best


def twin_gap_experiment(dt_scene, phys_scene, rx_list, max_passes=10, max_bounces=2):
    """Optimize in the digital scene, evaluate on the physical scene.

    Per receiver: the benchmark runs the iterative search directly on the
    physical snapshot (cost model: N operations); DT-DPO and DT-CIR build
    their candidate sets from the digital snapshot and spend one physical
    operation per candidate (2 and 1). All gains are against the physical
    all-zero baseline.
    """
    n_dt = dt_scene.deployment.ris.n_elements
    n_phys = phys_scene.deployment.ris.n_elements
    if n_dt != n_phys:
        raise ValueError(f"scenes disagree on N: {n_dt} vs {n_phys}")
    if not rx_list:
        raise ValueError("rx_list must be non-empty")

    records = []
    for rx_id, pos in enumerate(rx_list):
        dt_snap = channel_snapshot(with_receiver(dt_scene, pos), max_bounces)
        phys_snap = channel_snapshot(with_receiver(phys_scene, pos), max_bounces)

        bench = iterative_search(phys_snap, all_zero(n_phys), max_passes)
        dpo_set = dt_dpo(dt_snap, max_passes)
        cir_set = dt_cir(dt_snap)

        records.append(TwinGapRecord(
            rx_id=rx_id,
            rx_position=tuple(float(x) for x in np.asarray(pos, dtype=float)),
            gain_db_benchmark=rsrp_gain_db(phys_snap, bench.best_config),
            gain_db_dt_dpo=rsrp_gain_db(phys_snap, _best_applied(dpo_set, phys_snap)),
            gain_db_dt_cir=rsrp_gain_db(phys_snap, _best_applied(cir_set, phys_snap)),
            ops_benchmark=operation_count("benchmark", n_phys),
            ops_dt_dpo=operation_count("dt_dpo", n_phys),
            ops_dt_cir=operation_count("dt_cir", n_phys),
        ))
    return TwinGapReport(tuple(records))


def _encode_gain(v):
    if math.isnan(v):
        return "NA"
    if v == float("inf"):
        return "+inf"
    if v == float("-inf"):
        return "-inf"
    return v


def twin_gap_to_json(report):
    doc = {"records": [{
        "rx_id": r.rx_id,
        "rx_position": list(r.rx_position),
        "gain_db_benchmark": _encode_gain(r.gain_db_benchmark),
        "gain_db_dt_dpo": _encode_gain(r.gain_db_dt_dpo),
        "gain_db_dt_cir": _encode_gain(r.gain_db_dt_cir),
        "ops_benchmark": r.ops_benchmark,
        "ops_dt_dpo": r.ops_dt_dpo,
        "ops_dt_cir": r.ops_dt_cir,
    } for r in report.records]}
    return json.dumps(doc, indent=2) + "\n"


def twin_gap_to_csv(report):
    """Long format, one row per (receiver, method): rx_id, method, gain_db, ops."""
    lines = ["rx_id,method,gain_db,ops"]
    for r in report.records:
        for method, gain, ops in (
                ("benchmark", r.gain_db_benchmark, r.ops_benchmark),
                ("dt_dpo", r.gain_db_dt_dpo, r.ops_dt_dpo),
                ("dt_cir", r.gain_db_dt_cir, r.ops_dt_cir)):
            g = _encode_gain(gain)
            g = g if isinstance(g, str) else f"{g:.4f}"
            lines.append(f"{r.rx_id},{method},{g},{ops}")
    return "\n".join(lines) + "\n"
