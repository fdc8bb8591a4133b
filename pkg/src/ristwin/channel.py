"""Deterministic narrowband ray-traced channel solver.

Specular paths are found with the image-source method: mirror the source
across each ordered facet sequence, intersect the straight image-destination
line with the facets back to front, and keep geometrically valid, unoccluded
polylines. Each path contributes a single complex coefficient at the carrier:

    amplitude = gain * Gamma_product * wavelength / (4 pi length)
    phase     = -2 pi length / wavelength   (propagation is a phase lag)

RIS element links are line-of-sight only, weighted by a cos^q element pattern
about the panel normal on each segment.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .scene import C0, ris_element_positions, facet_frame

# open-segment crossing: endpoints touching a facet never count as occlusion
SEG_T_TOL = 1e-9
# occluding hits must be strictly interior; reflection points may sit on edges
OCCLUDE_EDGE_MARGIN = 1e-9
CONTAIN_EDGE_MARGIN = -1e-9
DEDUP_TOL = 1e-9

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class PropagationPath:
    """One specular path: waypoints from source to destination, shape (k+2, 3)."""

    waypoints: np.ndarray
    bounce_facets: tuple
    total_length: float
    cumulative_reflection: float


@dataclass(frozen=True, eq=False)
class ChannelSnapshot:
    """Direct coefficient plus per-element Tx->element and element->Rx vectors."""

    h_d: complex
    h: np.ndarray
    g: np.ndarray
    frequency: float
    n: int

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        g = np.asarray(self.g, dtype=complex)
        if h.shape != (self.n,) or g.shape != (self.n,):
            raise ValueError(f"h and g must have shape ({self.n},)")
        h.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h_d", complex(self.h_d))


class _FacetArrays:
    """Per-scene numpy bundles for batched ray-facet queries."""

    def __init__(self, scene):
        self.count = len(scene.facets)
        self.reflection = np.array(
            [scene.materials[f.material].reflection_coefficient for f in scene.facets]
            if self.count else [])
        if self.count == 0:
            return
        frames = [facet_frame(f) for f in scene.facets]
        self.normals = np.stack([fr[0] for fr in frames])            # (F, 3), CCW winding
        self.offsets = np.array([fr[1] for fr in frames])            # (F,)
        verts = np.stack([f.vertices for f in scene.facets])         # (F, 4, 3)
        self.verts = verts
        edges = np.roll(verts, -1, axis=1) - verts                   # (F, 4, 3)
        edge_units = edges / np.linalg.norm(edges, axis=2, keepdims=True)
        # in-plane inward edge normals: dot(p - v_k, inward_k) is the signed
        # perpendicular distance (m) of p from edge k, positive inside
        self.edge_inward = np.cross(self.normals[:, None, :], edge_units)

    def inside(self, pts, edge_margin):
        """Signed-edge containment for pts (..., F, 3) against every facet."""
        w = pts[..., None, :] - self.verts                           # (..., F, 4, 3)
        s = np.einsum("...fez,fez->...fe", w, self.edge_inward)
        return np.all(s >= edge_margin, axis=-1)

    def segments_occluded(self, starts, ends):
        """True per segment iff the open segment crosses any facet interior."""
        starts = np.atleast_2d(starts)
        ends = np.atleast_2d(ends)
        if self.count == 0:
            return np.zeros(len(starts), dtype=bool)
        d = ends - starts                                            # (M, 3)
        denom = d @ self.normals.T                                   # (M, F)
        sn = starts @ self.normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.offsets[None, :] - sn) / denom
        t = np.where(np.abs(denom) > 0.0, t, -1.0)
        crossing = (t > SEG_T_TOL) & (t < 1.0 - SEG_T_TOL)
        pts = starts[:, None, :] + t[..., None] * d[:, None, :]      # (M, F, 3)
        hit = crossing & self.inside(pts, OCCLUDE_EDGE_MARGIN)
        return np.any(hit, axis=1)

    def _inside_one(self, idx, p):
        w = p - self.verts[idx]                                      # (4, 3)
        s = np.einsum("ez,ez->e", w, self.edge_inward[idx])
        return bool(np.all(s >= CONTAIN_EDGE_MARGIN))


def mirror_point(p, facet):
    """Reflection of point p across the facet's plane."""
    n, d, _ = facet_frame(facet)
    p = np.asarray(p, dtype=float)
    return p - 2.0 * (float(np.dot(n, p)) - d) * n


def segment_occluded(scene, a, b):
    """True iff the open segment (a, b) crosses any facet interior.

    Endpoints lying exactly on a facet do not count as occlusion.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.array_equal(a, b):
        raise ValueError("segment endpoints must differ")
    return bool(_FacetArrays(scene).segments_occluded(a[None, :], b[None, :])[0])


def _facet_sequences(n_facets, max_bounces):
    seqs = []
    level = [(i,) for i in range(n_facets)]
    for _ in range(max_bounces):
        seqs.extend(level)
        level = [seq + (j,) for seq in level for j in range(n_facets) if j != seq[-1]]
    return seqs


def trace_paths(scene, a, b, max_bounces=2):
    """All specular paths from a to b with up to max_bounces reflections.

    Returns the unoccluded LOS path plus every image-source path over ordered
    facet sequences, deduplicated and sorted by total length.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.array_equal(a, b):
        raise ValueError("trace endpoints must differ")
    geom = _FacetArrays(scene)
    return _trace(geom, scene, a, b, max_bounces)


def _trace(geom, scene, a, b, max_bounces):
    candidates = []  # (waypoints list, facet sequence)
    if geom.count == 0 or not geom.segments_occluded(a[None, :], b[None, :])[0]:
        candidates.append(([a, b], ()))

    if geom.count > 0 and max_bounces > 0:
        normals, offsets = geom.normals, geom.offsets
        for seq in _facet_sequences(geom.count, max_bounces):
            images = [a]
            for f in seq:
                p = images[-1]
                q = float(np.dot(normals[f], p)) - offsets[f]
                images.append(p - 2.0 * q * normals[f])
            pts = [b]
            ok = True
            for j in range(len(seq) - 1, -1, -1):
                f = seq[j]
                src = images[j + 1]
                tgt = pts[0]
                d = tgt - src
                denom = float(np.dot(normals[f], d))
                if denom == 0.0:
                    ok = False
                    break
                t = (offsets[f] - float(np.dot(normals[f], src))) / denom
                if not (SEG_T_TOL < t < 1.0 - SEG_T_TOL):
                    ok = False
                    break
                r = src + t * d
                if not geom._inside_one(f, r):
                    ok = False
                    break
                pts.insert(0, r)
            if ok:
                candidates.append(([a] + pts, seq))

    if not candidates:
        return []

    # one batched occlusion pass over every candidate segment
    starts, ends, owner = [], [], []
    for k, (wps, _) in enumerate(candidates):
        for s, e in zip(wps[:-1], wps[1:]):
            starts.append(s)
            ends.append(e)
            owner.append(k)
    blocked = geom.segments_occluded(np.stack(starts), np.stack(ends))
    dead = set(np.array(owner)[blocked].tolist())

    paths = []
    for k, (wps, seq) in enumerate(candidates):
        if k in dead:
            continue
        wp = np.stack(wps)
        seg_lengths = np.linalg.norm(np.diff(wp, axis=0), axis=1)
        refl = 1.0
        for f in seq:
            refl *= geom.reflection[f]
        path = PropagationPath(wp, tuple(int(f) for f in seq),
                               float(seg_lengths.sum()), float(refl))
        if not any(_same_path(path, other) for other in paths):
            paths.append(path)
    paths.sort(key=lambda p: (p.total_length, len(p.bounce_facets), p.bounce_facets))
    return paths


def _same_path(p1, p2):
    return (p1.waypoints.shape == p2.waypoints.shape
            and bool(np.all(np.abs(p1.waypoints - p2.waypoints) < DEDUP_TOL)))


def _amplitudes(lengths, wavelength, gain_product_dbi, reflection):
    return 10.0 ** (gain_product_dbi / 20.0) * reflection * wavelength / (4.0 * math.pi * lengths)


def _phases(lengths, wavelength):
    """Propagation phase -2*pi*d/lambda wrapped into [0, 2*pi).

    Wrapping via the fractional part of d/lambda keeps sub-1e-9 rad accuracy
    at hundreds of wavelengths, which plain fmod on the phase would lose.
    """
    cycles = lengths / wavelength
    frac = cycles - np.floor(cycles)
    phase = TWO_PI * (1.0 - frac)
    return np.where(phase >= TWO_PI, 0.0, phase)


def _coefficients(lengths, wavelength, gain_product_dbi, reflection):
    amp = _amplitudes(lengths, wavelength, gain_product_dbi, reflection)
    ph = _phases(lengths, wavelength)
    return amp * np.cos(ph) + 1j * (amp * np.sin(ph))


def path_coefficient(path, frequency, gain_product_dbi=0.0):
    """Complex baseband coefficient of one path at the given carrier."""
    wavelength = C0 / frequency
    c = _coefficients(np.array([path.total_length]), wavelength,
                      gain_product_dbi, path.cumulative_reflection)
    return complex(c[0])


def direct_channel(scene, max_bounces=2):
    """Coherent sum of all Tx->Rx path coefficients; exactly 0j if blocked."""
    dep = scene.deployment
    paths = trace_paths(scene, dep.tx.position, dep.rx.position, max_bounces)
    gain = dep.tx.gain_dbi + dep.rx.gain_dbi
    total = 0j
    for p in paths:
        total += path_coefficient(p, dep.carrier_frequency_hz, gain)
    return total


def _pattern_factors(unit_dirs, normal, q):
    """cos^q of the angle to the panel normal; zero behind the panel."""
    cos = np.clip(unit_dirs @ normal, 0.0, None)
    return cos ** q


def ris_link_channels(scene):
    """Per-element LOS vectors (h, g): Tx->element and element->Rx.

    Antenna gains ride on their own segment (tx on h, rx on g); each segment
    is weighted by the cos^q element pattern about the panel normal, and
    occluded segments are exactly 0j.
    """
    dep = scene.deployment
    panel = dep.ris
    wavelength = dep.wavelength
    pos = ris_element_positions(panel)
    geom = _FacetArrays(scene)
    return _element_links(geom, dep, panel, pos, wavelength)


def _element_links(geom, dep, panel, pos, wavelength):
    n = len(pos)
    tx = dep.tx.position
    rx = dep.rx.position

    d_tx = pos - tx[None, :]
    len_tx = np.linalg.norm(d_tx, axis=1)
    d_rx = rx[None, :] - pos
    len_rx = np.linalg.norm(d_rx, axis=1)

    h = _coefficients(len_tx, wavelength, dep.tx.gain_dbi, 1.0)
    g = _coefficients(len_rx, wavelength, dep.rx.gain_dbi, 1.0)

    q = panel.pattern_exponent
    h = h * _pattern_factors(-d_tx / len_tx[:, None], panel.normal, q)
    g = g * _pattern_factors(d_rx / len_rx[:, None], panel.normal, q)

    blocked_tx = geom.segments_occluded(np.broadcast_to(tx, (n, 3)), pos)
    blocked_rx = geom.segments_occluded(pos, np.broadcast_to(rx, (n, 3)))
    h = np.where(blocked_tx, 0j, h)
    g = np.where(blocked_rx, 0j, g)
    return h, g


def channel_snapshot(scene, max_bounces=2):
    """Bundle direct and RIS-link coefficients; pure function of the scene."""
    dep = scene.deployment
    geom = _FacetArrays(scene)

    paths = _trace(geom, scene, dep.tx.position, dep.rx.position, max_bounces)
    gain = dep.tx.gain_dbi + dep.rx.gain_dbi
    h_d = 0j
    for p in paths:
        h_d += path_coefficient(p, dep.carrier_frequency_hz, gain)

    pos = ris_element_positions(dep.ris)
    h, g = _element_links(geom, dep, dep.ris, pos, dep.wavelength)
    return ChannelSnapshot(
        h_d=h_d,
        h=h,
        g=g,
        frequency=dep.carrier_frequency_hz,
        n=dep.ris.n_elements,
    )


def snapshot_to_json(snapshot):
    doc = {
        "h_d": [snapshot.h_d.real, snapshot.h_d.imag],
        "h": [[z.real, z.imag] for z in snapshot.h],
        "g": [[z.real, z.imag] for z in snapshot.g],
        "frequency_hz": snapshot.frequency,
        "n": snapshot.n,
    }
    return json.dumps(doc, indent=2) + "\n"


def snapshot_from_json(text):
    doc = json.loads(text)
    n = int(doc["n"])
    return ChannelSnapshot(
        h_d=complex(doc["h_d"][0], doc["h_d"][1]),
        h=np.array([complex(re, im) for re, im in doc["h"]]),
        g=np.array([complex(re, im) for re, im in doc["g"]]),
        frequency=float(doc["frequency_hz"]),
        n=n,
    )
