"""Scene geometry: planar facets, materials, and Tx/Rx/RIS placement.

A scene is a list of convex quad facets (walls, floor, ceiling, partitions)
with per-material reflection coefficients, plus a deployment describing the
transmitter, receiver, RIS panel, carrier frequency, and transmit power.
Scenes are immutable after construction; loaders validate every invariant.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

C0 = 299792458.0  # speed of light, m/s

COPLANAR_TOL = 1e-9     # max out-of-plane vertex deviation, m
AREA_TOL = 1e-12        # min facet area, m^2
UNIT_TOL = 1e-12        # unit-vector / orthogonality tolerance


class SceneParseError(ValueError):
    """Malformed scene document (bad JSON, wrong types, unknown keys)."""


class SceneValidationError(ValueError):
    """Structurally valid document that violates a scene invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.context}: {v.rule}: {v.message}" for v in self.violations)
        super().__init__(f"scene validation failed: {lines}")


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    context: str


@dataclass(frozen=True, eq=False)
class Material:
    name: str
    reflection_coefficient: float


@dataclass(frozen=True, eq=False)
class Facet:
    """Convex planar quad. Vertices are ordered (either winding), shape (4, 3)."""

    vertices: np.ndarray
    material: str

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.shape != (4, 3):
            raise ValueError(f"facet vertices must be (4, 3), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)


@dataclass(frozen=True, eq=False)
class Antenna:
    position: np.ndarray
    gain_dbi: float

    def __post_init__(self):
        p = _as_point(self.position)
        object.__setattr__(self, "position", p)


@dataclass(frozen=True, eq=False)
class RisPanel:
    """rows x cols element grid centered on `center` in the plane normal to `normal`.

    Rows advance downward along -up (row 0 is topmost), columns advance along
    cross(up, normal); the flat element index i = row * cols + col is the
    canonical ordering used by every phase vector in this package.
    """

    center: np.ndarray
    normal: np.ndarray
    up: np.ndarray
    rows: int
    cols: int
    element_spacing: float
    pattern_exponent: float = 1.0

    def __post_init__(self):
        for name in ("center", "normal", "up"):
            object.__setattr__(self, name, _as_point(getattr(self, name)))

    @property
    def n_elements(self):
        return self.rows * self.cols


@dataclass(frozen=True, eq=False)
class Deployment:
    tx: Antenna
    rx: Antenna
    ris: RisPanel
    carrier_frequency_hz: float
    tx_power_dbm: float

    @property
    def wavelength(self):
        return C0 / self.carrier_frequency_hz


@dataclass(frozen=True, eq=False)
class Scene:
    facets: tuple
    materials: dict
    deployment: Deployment

    def __post_init__(self):
        object.__setattr__(self, "facets", tuple(self.facets))
        object.__setattr__(self, "materials", dict(self.materials))


def _as_point(x):
    p = np.asarray(x, dtype=float)
    if p.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {p.shape}")
    p = p.copy()
    p.setflags(write=False)
    return p


def facet_frame(facet):
    """Unit normal, plane offset d (n.x = d on the plane), and centroid.

    The normal is taken from the diagonal cross product, which is robust for
    any planar quad, and re-signed so the vertex winding is CCW around it.
    """
    v = facet.vertices
    n = np.cross(v[2] - v[0], v[3] - v[1])
    norm = np.linalg.norm(n)
    if norm == 0.0:
        raise ValueError("degenerate facet has no normal")
    n = n / norm
    e0 = v[1] - v[0]
    e1 = v[2] - v[1]
    if np.dot(np.cross(e0, e1), n) < 0:
        n = -n
    centroid = v.mean(axis=0)
    return n, float(np.dot(n, centroid)), centroid


def facet_area(facet):
    v = facet.vertices
    return 0.5 * float(np.linalg.norm(np.cross(v[2] - v[0], v[3] - v[1])))


def _check_facet(facet, idx, materials, out):
    ctx = f"facet[{idx}]"
    v = facet.vertices
    area = facet_area(facet)
    if area <= AREA_TOL:
        out.append(Violation("facet-area", f"area {area:.3e} m^2 below {AREA_TOL} m^2", ctx))
        return
    n, d, _ = facet_frame(facet)
    dev = np.abs(v @ n - d)
    if dev.max() > COPLANAR_TOL:
        out.append(Violation(
            "facet-coplanar",
            f"vertex out-of-plane deviation {dev.max():.3e} m exceeds {COPLANAR_TOL} m", ctx))
    edges = np.roll(v, -1, axis=0) - v
    turns = np.array([np.dot(np.cross(edges[k], edges[(k + 1) % 4]), n) for k in range(4)])
    if not np.all(turns > 0):
        out.append(Violation("facet-convex", "quad is not strictly convex", ctx))
    if facet.material not in materials:
        out.append(Violation("material-missing", f"unknown material {facet.material!r}", ctx))


def validate_scene(scene):
    """Return a list of Violation records; empty iff every invariant holds."""
    out = []
    for name, mat in scene.materials.items():
        g = mat.reflection_coefficient
        if not (0.0 <= g <= 1.0):
            out.append(Violation("material-range",
                                 f"reflection_coefficient {g} outside [0, 1]",
                                 f"material[{name!r}]"))
    for i, facet in enumerate(scene.facets):
        _check_facet(facet, i, scene.materials, out)

    dep = scene.deployment
    ris = dep.ris
    ctx = "deployment.ris"
    if ris.rows < 1 or ris.cols < 1:
        out.append(Violation("panel-shape", f"rows={ris.rows}, cols={ris.cols} must be >= 1", ctx))
    if abs(np.linalg.norm(ris.normal) - 1.0) > UNIT_TOL or abs(np.linalg.norm(ris.up) - 1.0) > UNIT_TOL:
        out.append(Violation("panel-frame", "normal and up must be unit vectors", ctx))
    elif abs(float(np.dot(ris.normal, ris.up))) > UNIT_TOL:
        out.append(Violation("panel-frame", "normal and up must be orthogonal", ctx))
    if ris.element_spacing <= 0.0:
        out.append(Violation("panel-spacing", f"element_spacing {ris.element_spacing} must be > 0", ctx))
    if ris.pattern_exponent < 0.0:
        out.append(Violation("panel-pattern", f"pattern_exponent {ris.pattern_exponent} must be >= 0", ctx))
    if dep.carrier_frequency_hz <= 0.0:
        out.append(Violation("deployment-frequency",
                             f"carrier_frequency_hz {dep.carrier_frequency_hz} must be > 0",
                             "deployment"))
    pts = [("tx", dep.tx.position), ("rx", dep.rx.position), ("ris.center", ris.center)]
    for (na, pa), (nb, pb) in [(pts[0], pts[1]), (pts[0], pts[2]), (pts[1], pts[2])]:
        if np.array_equal(pa, pb):
            out.append(Violation("deployment-distinct", f"{na} and {nb} coincide", "deployment"))
    return out


def ris_element_positions(panel):
    """World positions of all rows*cols elements, flat row-major, shape (N, 3).

    Row 0 is the topmost row along `up`; within a row, columns advance along
    cross(up, normal). The grid is centered on panel.center.
    """
    col_axis = np.cross(panel.up, panel.normal)
    r_off = ((panel.rows - 1) / 2.0 - np.arange(panel.rows)) * panel.element_spacing
    c_off = (np.arange(panel.cols) - (panel.cols - 1) / 2.0) * panel.element_spacing
    pts = (panel.center[None, None, :]
           + r_off[:, None, None] * panel.up[None, None, :]
           + c_off[None, :, None] * col_axis[None, None, :])
    return pts.reshape(panel.rows * panel.cols, 3)


# ---------------------------------------------------------------------------
# scene file format: a single strict-JSON document (unknown keys rejected)

def _require_keys(obj, required, optional, where):
    if not isinstance(obj, dict):
        raise SceneParseError(f"{where}: expected an object")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise SceneParseError(f"{where}: unknown keys {unknown}")
    missing = sorted(set(required) - set(obj))
    if missing:
        raise SceneParseError(f"{where}: missing keys {missing}")


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SceneParseError(f"{where}: expected a number, got {type(x).__name__}")
    return float(x)


def _integer(x, where):
    if isinstance(x, bool) or not isinstance(x, int):
        raise SceneParseError(f"{where}: expected an integer, got {type(x).__name__}")
    return x


def _point(x, where):
    if not isinstance(x, list) or len(x) != 3:
        raise SceneParseError(f"{where}: expected [x, y, z]")
    return np.array([_number(c, where) for c in x])


def _parse_antenna(obj, where):
    _require_keys(obj, ("position", "gain_dbi"), (), where)
    return Antenna(_point(obj["position"], f"{where}.position"),
                   _number(obj["gain_dbi"], f"{where}.gain_dbi"))


def load_scene(text):
    """Parse and validate a scene document; returns a Scene.

    Raises SceneParseError on malformed input (including unknown keys) and
    SceneValidationError when any scene invariant fails.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"invalid JSON: {exc}") from exc
    _require_keys(doc, ("materials", "facets", "deployment"), (), "document")

    if not isinstance(doc["materials"], list):
        raise SceneParseError("materials: expected an array")
    materials = {}
    for i, m in enumerate(doc["materials"]):
        where = f"materials[{i}]"
        _require_keys(m, ("name", "reflection_coefficient"), (), where)
        if not isinstance(m["name"], str):
            raise SceneParseError(f"{where}.name: expected a string")
        if m["name"] in materials:
            raise SceneParseError(f"{where}: duplicate material {m['name']!r}")
        materials[m["name"]] = Material(m["name"], _number(m["reflection_coefficient"], where))

    if not isinstance(doc["facets"], list):
        raise SceneParseError("facets: expected an array")
    facets = []
    for i, f in enumerate(doc["facets"]):
        where = f"facets[{i}]"
        _require_keys(f, ("vertices", "material"), (), where)
        if not isinstance(f["vertices"], list) or len(f["vertices"]) != 4:
            raise SceneParseError(f"{where}.vertices: expected 4 points")
        verts = np.stack([_point(p, f"{where}.vertices[{k}]") for k, p in enumerate(f["vertices"])])
        if not isinstance(f["material"], str):
            raise SceneParseError(f"{where}.material: expected a string")
        facets.append(Facet(verts, f["material"]))

    dep = doc["deployment"]
    _require_keys(dep, ("tx", "rx", "ris", "carrier_frequency_hz", "tx_power_dbm"), (), "deployment")
    freq = _number(dep["carrier_frequency_hz"], "deployment.carrier_frequency_hz")

    r = dep["ris"]
    _require_keys(r, ("center", "normal", "up", "rows", "cols"),
                  ("element_spacing", "pattern_exponent"), "deployment.ris")
    spacing = (_number(r["element_spacing"], "deployment.ris.element_spacing")
               if "element_spacing" in r else (C0 / freq) / 2.0 if freq > 0 else 0.0)
    panel = RisPanel(
        center=_point(r["center"], "deployment.ris.center"),
        normal=_point(r["normal"], "deployment.ris.normal"),
        up=_point(r["up"], "deployment.ris.up"),
        rows=_integer(r["rows"], "deployment.ris.rows"),
        cols=_integer(r["cols"], "deployment.ris.cols"),
        element_spacing=spacing,
        pattern_exponent=(_number(r["pattern_exponent"], "deployment.ris.pattern_exponent")
                          if "pattern_exponent" in r else 1.0),
    )
    scene = Scene(
        facets=tuple(facets),
        materials=materials,
        deployment=Deployment(
            tx=_parse_antenna(dep["tx"], "deployment.tx"),
            rx=_parse_antenna(dep["rx"], "deployment.rx"),
            ris=panel,
            carrier_frequency_hz=freq,
            tx_power_dbm=_number(dep["tx_power_dbm"], "deployment.tx_power_dbm"),
        ),
    )
    violations = validate_scene(scene)
    if violations:
        raise SceneValidationError(violations)
    return scene


def serialize_scene(scene):
    """Inverse of load_scene: emits a document whose reload is field-identical."""
    dep = scene.deployment
    ris = dep.ris
    doc = {
        "materials": [{"name": m.name, "reflection_coefficient": m.reflection_coefficient}
                      for m in scene.materials.values()],
        "facets": [{"vertices": [list(v) for v in f.vertices], "material": f.material}
                   for f in scene.facets],
        "deployment": {
            "tx": {"position": list(dep.tx.position), "gain_dbi": dep.tx.gain_dbi},
            "rx": {"position": list(dep.rx.position), "gain_dbi": dep.rx.gain_dbi},
            "ris": {
                "center": list(ris.center),
                "normal": list(ris.normal),
                "up": list(ris.up),
                "rows": ris.rows,
                "cols": ris.cols,
                "element_spacing": ris.element_spacing,
                "pattern_exponent": ris.pattern_exponent,
            },
            "carrier_frequency_hz": dep.carrier_frequency_hz,
            "tx_power_dbm": dep.tx_power_dbm,
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def with_receiver(scene, position):
    """Copy of the scene with the receiver moved to `position` (gain kept)."""
    dep = scene.deployment
    return replace(scene, deployment=replace(dep, rx=Antenna(_as_point(position), dep.rx.gain_dbi)))
