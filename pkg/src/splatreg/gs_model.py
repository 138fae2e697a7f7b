"""Domain types for Gaussian-splat scene models and bit-exact splat PLY I/O.

A model is stored column-wise (one numpy array per attribute) in the same
float32 precision as the on-disk PLY, so that ``save_ply(load_ply(p))``
reproduces every float field bit-exactly.  All geometry math is done in
float64 and cast back to float32 only when a new model is materialized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .errors import EmptyCloudError, FormatError

# Degree-0 real spherical-harmonic constant; the view-independent color term
# of a splat is 0.5 + SH_C0 * f_dc.
SH_C0 = 0.28209479177387814

# Number of degree 1..3 coefficients per color channel.
SH_REST_PER_CHANNEL = 15
SH_REST_WIDTH = 3 * SH_REST_PER_CHANNEL


# ---------------------------------------------------------------------------
# Quaternion helpers (w, x, y, z ordering throughout)
# ---------------------------------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Normalize quaternion(s) to unit length; raises on zero norm."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm == 0.0) or not np.all(np.isfinite(norm)):
        raise ValueError("cannot normalize zero or non-finite quaternion")
    return q / norm


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion(s) (..., 4) to rotation matrix (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix (3, 3) to unit quaternion (w, x, y, z) with w >= 0."""
    R = np.asarray(R, dtype=np.float64)
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        q = np.array([(R[2, 1] - R[1, 2]) / s,
                      0.25 * s,
                      (R[0, 1] + R[1, 0]) / s,
                      (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        q = np.array([(R[0, 2] - R[2, 0]) / s,
                      (R[0, 1] + R[1, 0]) / s,
                      0.25 * s,
                      (R[1, 2] + R[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        q = np.array([(R[1, 0] - R[0, 1]) / s,
                      (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s,
                      0.25 * s])
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product of quaternion arrays (..., 4)."""
    q1 = np.asarray(q1, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)
    w1, x1, y1, z1 = q1[..., 0], q1[..., 1], q1[..., 2], q1[..., 3]
    w2, x2, y2, z2 = q2[..., 0], q2[..., 1], q2[..., 2], q2[..., 3]
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=-1)


def _check_rotation(R: np.ndarray, tol: float, what: str) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValueError(f"{what}: expected 3x3 rotation, got {R.shape}")
    if not np.allclose(R.T @ R, np.eye(3), atol=tol):
        raise ValueError(f"{what}: matrix is not orthonormal (tol {tol})")
    if np.linalg.det(R) < 0:
        raise ValueError(f"{what}: matrix has negative determinant")
    return R


# ---------------------------------------------------------------------------
# Similarity transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sim3:
    """Similarity transform p -> s * R @ p + T with s > 0 and proper rotation R."""

    s: float
    R: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.s) or self.s <= 0:
            raise ValueError(f"Sim3: scale must be positive, got {self.s}")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "R", _check_rotation(self.R, 1e-9, "Sim3.R"))
        T = np.asarray(self.T, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(T)):
            raise ValueError("Sim3: non-finite translation")
        object.__setattr__(self, "T", T)

    @staticmethod
    def identity() -> "Sim3":
        return Sim3(1.0, np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points of shape (3,) or (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return self.s * (p @ self.R.T) + self.T

    def compose(self, other: "Sim3") -> "Sim3":
        """Return self after other: (self.compose(other)).apply(p) == self.apply(other.apply(p))."""
        return Sim3(self.s * other.s,
                    self.R @ other.R,
                    self.s * (self.R @ other.T) + self.T)

    def inverse(self) -> "Sim3":
        Rt = self.R.T
        return Sim3(1.0 / self.s, Rt, -(Rt @ self.T) / self.s)

    def matrix(self) -> np.ndarray:
        """Homogeneous 4x4 matrix [[s*R, T], [0, 1]]."""
        M = np.eye(4)
        M[:3, :3] = self.s * self.R
        M[:3, 3] = self.T
        return M


# ---------------------------------------------------------------------------
# Cameras
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CameraPose:
    """Pinhole camera: world-from-camera rotation/translation plus intrinsics.

    ``rotation`` columns are the camera axes expressed in world coordinates;
    the camera center in world coordinates equals ``translation``; the view
    direction is the third column.
    """

    rotation: np.ndarray
    translation: np.ndarray
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "rotation",
                           _check_rotation(self.rotation, 1e-6, "CameraPose.rotation"))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "translation", t)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("CameraPose: focal lengths must be positive")

    @property
    def center(self) -> np.ndarray:
        return self.translation

    @property
    def forward(self) -> np.ndarray:
        """Optical axis in world coordinates."""
        return self.rotation[:, 2]


def load_cameras(path) -> list[CameraPose]:
    """Read a camera JSON file (array of pose records)."""
    with open(path, "r", encoding="utf-8") as f:
        records = json.load(f)
    if not isinstance(records, list):
        raise FormatError(f"{path}: camera file must be a JSON array")
    cams = []
    for i, rec in enumerate(records):
        try:
            R = np.asarray(rec["rotation"], dtype=np.float64).reshape(3, 3)
            cams.append(CameraPose(
                rotation=R,
                translation=np.asarray(rec["translation"], dtype=np.float64),
                fx=float(rec["fx"]), fy=float(rec["fy"]),
                cx=float(rec["cx"]), cy=float(rec["cy"]),
                width=int(rec["width"]), height=int(rec["height"]),
            ))
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"{path}: camera {i}: {exc}") from exc
    return cams


def save_cameras(cams: list[CameraPose], path) -> None:
    records = [{
        "rotation": [float(v) for v in c.rotation.reshape(-1)],
        "translation": [float(v) for v in c.translation],
        "fx": c.fx, "fy": c.fy, "cx": c.cx, "cy": c.cy,
        "width": c.width, "height": c.height,
    } for c in cams]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(records, f, indent=1, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# Gaussians
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    """A single anisotropic Gaussian primitive (float64 view of model columns)."""

    position: np.ndarray      # (3,)
    opacity_logit: float      # pre-sigmoid
    rotation: np.ndarray      # (4,) unit quaternion, (w, x, y, z)
    log_scale: np.ndarray     # (3,) log of per-axis std-dev
    sh_dc: np.ndarray         # (3,) degree-0 coefficient per channel
    sh_rest: np.ndarray       # (45,) degrees 1..3, channel-major; empty for degree 0


@dataclass(frozen=True)
class GaussianModel:
    """A collection of Gaussian primitives plus the training camera poses.

    Column arrays are float32 (PLY storage precision).  ``rotations`` keeps
    the raw values as loaded so that saving is a bit-exact round trip;
    ``unit_rotations()`` returns the normalized float64 quaternions used by
    all computation.
    """

    positions: np.ndarray       # (N, 3) float32
    opacity_logits: np.ndarray  # (N,)  float32
    rotations: np.ndarray       # (N, 4) float32, (w, x, y, z), raw
    log_scales: np.ndarray      # (N, 3) float32
    sh_dc: np.ndarray           # (N, 3) float32
    sh_rest: np.ndarray         # (N, 45) or (N, 0) float32, channel-major
    cameras: list[CameraPose] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.positions)
        for name in ("positions", "opacity_logits", "rotations", "log_scales",
                     "sh_dc", "sh_rest"):
            arr = np.asarray(getattr(self, name), dtype=np.float32)
            object.__setattr__(self, name, arr)
            if len(arr) != n:
                raise ValueError(f"GaussianModel: {name} has {len(arr)} rows, expected {n}")
        if self.sh_rest.shape[1] not in (0, SH_REST_WIDTH):
            raise ValueError(
                f"GaussianModel: sh_rest must have 0 or {SH_REST_WIDTH} columns, "
                f"got {self.sh_rest.shape[1]}")
        if n and not np.all(np.isfinite(self.log_scales)):
            raise ValueError("GaussianModel: non-finite log_scale")
        if n:
            norms = np.linalg.norm(self.rotations.astype(np.float64), axis=1)
            if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
                raise ValueError("GaussianModel: zero or non-finite quaternion")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def sh_degree(self) -> int:
        return 3 if self.sh_rest.shape[1] == SH_REST_WIDTH else 0

    def unit_rotations(self) -> np.ndarray:
        """Normalized float64 quaternions, (N, 4)."""
        return quat_normalize(self.rotations.astype(np.float64))

    def opacities(self) -> np.ndarray:
        """Post-sigmoid opacities in (0, 1), float64."""
        return expit(self.opacity_logits.astype(np.float64))

    def gaussian(self, i: int) -> Gaussian:
        return Gaussian(
            position=self.positions[i].astype(np.float64),
            opacity_logit=float(self.opacity_logits[i]),
            rotation=quat_normalize(self.rotations[i].astype(np.float64)),
            log_scale=self.log_scales[i].astype(np.float64),
            sh_dc=self.sh_dc[i].astype(np.float64),
            sh_rest=self.sh_rest[i].astype(np.float64),
        )

    @property
    def gaussians(self) -> list[Gaussian]:
        """Materialized per-primitive view; intended for small models and tests."""
        return [self.gaussian(i) for i in range(len(self))]

    def with_cameras(self, cameras: list[CameraPose]) -> "GaussianModel":
        return replace(self, cameras=list(cameras))

    @staticmethod
    def from_gaussians(gaussians: list[Gaussian],
                       cameras: list[CameraPose] | None = None) -> "GaussianModel":
        if not gaussians:
            raise EmptyCloudError("cannot build a model from zero gaussians")
        widths = {len(g.sh_rest) for g in gaussians}
        if len(widths) != 1:
            raise ValueError("all gaussians must share the same sh_rest width")
        return GaussianModel(
            positions=np.stack([g.position for g in gaussians]),
            opacity_logits=np.array([g.opacity_logit for g in gaussians]),
            rotations=np.stack([g.rotation for g in gaussians]),
            log_scales=np.stack([g.log_scale for g in gaussians]),
            sh_dc=np.stack([g.sh_dc for g in gaussians]),
            sh_rest=np.stack([g.sh_rest for g in gaussians]).reshape(len(gaussians), -1),
            cameras=list(cameras or []),
        )


# ---------------------------------------------------------------------------
# Splat PLY I/O
# ---------------------------------------------------------------------------

_BASE_PROPS = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
_TAIL_PROPS = ["opacity", "scale_0", "scale_1", "scale_2",
               "rot_0", "rot_1", "rot_2", "rot_3"]


def _canonical_props(n_rest: int) -> list[str]:
    return _BASE_PROPS + [f"f_rest_{i}" for i in range(n_rest)] + _TAIL_PROPS


def _parse_ply_header(f, path) -> tuple[int, list[str]]:
    def read_line() -> str:
        raw = f.readline()
        if not raw:
            raise FormatError(f"{path}: truncated header")
        return raw.decode("ascii", errors="replace").strip()

    if read_line() != "ply":
        raise FormatError(f"{path}: missing 'ply' magic")
    vertex_count = None
    props: list[str] = []
    fmt_seen = False
    in_vertex = False
    while True:
        line = read_line()
        if line == "end_header":
            break
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if tokens[1:] != ["binary_little_endian", "1.0"]:
                raise FormatError(f"{path}: unsupported format '{' '.join(tokens[1:])}'")
            fmt_seen = True
        elif tokens[0] == "element":
            if tokens[1] == "vertex":
                vertex_count = int(tokens[2])
                in_vertex = True
            else:
                raise FormatError(f"{path}: unsupported element '{tokens[1]}'")
        elif tokens[0] == "property":
            if not in_vertex:
                raise FormatError(f"{path}: property outside vertex element")
            if tokens[1] != "float":
                raise FormatError(f"{path}: property '{tokens[-1]}' must be float")
            props.append(tokens[2])
        else:
            raise FormatError(f"{path}: unexpected header line '{line}'")
    if not fmt_seen:
        raise FormatError(f"{path}: missing format line")
    if vertex_count is None:
        raise FormatError(f"{path}: missing vertex element")
    return vertex_count, props


def load_ply(path) -> "GaussianModel":
    """Read a splat PLY file.

    The vertex element must carry exactly the canonical float32 properties
    (positions, normals, f_dc, optional f_rest_0..44, opacity, scales, rot
    quaternion).  Normals are read and ignored.
    """
    with open(path, "rb") as f:
        count, props = _parse_ply_header(f, path)
        prop_set = set(props)
        if len(prop_set) != len(props):
            raise FormatError(f"{path}: duplicate property")
        n_rest = sum(1 for p in props if p.startswith("f_rest_"))
        if n_rest not in (0, SH_REST_WIDTH):
            raise FormatError(
                f"{path}: unsupported f_rest property count {n_rest} "
                f"(expected 0 or {SH_REST_WIDTH})")
        expected = _canonical_props(n_rest)
        for name in expected:
            if name not in prop_set:
                raise FormatError(f"{path}: missing required property '{name}'")
        for name in props:
            if name not in expected:
                raise FormatError(f"{path}: unexpected property '{name}'")

        dtype = np.dtype([(p, "<f4") for p in props])
        payload = f.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise FormatError(f"{path}: payload truncated "
                              f"({len(payload)} of {count * dtype.itemsize} bytes)")
        rec = np.frombuffer(payload, dtype=dtype, count=count)

    def cols(names: list[str]) -> np.ndarray:
        out = np.empty((count, len(names)), dtype=np.float32)
        for j, nm in enumerate(names):
            out[:, j] = rec[nm]
        return out

    try:
        model = GaussianModel(
            positions=cols(["x", "y", "z"]),
            opacity_logits=rec["opacity"].copy(),
            rotations=cols(["rot_0", "rot_1", "rot_2", "rot_3"]),
            log_scales=cols(["scale_0", "scale_1", "scale_2"]),
            sh_dc=cols(["f_dc_0", "f_dc_1", "f_dc_2"]),
            sh_rest=cols([f"f_rest_{i}" for i in range(n_rest)]),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return model


def save_ply(model: GaussianModel, path) -> None:
    """Write a splat PLY; the output reloads with bit-identical float fields."""
    n = len(model)
    if n == 0:
        raise EmptyCloudError("empty model")
    props = _canonical_props(model.sh_rest.shape[1])
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {p}" for p in props]
    header.append("end_header")

    rec = np.zeros(n, dtype=np.dtype([(p, "<f4") for p in props]))
    rec["x"], rec["y"], rec["z"] = model.positions.T
    # normals are not modeled; written as zeros
    rec["f_dc_0"], rec["f_dc_1"], rec["f_dc_2"] = model.sh_dc.T
    for i in range(model.sh_rest.shape[1]):
        rec[f"f_rest_{i}"] = model.sh_rest[:, i]
    rec["opacity"] = model.opacity_logits
    rec["scale_0"], rec["scale_1"], rec["scale_2"] = model.log_scales.T
    rec["rot_0"], rec["rot_1"], rec["rot_2"], rec["rot_3"] = model.rotations.T

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(rec.tobytes())


# ---------------------------------------------------------------------------
# Point extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ColoredPointCloud:
    """Parallel arrays of positions, RGB colors in [0, 1] and opacities in [0, 1]."""

    points: np.ndarray     # (N, 3) float64
    colors: np.ndarray     # (N, 3) float64
    opacities: np.ndarray  # (N,)  float64

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        c = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        o = np.asarray(self.opacities, dtype=np.float64).reshape(-1)
        if not (len(p) == len(c) == len(o)):
            raise ValueError("ColoredPointCloud: arrays must have equal length")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "colors", c)
        object.__setattr__(self, "opacities", o)

    def __len__(self) -> int:
        return len(self.points)

    def bbox_diagonal(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.linalg.norm(self.points.max(axis=0) - self.points.min(axis=0)))


def sh_dc_to_color(sh_dc: np.ndarray) -> np.ndarray:
    """View-independent color of the degree-0 coefficient: clamp(0.5 + C0 * dc)."""
    dc = np.asarray(sh_dc, dtype=np.float64)
    return np.clip(0.5 + SH_C0 * dc, 0.0, 1.0)


def extract_confident_points(model: GaussianModel,
                             opacity_threshold: float = 0.7,
                             max_points: int = 30000,
                             seed: int = 0) -> ColoredPointCloud:
    """Positions/colors/opacities of Gaussians whose opacity exceeds the threshold.

    Survivor counts above ``max_points`` are reduced by a seeded uniform
    subsample so downstream registration stays reproducible.
    """
    if not 0.0 < opacity_threshold < 1.0:
        raise ValueError("opacity_threshold must lie in (0, 1)")
    alpha = model.opacities()
    keep = np.flatnonzero(alpha > opacity_threshold)
    if keep.size == 0:
        raise EmptyCloudError(
            f"no gaussians with opacity above {opacity_threshold}; registration cannot proceed")
    if keep.size > max_points:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(keep, size=max_points, replace=False))
    return ColoredPointCloud(
        points=model.positions[keep].astype(np.float64),
        colors=sh_dc_to_color(model.sh_dc[keep]),
        opacities=alpha[keep],
    )


def model_center(model: GaussianModel, opacity_threshold: float = 0.7) -> np.ndarray:
    """Centroid of the confident points (all points if none pass the threshold)."""
    if len(model) == 0:
        raise EmptyCloudError("empty model")
    alpha = model.opacities()
    keep = alpha > opacity_threshold
    pts = model.positions[keep] if np.any(keep) else model.positions
    return pts.astype(np.float64).mean(axis=0)
