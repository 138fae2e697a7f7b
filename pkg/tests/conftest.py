"""Shared helpers for the test suite."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from splatreg.gs_model import GaussianModel


def write_splat_ply(path, fields: dict[str, np.ndarray], n_rest: int = 45) -> None:
    """Reference PLY writer, independent of the library implementation.

    ``fields`` maps canonical property names to float32 column arrays.
    Missing columns default to zeros, which keeps test setup terse.
    """
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(n_rest)]
    names += ["opacity", "scale_0", "scale_1", "scale_2",
              "rot_0", "rot_1", "rot_2", "rot_3"]
    n = len(next(iter(fields.values())))
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {p}" for p in names]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        for row in range(n):
            for name in names:
                col = fields.get(name)
                value = float(col[row]) if col is not None else 0.0
                f.write(struct.pack("<f", np.float32(value)))


def random_model_fields(rng: np.random.Generator, n: int) -> dict[str, np.ndarray]:
    """Random float32 columns for a degree-3 splat PLY, quaternions unit (w>0)."""
    f32 = lambda shape: rng.normal(size=shape).astype(np.float32)
    quat = rng.normal(size=(n, 4))
    quat[:, 0] = np.abs(quat[:, 0]) + 0.1
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    quat = quat.astype(np.float32)
    fields = {
        "x": f32(n), "y": f32(n), "z": f32(n),
        "f_dc_0": f32(n), "f_dc_1": f32(n), "f_dc_2": f32(n),
        "opacity": f32(n),
        "scale_0": f32(n) * 0.1 - 3, "scale_1": f32(n) * 0.1 - 3, "scale_2": f32(n) * 0.1 - 3,
        "rot_0": quat[:, 0], "rot_1": quat[:, 1], "rot_2": quat[:, 2], "rot_3": quat[:, 3],
    }
    for i in range(45):
        fields[f"f_rest_{i}"] = (rng.normal(size=n) * 0.05).astype(np.float32)
    return fields


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random proper rotation matrix."""
    M = rng.normal(size=(3, 3))
    Q, _ = np.linalg.qr(M)
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


def simple_model(positions, opacity_logits=None, sh_dc=None, cameras=None,
                 log_scale=-3.0) -> GaussianModel:
    """Model with identity rotations and constant scales, for geometry tests."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(positions)
    if opacity_logits is None:
        opacity_logits = np.full(n, 4.0)
    if sh_dc is None:
        sh_dc = np.zeros((n, 3))
    rot = np.zeros((n, 4))
    rot[:, 0] = 1.0
    return GaussianModel(
        positions=positions,
        opacity_logits=np.asarray(opacity_logits, dtype=np.float64),
        rotations=rot,
        log_scales=np.full((n, 3), log_scale),
        sh_dc=np.asarray(sh_dc, dtype=np.float64).reshape(n, 3),
        sh_rest=np.zeros((n, 45)),
        cameras=list(cameras or []),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
