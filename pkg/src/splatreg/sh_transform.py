"""Rotation of real spherical-harmonic coefficients by sampling and solving.

The transform for each degree block is recovered from function values alone:
evaluate the basis at a fixed spread of unit directions, evaluate it again at
the rotated directions, and solve the resulting linear system with a
pseudo-inverse.  No recursion or Wigner matrices are involved; the
construction only needs the forward basis evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError
from .gs_model import SH_REST_PER_CHANNEL, _check_rotation

MAX_DEGREE = 3

# Real SH polynomial constants, graphics ordering m = -l..l (degree-3 splats).
_C1 = 0.4886025119029199
_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
       -1.0925484305920792, 0.5462742152960396)
_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
       0.3731763325901154, -0.4570457994644658, 1.445305721320277,
       -0.5900435899266435)

# Relative singular-value cutoff for the pseudo-inverse of the sample matrix.
_PINV_RCOND = 1e-10


def eval_sh_basis(degree: int, direction: np.ndarray) -> np.ndarray:
    """Real SH basis values of one degree at unit direction(s).

    Accepts a single (3,) vector or an (N, 3) batch; returns (2*degree+1,)
    or (N, 2*degree+1) in the ordering m = -degree..degree.
    """
    if degree not in (0, 1, 2, 3):
        raise ValueError(f"degree must be in [0, 3], got {degree}")
    d = np.asarray(direction, dtype=np.float64)
    single = d.ndim == 1
    d = np.atleast_2d(d)
    norms = np.linalg.norm(d, axis=1)
    if not np.allclose(norms, 1.0, atol=1e-9):
        raise ValueError("direction vectors must be unit length (tol 1e-9)")
    x, y, z = d[:, 0], d[:, 1], d[:, 2]

    if degree == 0:
        out = np.full((len(d), 1), 0.28209479177387814)
    elif degree == 1:
        out = np.stack([-_C1 * y, _C1 * z, -_C1 * x], axis=1)
    elif degree == 2:
        xx, yy, zz = x * x, y * y, z * z
        out = np.stack([
            _C2[0] * x * y,
            _C2[1] * y * z,
            _C2[2] * (2.0 * zz - xx - yy),
            _C2[3] * x * z,
            _C2[4] * (xx - yy),
        ], axis=1)
    else:
        xx, yy, zz = x * x, y * y, z * z
        out = np.stack([
            _C3[0] * y * (3.0 * xx - yy),
            _C3[1] * x * y * z,
            _C3[2] * y * (4.0 * zz - xx - yy),
            _C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
            _C3[4] * x * (4.0 * zz - xx - yy),
            _C3[5] * z * (xx - yy),
            _C3[6] * x * (xx - 3.0 * yy),
        ], axis=1)
    return out[0] if single else out


def _unit_rows(rows) -> np.ndarray:
    u = np.asarray(rows, dtype=np.float64)
    return u / np.linalg.norm(u, axis=1, keepdims=True)


# Fixed, hardcoded sample directions per degree.  Evenly-spaced spirals are
# unusable here (arithmetic-progression azimuths make the degree-1 and
# degree-3 sample matrices exactly singular), so these sets were chosen for
# sample-matrix conditioning: min/max singular-value ratios are 1.0, 0.51
# and 0.35 for degrees 1-3.
_SAMPLE_DIRECTIONS = {
    1: _unit_rows([[1.0, 0.0, 0.0],
                   [0.0, 1.0, 0.0],
                   [0.0, 0.0, 1.0]]),
    2: _unit_rows([[-0.20010194, 0.09990670, -0.97466808],
                   [0.79553539, -0.58251041, 0.16674854],
                   [0.18894836, -0.78569693, -0.58904911],
                   [0.86065957, 0.27151969, 0.43074605],
                   [-0.78829806, 0.06160309, 0.61220196]]),
    3: _unit_rows([[-0.13420681, -0.49930765, -0.85596753],
                   [-0.81361976, -0.23782409, 0.53053048],
                   [0.02638967, 0.90579361, 0.42289658],
                   [0.98275101, -0.18285920, 0.02762166],
                   [0.51086278, 0.19495551, 0.83726434],
                   [0.18045766, 0.86938958, -0.45999650],
                   [0.72714403, -0.49852149, -0.47195115]]),
}


@dataclass(frozen=True)
class ShRotation:
    """Per-degree coefficient rotation blocks; block i has shape (2i+1, 2i+1)."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.blocks) != MAX_DEGREE + 1:
            raise ValueError(f"expected {MAX_DEGREE + 1} degree blocks")
        for i, b in enumerate(self.blocks):
            if b.shape != (2 * i + 1, 2 * i + 1):
                raise ValueError(f"degree {i} block has shape {b.shape}")

    def rest_matrix(self) -> np.ndarray:
        """Block-diagonal (15, 15) matrix acting on one channel of sh_rest."""
        M = np.zeros((SH_REST_PER_CHANNEL, SH_REST_PER_CHANNEL))
        M[0:3, 0:3] = self.blocks[1]
        M[3:8, 3:8] = self.blocks[2]
        M[8:15, 8:15] = self.blocks[3]
        return M


def build_sh_rotation(R: np.ndarray) -> ShRotation:
    """Coefficient rotation blocks for scene rotation R, degree by degree.

    For degree i: evaluate the basis at 2i+1 fixed directions (columns Q),
    evaluate it at the rotated directions (columns B), and take B @ pinv(Q).
    Directions are unit vectors, so only the rotation part of a similarity
    transform is applicable to them.
    """
    R = _check_rotation(R, 1e-6, "build_sh_rotation")
    blocks: list[np.ndarray] = [np.eye(1)]
    for degree in range(1, MAX_DEGREE + 1):
        u = _SAMPLE_DIRECTIONS[degree]
        Q = eval_sh_basis(degree, u).T                 # (2i+1, 2i+1), columns SH(u_k)
        rotated = u @ R.T
        rotated /= np.linalg.norm(rotated, axis=1, keepdims=True)
        B = eval_sh_basis(degree, rotated).T
        sv = np.linalg.svd(Q, compute_uv=False)
        if sv[-1] <= _PINV_RCOND * sv[0]:
            raise DegenerateGeometryError(
                f"degree {degree} sample matrix is rank-deficient; "
                "choose a different direction sample set")
        blocks.append(B @ np.linalg.pinv(Q, rcond=_PINV_RCOND))
    return ShRotation(blocks=tuple(blocks))


def apply_sh_rotation(rot: ShRotation, sh_dc: np.ndarray,
                      sh_rest: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotate one Gaussian's SH coefficients.

    ``sh_dc`` is returned unchanged (the degree-0 basis is rotation
    invariant); each degree block of each channel of the 45-vector
    ``sh_rest`` is multiplied by its rotation block.  An empty ``sh_rest``
    (degree-0 model) passes through.
    """
    dc = np.asarray(sh_dc, dtype=np.float64).reshape(3).copy()
    rest = np.asarray(sh_rest, dtype=np.float64).reshape(-1)
    if rest.size == 0:
        return dc, rest.copy()
    if rest.size != 3 * SH_REST_PER_CHANNEL:
        raise ValueError(f"sh_rest must have {3 * SH_REST_PER_CHANNEL} entries")
    channels = rest.reshape(3, SH_REST_PER_CHANNEL)
    rotated = channels @ rot.rest_matrix().T
    return dc, rotated.reshape(-1)


def apply_sh_rotation_many(rot: ShRotation, sh_rest: np.ndarray) -> np.ndarray:
    """Vectorized form of :func:`apply_sh_rotation` over (N, 45) coefficients."""
    rest = np.asarray(sh_rest, dtype=np.float64)
    if rest.shape[1] == 0:
        return rest.copy()
    n = len(rest)
    channels = rest.reshape(n, 3, SH_REST_PER_CHANNEL)
    return (channels @ rot.rest_matrix().T).reshape(n, -1)


def eval_sh_color(sh_dc: np.ndarray, sh_rest: np.ndarray,
                  direction: np.ndarray) -> np.ndarray:
    """Full SH expansion at unit direction(s): 0.5 + sum over degrees, clamped.

    ``sh_dc`` (N, 3) and ``sh_rest`` (N, 45) paired with one direction per
    row (N, 3), or single vectors.  Returns colors in [0, 1].
    """
    dc = np.atleast_2d(np.asarray(sh_dc, dtype=np.float64))
    rest = np.atleast_2d(np.asarray(sh_rest, dtype=np.float64))
    d = np.atleast_2d(np.asarray(direction, dtype=np.float64))
    single = np.asarray(sh_dc).ndim == 1
    value = 0.28209479177387814 * dc
    if rest.shape[1]:
        basis = np.concatenate([eval_sh_basis(deg, d) for deg in (1, 2, 3)], axis=1)
        value = value + np.einsum("nk,nck->nc",
                                  basis, rest.reshape(len(rest), 3, SH_REST_PER_CHANNEL))
    color = np.clip(0.5 + value, 0.0, 1.0)
    return color[0] if single else color
