"""Tests for real-SH evaluation and the sample-and-solve coefficient rotation."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation
from scipy.special import sph_harm_y

from splatreg.errors import DegenerateGeometryError
from splatreg.sh_transform import (
    ShRotation,
    apply_sh_rotation,
    apply_sh_rotation_many,
    build_sh_rotation,
    eval_sh_basis,
    eval_sh_color,
)


def real_sh_reference(degree: int, d: np.ndarray) -> np.ndarray:
    """Independent oracle: real SH from scipy's complex harmonics.

    The library's basis equals sqrt(2) * Re/Im of the Condon-Shortley-phased
    complex harmonics (no extra (-1)^m), m = -degree..degree.
    """
    x, y, z = d
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    out = []
    for m in range(-degree, degree + 1):
        Y = sph_harm_y(degree, abs(m), theta, phi)
        if m == 0:
            out.append(Y.real)
        elif m > 0:
            out.append(np.sqrt(2.0) * Y.real)
        else:
            out.append(np.sqrt(2.0) * Y.imag)
    return np.asarray(out)


def random_direction(rng) -> np.ndarray:
    d = rng.normal(size=3)
    return d / np.linalg.norm(d)


class TestEvalShBasis:
    def test_degree0_constant(self, rng):
        for _ in range(5):
            d = random_direction(rng)
            np.testing.assert_allclose(eval_sh_basis(0, d), [0.28209479177387814])

    def test_degree1_axial(self):
        vals = eval_sh_basis(1, np.array([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(vals, [0.0, 0.4886025119029199, 0.0], atol=1e-15)

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_matches_scipy_oracle(self, degree, rng):
        for _ in range(50):
            d = random_direction(rng)
            np.testing.assert_allclose(eval_sh_basis(degree, d),
                                       real_sh_reference(degree, d), atol=1e-12)

    def test_non_unit_direction_rejected(self):
        with pytest.raises(ValueError, match="unit"):
            eval_sh_basis(1, np.array([0.0, 0.0, 2.0]))

    def test_invalid_degree(self):
        with pytest.raises(ValueError, match="degree"):
            eval_sh_basis(4, np.array([0.0, 0.0, 1.0]))

    def test_batch_matches_single(self, rng):
        dirs = np.stack([random_direction(rng) for _ in range(6)])
        batch = eval_sh_basis(2, dirs)
        for k in range(6):
            np.testing.assert_allclose(batch[k], eval_sh_basis(2, dirs[k]))


class TestBuildShRotation:
    def test_identity_gives_identity_blocks(self):
        rot = build_sh_rotation(np.eye(3))
        for i, block in enumerate(rot.blocks):
            np.testing.assert_allclose(block, np.eye(2 * i + 1), atol=1e-9)

    def test_degree0_block_is_one(self, rng):
        for seed in range(5):
            R = Rotation.random(random_state=seed).as_matrix()
            rot = build_sh_rotation(R)
            np.testing.assert_allclose(rot.blocks[0], [[1.0]])

    def test_blocks_orthogonal(self):
        for seed in range(10):
            R = Rotation.random(random_state=seed).as_matrix()
            rot = build_sh_rotation(R)
            for i, block in enumerate(rot.blocks):
                np.testing.assert_allclose(block.T @ block, np.eye(2 * i + 1), atol=1e-5)

    def test_composition(self):
        for seed in range(5):
            R1 = Rotation.random(random_state=seed).as_matrix()
            R2 = Rotation.random(random_state=seed + 50).as_matrix()
            lhs = build_sh_rotation(R1 @ R2)
            r1, r2 = build_sh_rotation(R1), build_sh_rotation(R2)
            for i in range(4):
                np.testing.assert_allclose(lhs.blocks[i], r1.blocks[i] @ r2.blocks[i],
                                           atol=1e-5)

    def test_z_quarter_turn_degree1(self, rng):
        # the rotated coefficients must reproduce the rotated function
        Rz = Rotation.from_euler("z", 90, degrees=True).as_matrix()
        rot = build_sh_rotation(Rz)
        coeffs = rng.normal(size=3)
        rotated = rot.blocks[1] @ coeffs
        for _ in range(20):
            d = random_direction(rng)
            f = coeffs @ eval_sh_basis(1, d)
            f_rot = rotated @ eval_sh_basis(1, Rz @ d)
            assert abs(f - f_rot) < 1e-9

    def test_bad_rotation_rejected(self):
        with pytest.raises(ValueError):
            build_sh_rotation(np.eye(3) * 2.0)

    def test_block_shape_validation(self):
        with pytest.raises(ValueError):
            ShRotation(blocks=(np.eye(1), np.eye(3), np.eye(5), np.eye(6)))


class TestApplyShRotation:
    def test_identity_rotation_is_noop(self, rng):
        rot = build_sh_rotation(np.eye(3))
        dc, rest = rng.normal(size=3), rng.normal(size=45)
        dc2, rest2 = apply_sh_rotation(rot, dc, rest)
        np.testing.assert_allclose(dc2, dc, atol=1e-9)
        np.testing.assert_allclose(rest2, rest, atol=1e-9)

    def test_zero_rest_stays_zero(self, rng):
        R = Rotation.random(random_state=3).as_matrix()
        rot = build_sh_rotation(R)
        dc = rng.normal(size=3)
        dc2, rest2 = apply_sh_rotation(rot, dc, np.zeros(45))
        np.testing.assert_allclose(dc2, dc)
        np.testing.assert_array_equal(rest2, np.zeros(45))

    def test_degree0_model_passthrough(self, rng):
        rot = build_sh_rotation(Rotation.random(random_state=9).as_matrix())
        dc, rest = apply_sh_rotation(rot, rng.normal(size=3), np.zeros(0))
        assert rest.size == 0

    def test_direction_sampling_oracle(self, rng):
        # f_rotated(R d) == f(d) for the full degree-3 expansion
        for seed in range(5):
            R = Rotation.random(random_state=seed).as_matrix()
            rot = build_sh_rotation(R)
            dc, rest = rng.normal(size=3), rng.normal(size=45) * 0.3
            dc2, rest2 = apply_sh_rotation(rot, dc, rest)
            for _ in range(100):
                d = random_direction(rng)
                f = eval_sh_color(dc, rest, d)
                f_rot = eval_sh_color(dc2, rest2, R @ d)
                np.testing.assert_allclose(f_rot, f, atol=1e-5)

    def test_many_matches_single(self, rng):
        R = Rotation.random(random_state=11).as_matrix()
        rot = build_sh_rotation(R)
        rest = rng.normal(size=(8, 45))
        batch = apply_sh_rotation_many(rot, rest)
        for k in range(8):
            _, single = apply_sh_rotation(rot, np.zeros(3), rest[k])
            np.testing.assert_allclose(batch[k], single, atol=1e-12)


class TestEvalShColor:
    def test_gray_for_zero_coefficients(self, rng):
        d = random_direction(rng)
        np.testing.assert_allclose(eval_sh_color(np.zeros(3), np.zeros(45), d),
                                   [0.5, 0.5, 0.5])

    def test_clamped_to_unit_interval(self, rng):
        dc = np.array([100.0, -100.0, 0.0])
        d = random_direction(rng)
        np.testing.assert_allclose(eval_sh_color(dc, np.zeros(45), d), [1.0, 0.0, 0.5])

    def test_view_dependence_from_degree1(self):
        rest = np.zeros(45)
        rest[1] = 1.0  # z-linear term of the red channel
        up = eval_sh_color(np.zeros(3), rest, np.array([0.0, 0.0, 1.0]))
        down = eval_sh_color(np.zeros(3), rest, np.array([0.0, 0.0, -1.0]))
        assert up[0] > 0.5 > down[0]
        np.testing.assert_allclose(up[1:], [0.5, 0.5])
