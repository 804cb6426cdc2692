"""Geometry, pose conversions, and rigid-transform algebra."""

import json
import math

import numpy as np
import numpy.testing as nptest
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strenc.errors import GimbalLock
from strenc.geometry import (PlatformGeometry, Pose, RigidTransform, Workspace,
                             geometry_from_dict, geometry_to_dict, load_geometry,
                             matrix_to_pose, pose_to_matrix, transform_point)

from conftest import BASE_POINTS, HELMET_POINTS, euler_zyx_matrix


class TestDefaultGeometry:
    def test_matches_embedded_coordinates_field_by_field(self, geom):
        for i in range(6):
            nptest.assert_allclose(geom.base_points[i], BASE_POINTS[i], atol=0)
            nptest.assert_allclose(geom.helmet_points[i], HELMET_POINTS[i], atol=0)

    def test_mirror_symmetry_about_xz_plane(self, geom):
        # legs (1,6), (2,5), (3,4) differ only by the sign of Y
        flip = np.array([1.0, -1.0, 1.0])
        for a, b in ((0, 5), (1, 4), (2, 3)):
            nptest.assert_allclose(geom.base_points[a],
                                   geom.base_points[b] * flip, atol=1e-9)
            nptest.assert_allclose(geom.helmet_points[a],
                                   geom.helmet_points[b] * flip, atol=1e-9)

    def test_attachment_planes(self, geom):
        nptest.assert_allclose(geom.base_points[:, 2], 73.67, atol=1e-12)
        nptest.assert_allclose(geom.helmet_points[:, 2], 42.06, atol=1e-12)

    def test_default_workspace(self, geom):
        assert geom.workspace == Workspace(translation_mm=10.0, rotation_deg=10.0)

    def test_requires_six_points(self):
        with pytest.raises(ValueError):
            PlatformGeometry(base_points=np.zeros((5, 3)),
                             helmet_points=np.zeros((6, 3)))


class TestPoseToMatrix:
    def test_identity(self):
        t = pose_to_matrix(Pose())
        nptest.assert_allclose(t.rotation, np.eye(3), atol=1e-15)
        nptest.assert_allclose(t.translation, 0.0, atol=0)

    def test_quarter_turn_roll_maps_x_to_y(self):
        t = pose_to_matrix(Pose(roll=90.0))
        nptest.assert_allclose(t.rotation @ [1, 0, 0], [0, 1, 0], atol=1e-12)
        nptest.assert_allclose(t.translation, 0.0, atol=0)

    def test_against_axis_product_oracle(self):
        t = pose_to_matrix(Pose(1, 2, 3, 10, 20, 30))
        nptest.assert_allclose(t.rotation, euler_zyx_matrix(10, 20, 30), atol=1e-14)
        nptest.assert_allclose(t.translation, [1, 2, 3], atol=0)

    @given(st.tuples(*(st.floats(-180, 180) for _ in range(3))))
    @settings(max_examples=100, deadline=None)
    def test_rotation_is_orthonormal_with_unit_determinant(self, angles):
        r = pose_to_matrix(Pose(0, 0, 0, *angles)).rotation
        nptest.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(r) - 1.0) < 1e-12


class TestMatrixToPose:
    def test_identity(self):
        pose = matrix_to_pose(RigidTransform.identity())
        nptest.assert_allclose(pose.as_vector(), 0.0, atol=0)

    @given(st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50),
                     st.floats(-179, 179), st.floats(-80, 80),
                     st.floats(-179, 179)))
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_away_from_gimbal_lock(self, vec):
        pose = Pose(*vec)
        recovered = matrix_to_pose(pose_to_matrix(pose))
        t1 = pose_to_matrix(recovered)
        t2 = pose_to_matrix(pose)
        nptest.assert_allclose(t1.rotation, t2.rotation, atol=1e-9)
        nptest.assert_allclose(t1.translation, t2.translation, atol=1e-9)
        assert -90.0 <= recovered.pitch <= 90.0

    def test_gimbal_lock_raises(self):
        with pytest.raises(GimbalLock):
            matrix_to_pose(pose_to_matrix(Pose(pitch=90.0)))
        with pytest.raises(GimbalLock):
            matrix_to_pose(pose_to_matrix(Pose(pitch=-90.0)))

    def test_non_orthonormal_rejected(self):
        with pytest.raises(ValueError):
            matrix_to_pose(RigidTransform(rotation=np.eye(3) * 1.5))


class TestTransformPoint:
    def test_identity(self):
        nptest.assert_allclose(
            transform_point(RigidTransform.identity(), [1, 2, 3]), [1, 2, 3])

    def test_pure_translation(self):
        t = pose_to_matrix(Pose(x=10.0))
        nptest.assert_allclose(transform_point(t, [0, 0, 0]), [10, 0, 0])

    def test_quarter_turn_permutes_axes(self):
        t = pose_to_matrix(Pose(roll=90.0))
        nptest.assert_allclose(transform_point(t, [1, 0, 0]), [0, 1, 0],
                               atol=1e-12)

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_preserves_pairwise_distances(self, seed):
        rng = np.random.default_rng(seed)
        pose = Pose(*rng.uniform(-20, 20, 3), *rng.uniform(-60, 60, 3))
        t = pose_to_matrix(pose)
        pts = rng.uniform(-100, 100, (4, 3))
        moved = [transform_point(t, p) for p in pts]
        for i in range(4):
            for j in range(i + 1, 4):
                d0 = np.linalg.norm(pts[i] - pts[j])
                d1 = np.linalg.norm(moved[i] - moved[j])
                assert abs(d0 - d1) < 1e-9


class TestRigidTransformAlgebra:
    def test_compose_matches_matrix_product(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            p = Pose(*rng.uniform(-20, 20, 3), *rng.uniform(-80, 80, 3))
            q = Pose(*rng.uniform(-20, 20, 3), *rng.uniform(-80, 80, 3))
            m = (pose_to_matrix(p) @ pose_to_matrix(q)).to_matrix4()
            oracle = pose_to_matrix(p).to_matrix4() @ pose_to_matrix(q).to_matrix4()
            nptest.assert_allclose(m, oracle, atol=1e-9)

    def test_composition_associative(self):
        rng = np.random.default_rng(4)
        ts = [pose_to_matrix(Pose(*rng.uniform(-10, 10, 3),
                                  *rng.uniform(-45, 45, 3))) for _ in range(3)]
        left = ((ts[0] @ ts[1]) @ ts[2]).to_matrix4()
        right = (ts[0] @ (ts[1] @ ts[2])).to_matrix4()
        nptest.assert_allclose(left, right, atol=1e-12)

    def test_inverse_composes_to_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            t = pose_to_matrix(Pose(*rng.uniform(-20, 20, 3),
                                    *rng.uniform(-80, 80, 3)))
            nptest.assert_allclose((t @ t.inverse()).to_matrix4(), np.eye(4),
                                   atol=1e-12)
            nptest.assert_allclose((t.inverse() @ t).to_matrix4(), np.eye(4),
                                   atol=1e-12)

    def test_matrix4_roundtrip(self):
        t = pose_to_matrix(Pose(1, -2, 3, 15, -25, 35))
        back = RigidTransform.from_matrix4(t.to_matrix4())
        nptest.assert_allclose(back.rotation, t.rotation, atol=0)
        nptest.assert_allclose(back.translation, t.translation, atol=0)


class TestGeometryIO:
    def test_json_roundtrip(self, geom, tmp_path):
        path = tmp_path / "geom.json"
        path.write_text(json.dumps(geometry_to_dict(geom)))
        loaded = load_geometry(path)
        nptest.assert_allclose(loaded.base_points, geom.base_points, atol=0)
        nptest.assert_allclose(loaded.helmet_points, geom.helmet_points, atol=0)
        assert loaded.workspace == geom.workspace

    def test_missing_key_rejected(self):
        with pytest.raises(KeyError):
            geometry_from_dict({"base_points": [[0, 0, 0]] * 6})

    def test_wrong_point_count_rejected(self):
        doc = {"base_points": [[0, 0, 0]] * 6, "helmet_points": [[0, 0, 0]] * 7}
        with pytest.raises(ValueError):
            geometry_from_dict(doc)
