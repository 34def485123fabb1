import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.transform import Rotation

from serpent_prc.exceptions import InvalidDimensionError, JointRangeError, UnrecoverablePoseError
from serpent_prc.kinematics import (
    ArmGeometry,
    cable_velocities,
    coupling_matrix,
    coupling_matrix_inverse,
    forward_kinematics,
    joint_origins,
    joint_to_motor,
    joints_from_markers,
    motor_to_joint,
    pulley_velocities,
)


def homogeneous_chain_markers(q, geometry):
    """Independent oracle: explicit 4x4 transforms built from scipy rotations."""
    T = np.eye(4)
    markers = []
    for k in range(geometry.n_joints):
        rot = np.eye(4)
        rot[:3, :3] = Rotation.from_rotvec(q[k] * geometry.axis_vectors()[k]).as_matrix()
        trans = np.eye(4)
        trans[1, 3] = geometry.link_lengths[k]
        T = T @ rot @ trans
        markers.append((T @ np.append(geometry.marker_offsets[k], 1.0))[:3])
    return np.array(markers)


def random_pose(rng, n=9, limit=np.pi * 0.95):
    return rng.uniform(-limit, limit, n)


class TestCouplingMatrix:
    def test_three(self):
        np.testing.assert_array_equal(coupling_matrix(3), [[1, 0, 0], [1, 1, 0], [1, 1, 1]])

    def test_one(self):
        np.testing.assert_array_equal(coupling_matrix(1), [[1]])

    def test_nine_rows(self):
        A = coupling_matrix(9)
        for i in range(9):
            assert A[i].tolist() == [1] * (i + 1) + [0] * (8 - i)

    def test_zero_rejected(self):
        with pytest.raises(InvalidDimensionError):
            coupling_matrix(0)

    def test_inverse_is_bidiagonal(self):
        A_inv = coupling_matrix_inverse(9)
        assert np.all(np.diag(A_inv) == 1)
        assert np.all(np.diag(A_inv, k=-1) == -1)
        assert np.count_nonzero(A_inv) == 9 + 8

    def test_inverse_exact_in_integers(self):
        A = coupling_matrix(9).astype(int)
        A_inv = coupling_matrix_inverse(9).astype(int)
        np.testing.assert_array_equal(A @ A_inv, np.eye(9, dtype=int))


class TestVelocityMaps:
    def test_unit_first_joint(self):
        np.testing.assert_array_equal(joint_to_motor(np.eye(9)[0]), np.ones(9))

    def test_zero(self):
        np.testing.assert_array_equal(joint_to_motor(np.zeros(9)), np.zeros(9))

    def test_cumulative(self):
        np.testing.assert_array_equal(joint_to_motor(np.arange(1, 10)), [1, 3, 6, 10, 15, 21, 28, 36, 45])

    def test_matches_matrix(self):
        v = np.random.default_rng(0).normal(size=9)
        np.testing.assert_allclose(joint_to_motor(v), coupling_matrix(9) @ v, atol=1e-14)

    def test_inverse_examples(self):
        np.testing.assert_array_equal(motor_to_joint(np.ones(9)), np.eye(9)[0])
        np.testing.assert_array_equal(motor_to_joint([1, 3, 6, 10, 15, 21, 28, 36, 45]), np.arange(1, 10))

    def test_row_wise_on_series(self):
        V = np.random.default_rng(1).normal(size=(5, 9))
        np.testing.assert_allclose(motor_to_joint(joint_to_motor(V)), V, atol=1e-14)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            joint_to_motor([np.nan] + [0.0] * 8)

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, 9, elements=st.floats(-1e3, 1e3)))
    def test_round_trip_property(self, v):
        np.testing.assert_allclose(motor_to_joint(joint_to_motor(v)), v, atol=1e-12 * max(1.0, np.abs(v).max()))


class TestCableRelation:
    def test_two_expressions_agree(self):
        rng = np.random.default_rng(2)
        radii = ArmGeometry().pulley_radii
        for _ in range(50):
            jv = rng.normal(size=9)
            closed, recursive = cable_velocities(jv, radii)
            mask = ~np.isnan(closed)
            assert mask.sum() == 45
            np.testing.assert_allclose(closed[mask], recursive[mask], atol=1e-12)

    def test_terminal_pulley_follows_its_joint(self):
        jv = np.random.default_rng(3).normal(size=9)
        P = pulley_velocities(jv, ArmGeometry().pulley_radii)
        # cable j is anchored on link j: the pulley there turns with joint j
        np.testing.assert_allclose([P[j + 1, j] for j in range(9)], jv, atol=1e-12)


class TestGeometry:
    def test_defaults(self):
        g = ArmGeometry()
        assert g.arm_length == pytest.approx(545.0, abs=1e-12)
        assert g.joint_axes == ("z", "x", "z", "x", "z", "x", "z", "x", "z")
        np.testing.assert_array_equal(g.pulley_radii, [20, 18, 16, 14, 12, 10, 8, 6, 4])
        assert np.all(np.diff(g.pulley_radii) == -2)

    def test_consecutive_axes_perpendicular(self):
        a = ArmGeometry().axis_vectors()
        assert np.all(np.abs(np.sum(a[:-1] * a[1:], axis=1)) == 0)

    def test_parallel_axes_rejected(self):
        with pytest.raises(ValueError):
            ArmGeometry(joint_axes=["z"] * 9)

    def test_json_round_trip(self):
        g = ArmGeometry(link_lengths=np.linspace(50, 70, 9))
        g2 = ArmGeometry.from_json(g.to_json())
        np.testing.assert_array_equal(g2.link_lengths, g.link_lengths)
        assert g2.joint_axes == g.joint_axes
        assert json.loads(g.to_json())["units"] == "mm"


class TestForwardKinematics:
    def test_zero_pose_collinear(self):
        g = ArmGeometry(marker_offsets=np.zeros((9, 3)))
        m = forward_kinematics(np.zeros(9), g)
        expected = np.zeros((9, 3))
        expected[:, 1] = np.arange(1, 10) * 545.0 / 9
        np.testing.assert_allclose(m, expected, atol=1e-9)
        assert joint_origins(np.zeros(9), g)[-1][1] == pytest.approx(545.0, abs=1e-9)

    def test_first_joint_quarter_turn(self):
        g = ArmGeometry()
        q = np.zeros(9)
        q[0] = np.pi / 2
        Rz = Rotation.from_euler("z", 90, degrees=True).as_matrix()
        np.testing.assert_allclose(forward_kinematics(q, g), forward_kinematics(np.zeros(9), g) @ Rz.T, atol=1e-9)

    def test_matches_homogeneous_oracle(self):
        rng = np.random.default_rng(4)
        g = ArmGeometry(link_lengths=rng.uniform(40, 80, 9), marker_offsets=rng.normal(0, 10, (9, 3)))
        for _ in range(100):
            q = random_pose(rng)
            np.testing.assert_allclose(forward_kinematics(q, g), homogeneous_chain_markers(q, g), atol=1e-9)

    def test_batched_equals_looped(self):
        rng = np.random.default_rng(5)
        Q = rng.uniform(-1, 1, (7, 9))
        batched = forward_kinematics(Q)
        for q, m in zip(Q, batched):
            np.testing.assert_allclose(forward_kinematics(q), m, atol=1e-12)

    def test_link_isometry(self):
        rng = np.random.default_rng(6)
        g = ArmGeometry(link_lengths=rng.uniform(40, 80, 9))
        for _ in range(100):
            o = joint_origins(random_pose(rng), g)
            np.testing.assert_allclose(np.linalg.norm(np.diff(o, axis=0), axis=1), g.link_lengths, atol=1e-9)

    def test_out_of_range(self):
        q = np.zeros(9)
        q[3] = 3.5
        with pytest.raises(JointRangeError):
            forward_kinematics(q)


class TestJointsFromMarkers:
    def test_zero_pose(self):
        np.testing.assert_allclose(joints_from_markers(forward_kinematics(np.zeros(9))), np.zeros(9), atol=1e-12)

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        g = ArmGeometry()
        for _ in range(200):
            q = random_pose(rng)
            np.testing.assert_allclose(joints_from_markers(forward_kinematics(q, g), g), q, atol=1e-6)

    def test_flat_marker_vector_accepted(self):
        q = np.linspace(-0.3, 0.3, 9)
        np.testing.assert_allclose(joints_from_markers(forward_kinematics(q).ravel()), q, atol=1e-9)

    def test_coincident_markers(self):
        with pytest.raises(UnrecoverablePoseError):
            joints_from_markers(np.zeros((9, 3)))

    def test_fk_reproduces_markers(self):
        rng = np.random.default_rng(8)
        m = forward_kinematics(random_pose(rng))
        np.testing.assert_allclose(forward_kinematics(joints_from_markers(m)), m, atol=1e-9)
