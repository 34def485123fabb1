"""Coupled cable kinematics and forward kinematics of the serpentine arm.

Conventions
-----------
* The arm's zero pose extends along base ``+Y``.
* Odd joints (1, 3, ...) rotate about their local ``Z`` axis, even joints about
  local ``X``; consecutive hinges are therefore perpendicular.
* Link ``k`` starts at joint ``k`` and ends at joint ``k + 1``; its marker sits at
  the distal end plus an offset expressed in the link frame.
* Lengths in mm, angles in rad.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import (
    InvalidDimensionError,
    JointRangeError,
    NonFiniteInputError,
    UnrecoverablePoseError,
)

N_JOINTS = 9
ARM_LENGTH_MM = 545.0
_AXIS_VECTORS = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}
_RANGE_TOL = 1e-12


def coupling_matrix(n: int = N_JOINTS) -> np.ndarray:
    """Lower-triangular ones matrix mapping joint velocities to motor velocities."""
    if int(n) != n or n < 1:
        raise InvalidDimensionError(f"coupling matrix needs n >= 1, got {n}")
    return np.tril(np.ones((int(n), int(n))))


def coupling_matrix_inverse(n: int = N_JOINTS) -> np.ndarray:
    """Exact inverse of :func:`coupling_matrix`: ones on the diagonal, -1 below it."""
    if int(n) != n or n < 1:
        raise InvalidDimensionError(f"coupling matrix needs n >= 1, got {n}")
    n = int(n)
    return np.eye(n) - np.eye(n, k=-1)


def _finite_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        raise InvalidDimensionError(f"{name} must be at least 1-D")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError(f"{name} contains non-finite entries")
    return arr


def joint_to_motor(joint_velocities) -> np.ndarray:
    """Motor velocities from joint velocities.

    Motor ``j`` must turn by the sum of the velocities of joints ``1..j`` because
    its cable passes through all of them. Works on the last axis, so a ``(T, 9)``
    array of joint increments maps row-wise.
    """
    jv = _finite_vector(joint_velocities, "joint velocities")
    return np.cumsum(jv, axis=-1)


def motor_to_joint(motor_velocities) -> np.ndarray:
    """Inverse of :func:`joint_to_motor`: consecutive differences, motor 0 at rest."""
    mv = _finite_vector(motor_velocities, "motor velocities")
    return np.diff(mv, axis=-1, prepend=0.0)


def pulley_velocities(joint_velocities, pulley_radii: Sequence[float]) -> np.ndarray:
    """Rotational velocity of every routed pulley given joint velocities.

    Returns ``P`` with ``P[i, j]`` the velocity of the pulley at the end of link
    ``i`` driven by motor ``j + 1`` (row 0 is the motor pulley itself). Only
    entries with ``i <= j + 1`` are meaningful; the rest are NaN. Uses the
    recursion ``r_i P[i] = r_{i-1} (P[i-1] - w_{i-1})`` where ``w_0 = 0`` is the
    base and ``w_k`` the velocity of joint ``k``.
    """
    jv = _finite_vector(joint_velocities, "joint velocities")
    radii = np.asarray(pulley_radii, dtype=float)
    n = jv.shape[0]
    if radii.shape != (n,):
        raise InvalidDimensionError("need one pulley radius per motor")
    motors = joint_to_motor(jv)
    link_vel = np.concatenate([[0.0], jv])
    P = np.full((n + 1, n), np.nan)
    P[0] = motors
    for j in range(n):
        # equal-radius routing: r_{i,j} = r_{0,j} for every pulley on cable j
        ratio = radii[j] / radii[j]
        for i in range(1, j + 2):
            P[i, j] = ratio * (P[i - 1, j] - link_vel[i - 1])
    return P


def cable_velocities(joint_velocities, pulley_radii: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Cable velocity at each routed pulley computed two ways.

    The first array uses ``r_{i,j} * dtheta_{i,j}`` with the closed-form pulley
    velocity ``m_j - sum_{k<i} w_k``; the second uses
    ``r_{i-1,j} * (dtheta_{i-1,j} - w_{i-1})`` with the recursive velocities of
    :func:`pulley_velocities`. Both are ``(n, n)`` with NaN outside the routing.
    """
    jv = _finite_vector(joint_velocities, "joint velocities")
    radii = np.asarray(pulley_radii, dtype=float)
    n = jv.shape[0]
    motors = joint_to_motor(jv)
    link_vel = np.concatenate([[0.0], jv])
    proximal_sum = np.cumsum(link_vel)  # sum_{k < i} w_k, indexed by i
    P = pulley_velocities(jv, radii)
    closed = np.full((n, n), np.nan)
    recursive = np.full((n, n), np.nan)
    for j in range(n):
        for i in range(1, j + 2):
            closed[i - 1, j] = radii[j] * (motors[j] - proximal_sum[i - 1])
            recursive[i - 1, j] = radii[j] * (P[i - 1, j] - link_vel[i - 1])
    return closed, recursive


@dataclass
class ArmGeometry:
    """Link lengths, hinge axes, marker offsets and pulley radii of the arm."""

    link_lengths: np.ndarray = field(
        default_factory=lambda: np.full(N_JOINTS, ARM_LENGTH_MM / N_JOINTS)
    )
    joint_axes: tuple[str, ...] = tuple("z" if k % 2 == 0 else "x" for k in range(N_JOINTS))
    marker_offsets: np.ndarray = field(
        default_factory=lambda: np.tile([0.0, 0.0, 10.0], (N_JOINTS, 1))
    )
    pulley_radii: np.ndarray = field(
        default_factory=lambda: 20.0 - 2.0 * np.arange(N_JOINTS)
    )

    def __post_init__(self):
        self.link_lengths = np.asarray(self.link_lengths, dtype=float)
        self.marker_offsets = np.asarray(self.marker_offsets, dtype=float)
        self.pulley_radii = np.asarray(self.pulley_radii, dtype=float)
        self.joint_axes = tuple(str(a).lower() for a in self.joint_axes)
        n = self.n_joints
        if n < 1:
            raise InvalidDimensionError("geometry needs at least one link")
        if len(self.joint_axes) != n or self.marker_offsets.shape != (n, 3):
            raise InvalidDimensionError("axes and marker offsets must match link count")
        if self.pulley_radii.shape != (n,):
            raise InvalidDimensionError("need one pulley radius per joint")
        if np.any(self.link_lengths < 0):
            raise ValueError("link lengths must be non-negative")
        if any(a not in ("x", "z") for a in self.joint_axes):
            raise ValueError(f"hinge axes must be 'x' or 'z', got {self.joint_axes}")
        for a, b in zip(self.joint_axes, self.joint_axes[1:]):
            if a == b:
                raise ValueError("consecutive joint axes must be perpendicular to each other and to the link")

    @property
    def n_joints(self) -> int:
        return int(self.link_lengths.shape[0])

    @property
    def arm_length(self) -> float:
        return float(self.link_lengths.sum())

    def axis_vectors(self) -> np.ndarray:
        return np.stack([_AXIS_VECTORS[a] for a in self.joint_axes])

    def to_dict(self) -> dict:
        return {
            "units": "mm",
            "link_lengths": self.link_lengths.tolist(),
            "joint_axes": list(self.joint_axes),
            "marker_offsets": self.marker_offsets.tolist(),
            "pulley_radii": self.pulley_radii.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArmGeometry":
        kwargs = {k: d[k] for k in ("link_lengths", "joint_axes", "marker_offsets", "pulley_radii") if k in d}
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ArmGeometry":
        return cls.from_dict(json.loads(text))


def axis_rotation(axis: str, angle) -> np.ndarray:
    """Rotation matrices about a principal axis; broadcasts over ``angle``."""
    a = np.asarray(angle, dtype=float)
    c, s = np.cos(a), np.sin(a)
    one, zero = np.ones_like(a), np.zeros_like(a)
    if axis == "x":
        rows = [[one, zero, zero], [zero, c, -s], [zero, s, c]]
    elif axis == "y":
        rows = [[c, zero, s], [zero, one, zero], [-s, zero, c]]
    elif axis == "z":
        rows = [[c, -s, zero], [s, c, zero], [zero, zero, one]]
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return np.moveaxis(np.array(rows), (0, 1), (-2, -1))


def check_joint_range(q: np.ndarray) -> None:
    if not np.all(np.isfinite(q)):
        raise NonFiniteInputError("joint angles contain non-finite entries")
    if np.any(np.abs(q) > np.pi + _RANGE_TOL):
        raise JointRangeError("joint angles must lie within [-pi, pi]")


def link_frames(q, geometry: ArmGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Orientation and origin of every joint frame.

    Returns ``(R, o)`` with ``R[..., k]`` the orientation of link ``k + 1`` and
    ``o[..., k]`` the position of joint ``k + 1`` for ``k = 0..n``; ``o[..., n]``
    is the tip. ``R`` has one fewer entry than ``o``.
    """
    q = np.asarray(q, dtype=float)
    n = geometry.n_joints
    if q.shape[-1] != n:
        raise InvalidDimensionError(f"expected {n} joint angles, got {q.shape[-1]}")
    check_joint_range(q)
    batch = q.shape[:-1]
    R = np.empty(batch + (n, 3, 3))
    o = np.zeros(batch + (n + 1, 3))
    current = np.broadcast_to(np.eye(3), batch + (3, 3))
    for k in range(n):
        current = current @ axis_rotation(geometry.joint_axes[k], q[..., k])
        R[..., k, :, :] = current
        o[..., k + 1, :] = o[..., k, :] + current[..., :, 1] * geometry.link_lengths[k]
    return R, o


def forward_kinematics(q, geometry: ArmGeometry | None = None) -> np.ndarray:
    """Marker positions ``(..., n, 3)`` in the base frame for joint angles ``q``."""
    geometry = geometry or ArmGeometry()
    R, o = link_frames(q, geometry)
    offsets = np.einsum("...kij,kj->...ki", R, geometry.marker_offsets)
    return o[..., 1:, :] + offsets


def joint_origins(q, geometry: ArmGeometry | None = None) -> np.ndarray:
    geometry = geometry or ArmGeometry()
    return link_frames(q, geometry)[1]


def joints_from_markers(markers, geometry: ArmGeometry | None = None, eps: float = 1e-9) -> np.ndarray:
    """Recover hinge angles from one marker per link.

    Walks the chain from the base: with the frame of link ``k - 1`` known, the
    marker of link ``k`` relative to joint ``k`` is projected onto the plane
    normal to hinge ``k`` and compared with the projected zero-angle position.
    """
    geometry = geometry or ArmGeometry()
    m = np.asarray(markers, dtype=float)
    n = geometry.n_joints
    if m.shape == (3 * n,):
        m = m.reshape(n, 3)
    if m.shape != (n, 3):
        raise InvalidDimensionError(f"expected {n} markers of 3 coordinates, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteInputError("marker positions contain non-finite entries")
    axes = geometry.axis_vectors()
    q = np.zeros(n)
    R = np.eye(3)
    origin = np.zeros(3)
    for k in range(n):
        a = axes[k]
        local_zero = geometry.link_lengths[k] * np.array([0.0, 1.0, 0.0]) + geometry.marker_offsets[k]
        d = R.T @ (m[k] - origin)
        v_p = local_zero - a * (a @ local_zero)
        d_p = d - a * (a @ d)
        if np.linalg.norm(v_p) < eps or np.linalg.norm(d_p) < eps:
            raise UnrecoverablePoseError(f"link {k + 1} has a degenerate projected segment")
        q[k] = np.arctan2(a @ np.cross(v_p, d_p), v_p @ d_p)
        R = R @ axis_rotation(geometry.joint_axes[k], q[k])
        origin = origin + R[:, 1] * geometry.link_lengths[k]
    return q
