"""Simulated serpentine arm standing in for the hardware.

The true joint angles follow the motor-implied angles through three
flexibility effects:

* cable slack, modelled as a per-joint play (backlash) operator;
* cable elongation, a deflection proportional to the gravity torque at each
  joint;
* link deformation, an Ornstein-Uhlenbeck process per joint.

Gravity acts along base ``+X``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dataset import SessionLog
from .exceptions import NonFiniteInputError
from .kinematics import ArmGeometry, forward_kinematics, joint_to_motor, link_frames, motor_to_joint

GRAVITY = 9.81  # m/s^2; mass in g -> force in mN, so torques below are in N*mm after the 1e-3 factor
GRAVITY_AXIS = np.array([1.0, 0.0, 0.0])

# Target envelopes in degrees: odd joints swing both ways, even joints only one.
ODD_TARGET_RANGE_DEG = (-22.5, 22.5)
EVEN_TARGET_RANGE_DEG = (0.0, 22.5)

# Chosen by tools/tune_compliance.py on the default test session. Cable stretch
# per unit joint torque grows with 1 / r^2, so distal joints are softer.
DEFAULT_BACKLASH = 0.12  # rad
DEFAULT_COMPLIANCE_SCALE = 4.0e-5  # rad per N*mm at the 20 mm pulley


def default_compliance(pulley_radii=None, scale: float = DEFAULT_COMPLIANCE_SCALE) -> np.ndarray:
    r = 20.0 - 2.0 * np.arange(9) if pulley_radii is None else np.asarray(pulley_radii, dtype=float)
    return scale * (r[0] / r) ** 2


def _per_joint(value, n: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    return np.broadcast_to(arr, (n,)).copy() if arr.ndim == 0 else arr


@dataclass
class PlantConfig:
    geometry: ArmGeometry = field(default_factory=ArmGeometry)
    backlash_width: float | np.ndarray = DEFAULT_BACKLASH  # rad
    compliance: float | np.ndarray | None = None  # rad per N*mm; None -> default_compliance()
    deformation_sigma: float = 0.002  # rad, stationary std of the OU state
    deformation_tau: float = 2.0  # s
    load_noise_sigma: float = 0.2
    link_masses: np.ndarray = field(default_factory=lambda: np.full(9, 30.0))  # g
    quantization_step: float = np.deg2rad(0.088)  # rad per sensor tick
    dt: float = 0.25  # s, 4 Hz control
    p_gain: float = 1.0  # 1/s
    max_motor_speed: float = 6.0  # rad/s

    def __post_init__(self):
        n = self.geometry.n_joints
        if self.compliance is None:
            self.compliance = default_compliance(self.geometry.pulley_radii)
        self.backlash_width = _per_joint(self.backlash_width, n)
        self.compliance = _per_joint(self.compliance, n)
        self.link_masses = _per_joint(self.link_masses, n)
        scalars = (self.deformation_sigma, self.deformation_tau, self.load_noise_sigma,
                   self.quantization_step, self.p_gain, self.max_motor_speed)
        arrays = (self.backlash_width, self.compliance, self.link_masses)
        if any(v < 0 for v in scalars) or any(np.any(a < 0) for a in arrays):
            raise ValueError("physical parameters must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if any(a.shape != (n,) for a in arrays):
            raise ValueError(f"per-joint parameters must have {n} entries")

    @property
    def n_joints(self) -> int:
        return self.geometry.n_joints

    @property
    def total_mass(self) -> float:
        return float(self.link_masses.sum())

    @classmethod
    def ideal(cls, **overrides) -> "PlantConfig":
        """All flexibility effects, sensor noise and quantization switched off."""
        base = dict(backlash_width=0.0, compliance=0.0, deformation_sigma=0.0,
                    load_noise_sigma=0.0, quantization_step=0.0)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "geometry"}
        d = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}
        d["geometry"] = self.geometry.to_dict()
        d["gravity_axis"] = "+x"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlantConfig":
        d = dict(d)
        d.pop("gravity_axis", None)
        geometry = ArmGeometry.from_dict(d.pop("geometry")) if "geometry" in d else ArmGeometry()
        return cls(geometry=geometry, **d)

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class PlantState:
    motor_angles: np.ndarray
    joint_angles: np.ndarray  # true joint angles
    hysteresis_centers: np.ndarray  # play-operator memory
    deformation: np.ndarray  # OU state
    time: float = 0.0

    def copy(self) -> "PlantState":
        return PlantState(self.motor_angles.copy(), self.joint_angles.copy(),
                          self.hysteresis_centers.copy(), self.deformation.copy(), self.time)


@dataclass
class SensorSample:
    motor_angles: np.ndarray
    motor_loads: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.motor_angles, self.motor_loads])


def play_operator(command, center, width):
    """Backlash: the output only moves once the input leaves the dead zone.

    ``center`` is the previous output; the dead zone is ``center +/- width / 2``.
    Vectorized over joints.
    """
    command = np.asarray(command, dtype=float)
    half = np.asarray(width, dtype=float) / 2.0
    return np.clip(center, command - half, command + half)


def gravity_torques(q, cfg: PlantConfig) -> np.ndarray:
    """Gravity torque about each hinge, N*mm, from the links distal to it.

    Each link's mass sits at its midpoint. The sign follows the right-hand rule
    about the hinge axis, so a positive torque pushes the joint angle up.
    """
    g = cfg.geometry
    R, o = link_frames(q, g)
    com = 0.5 * (o[:-1] + o[1:])
    force = (cfg.link_masses * 1e-3 * GRAVITY)[:, None] * GRAVITY_AXIS  # N
    axes = np.einsum("kij,kj->ki", R, g.axis_vectors())
    tau = np.empty(g.n_joints)
    for i in range(g.n_joints):
        lever = com[i:] - o[i]
        tau[i] = axes[i] @ np.cross(lever, force[i:]).sum(axis=0)
    return tau


def load_model(state: PlantState, cfg: PlantConfig, rng: np.random.Generator) -> np.ndarray:
    """Dimensionless motor load proxy.

    Motor ``j``'s cable crosses every joint it drives, so it sees the summed
    gravity torque of joints ``j..n`` over its pulley radius.
    """
    tau = gravity_torques(state.joint_angles, cfg)
    distal_sum = np.cumsum(tau[::-1])[::-1]
    clean = np.abs(distal_sum) / cfg.geometry.pulley_radii
    return clean + cfg.load_noise_sigma * rng.standard_normal(cfg.n_joints)


def quantize(angles: np.ndarray, step: float) -> np.ndarray:
    if step <= 0:
        return np.array(angles, dtype=float)
    return np.round(np.asarray(angles) / step) * step


def observe(state: PlantState, cfg: PlantConfig, rng: np.random.Generator) -> tuple[SensorSample, np.ndarray]:
    """Sensor sample and true marker positions for the current state."""
    sample = SensorSample(quantize(state.motor_angles, cfg.quantization_step), load_model(state, cfg, rng))
    markers = forward_kinematics(state.joint_angles, cfg.geometry)
    return sample, markers


def _advance_ou(x: np.ndarray, cfg: PlantConfig, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(x.shape)
    if cfg.deformation_tau <= 0:
        return cfg.deformation_sigma * noise
    decay = np.exp(-cfg.dt / cfg.deformation_tau)
    return decay * x + cfg.deformation_sigma * np.sqrt(1.0 - decay**2) * noise


def _true_joints(centers: np.ndarray, deformation: np.ndarray, cfg: PlantConfig) -> np.ndarray:
    base = np.clip(centers, -np.pi, np.pi)
    deflection = cfg.compliance * gravity_torques(base, cfg) if np.any(cfg.compliance) else 0.0
    return np.clip(base + deflection + deformation, -np.pi, np.pi)


def initial_state(cfg: PlantConfig) -> PlantState:
    n = cfg.n_joints
    zeros = np.zeros(n)
    return PlantState(zeros.copy(), _true_joints(zeros, zeros, cfg), zeros.copy(), zeros.copy(), 0.0)


def step(state: PlantState, cmd, cfg: PlantConfig, rng: np.random.Generator):
    """Advance one control period under motor velocity command ``cmd``.

    Returns the new state with its sensor sample and true markers.
    """
    cmd = np.asarray(cmd, dtype=float)
    if cmd.shape != (cfg.n_joints,):
        raise ValueError(f"command must have {cfg.n_joints} entries")
    if not np.all(np.isfinite(cmd)):
        raise NonFiniteInputError("motor command contains non-finite entries")
    motors = state.motor_angles + cmd * cfg.dt
    commanded = motor_to_joint(motors)
    centers = play_operator(commanded, state.hysteresis_centers, cfg.backlash_width)
    deformation = _advance_ou(state.deformation, cfg, rng)
    joints = _true_joints(centers, deformation, cfg)
    new_state = PlantState(motors, joints, centers, deformation, state.time + cfg.dt)
    sample, markers = observe(new_state, cfg, rng)
    return new_state, sample, markers


def p_controller(current_joints, target_joints, cfg: PlantConfig) -> np.ndarray:
    """Motor velocity command driving the joints toward their targets."""
    error = np.asarray(target_joints, dtype=float) - np.asarray(current_joints, dtype=float)
    motor = joint_to_motor(cfg.p_gain * error)
    return np.clip(motor, -cfg.max_motor_speed, cfg.max_motor_speed)


def sample_targets(rng: np.random.Generator, n: int = 9) -> np.ndarray:
    lo = np.where(np.arange(n) % 2 == 0, ODD_TARGET_RANGE_DEG[0], EVEN_TARGET_RANGE_DEG[0])
    hi = np.where(np.arange(n) % 2 == 0, ODD_TARGET_RANGE_DEG[1], EVEN_TARGET_RANGE_DEG[1])
    return np.deg2rad(rng.uniform(lo, hi))


def run_session(cfg: PlantConfig, session_seed: int, steps: int = 2100, target_refresh: int = 5,
                session_index: int = -1) -> SessionLog:
    """Random-motion data collection with fresh joint targets every few steps.

    The controller only sees joint angles implied by the (quantized) motor
    angles; the arm has no joint encoders.
    """
    if steps < target_refresh or target_refresh < 1:
        raise ValueError("need steps >= target_refresh >= 1")
    target_rng, plant_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(session_seed).spawn(2))
    n = cfg.n_joints
    state = initial_state(cfg)
    sample, markers = observe(state, cfg, plant_rng)
    sensors = np.empty((steps, 2 * n))
    commands = np.empty((steps, n))
    marker_log = np.empty((steps, 3 * n))
    targets = np.zeros(n)
    for t in range(steps):
        if t % target_refresh == 0:
            targets = sample_targets(target_rng, n)
        cmd = p_controller(motor_to_joint(sample.motor_angles), targets, cfg)
        sensors[t] = sample.as_vector()
        commands[t] = cmd
        marker_log[t] = markers.ravel()
        state, sample, markers = step(state, cmd, cfg, plant_rng)
    manifest = {
        "seed": int(session_seed),
        "session_index": int(session_index),
        "plant_config_hash": cfg.digest(),
        "steps": steps,
        "target_refresh": target_refresh,
        "dt": cfg.dt,
    }
    return SessionLog(sensors, commands, marker_log, manifest)


def replace_config(cfg: PlantConfig, **changes) -> PlantConfig:
    return replace(cfg, **changes)
