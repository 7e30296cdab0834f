"""Formation geometry, spacing/velocity errors and the follower control law.

Indexing convention: UAV 1 is the leader, UAVs 2 and 3 follow. Per axis the
error vector is e = [delta_12, delta_13, z_2, z_3]; the 8-vector used by the
integrator stacks the x-axis block before the y-axis block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stability import ControlGains, SystemMatrices

ERROR_COLUMNS = ("delta12x", "delta13x", "z2x", "z3x", "delta12y", "delta13y", "z2y", "z3y")


@dataclass(frozen=True)
class FormationTargets:
    """Leader-relative target spacings (m) and the swarm target velocity (m/s).

    Follower-to-follower targets are never stored; they follow from the
    leader-relative ones (x_bar_23 = x_bar_13 - x_bar_12, x_bar_32 = -x_bar_23).
    """

    x_bar_12: float = 3.0
    x_bar_13: float = 4.0
    y_bar_12: float = 4.0
    y_bar_13: float = 3.0
    v_bar_x: float = 5.0
    v_bar_y: float = 5.0

    @property
    def x_bar_23(self) -> float:
        return self.x_bar_13 - self.x_bar_12

    @property
    def y_bar_23(self) -> float:
        return self.y_bar_13 - self.y_bar_12

    @property
    def x_bar_32(self) -> float:
        return -self.x_bar_23

    @property
    def y_bar_32(self) -> float:
        return -self.y_bar_23

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.v_bar_x, self.v_bar_y])

    def spacing(self, i: int, j: int) -> np.ndarray:
        """Target (x, y) value of position_i - position_j."""
        lead = {1: np.zeros(2),
                2: -np.array([self.x_bar_12, self.y_bar_12]),
                3: -np.array([self.x_bar_13, self.y_bar_13])}
        return lead[i] - lead[j]

    def follower_distance(self) -> float:
        """Target Euclidean distance between the two followers."""
        return float(np.hypot(self.x_bar_23, self.y_bar_23))


@dataclass(frozen=True, eq=False)
class SwarmState:
    """Positions (3, 2) and velocities (3, 2) of UAVs 1..3 at time t (row 0 is the leader)."""

    positions: np.ndarray
    velocities: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("positions", "velocities"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3, 2):
                raise ValueError(f"{name} must have shape (3, 2), got {arr.shape}")
            object.__setattr__(self, name, arr)

    def leader_on_target(self, targets: FormationTargets, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.velocities[0] - targets.velocity) <= tol))


@dataclass(frozen=True, eq=False)
class ErrorState:
    """Per-axis error vectors [delta_12, delta_13, z_2, z_3]."""

    x: np.ndarray = field(default_factory=lambda: np.zeros(4))
    y: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_vector(cls, v) -> "ErrorState":
        v = np.asarray(v, dtype=float)
        if v.shape != (8,):
            raise ValueError(f"expected an 8-vector, got shape {v.shape}")
        return cls(v[:4].copy(), v[4:].copy())


def compute_errors(state: SwarmState, targets: FormationTargets) -> ErrorState:
    p, v = state.positions, state.velocities
    out = []
    for ax, (x12, x13, vbar) in enumerate(((targets.x_bar_12, targets.x_bar_13, targets.v_bar_x),
                                           (targets.y_bar_12, targets.y_bar_13, targets.v_bar_y))):
        out.append(np.array([
            p[0, ax] - p[1, ax] - x12,
            p[0, ax] - p[2, ax] - x13,
            v[1, ax] - vbar,
            v[2, ax] - vbar,
        ]))
    return ErrorState(out[0], out[1])


def reconstruct_state(errors: ErrorState, targets: FormationTargets,
                      leader_position=(0.0, 0.0), t: float = 0.0) -> SwarmState:
    """Inverse of :func:`compute_errors` given the leader position."""
    lead = np.asarray(leader_position, dtype=float)
    pos = np.empty((3, 2))
    vel = np.empty((3, 2))
    pos[0] = lead
    vel[0] = targets.velocity
    for ax, e, (x12, x13) in ((0, errors.x, (targets.x_bar_12, targets.x_bar_13)),
                              (1, errors.y, (targets.y_bar_12, targets.y_bar_13))):
        pos[1, ax] = lead[ax] - x12 - e[0]
        pos[2, ax] = lead[ax] - x13 - e[1]
        vel[1, ax] = targets.velocity[ax] + e[2]
        vel[2, ax] = targets.velocity[ax] + e[3]
    return SwarmState(pos, vel, t)


def follower_separation(errors_xy, targets: FormationTargets) -> float:
    """Distance between followers 2 and 3 implied by an 8-vector of errors."""
    e = np.asarray(errors_xy, dtype=float)
    dx = targets.x_bar_23 + e[1] - e[0]
    dy = targets.y_bar_23 + e[5] - e[4]
    return float(np.hypot(dx, dy))


def control_acceleration(follower: int, own_velocity, delayed_leader_velocity,
                         delayed_peer_velocity, leader_offset, peer_offset,
                         gains: ControlGains, targets: FormationTargets) -> np.ndarray:
    """Commanded (ax, ay) of a follower.

    ``leader_offset`` and ``peer_offset`` are the radar-sensed displacements
    (p_1 - p_i) and (p_j - p_i); they are current. The two velocity inputs
    arrive over the wireless link and carry its delay.
    """
    if follower not in (2, 3):
        raise ValueError(f"follower must be 2 or 3, got {follower}")
    peer = 5 - follower
    a, b, a_hat, b_hat = gains.follower(follower)
    vi = np.asarray(own_velocity, dtype=float)
    delta_lead = np.asarray(leader_offset, dtype=float) - targets.spacing(1, follower)
    delta_peer = np.asarray(peer_offset, dtype=float) - targets.spacing(peer, follower)
    return (a * delta_lead + b * (np.asarray(delayed_leader_velocity, dtype=float) - vi)
            + a_hat * delta_peer + b_hat * (np.asarray(delayed_peer_velocity, dtype=float) - vi))


def error_dynamics_rhs(e, e_delayed, mats: SystemMatrices) -> np.ndarray:
    """M1 e + M2 e_delayed, applied per axis to 4- or 8-vectors."""
    e = np.asarray(e, dtype=float)
    ed = np.asarray(e_delayed, dtype=float)
    if e.shape != ed.shape or e.shape[-1] % 4:
        raise ValueError("state and delayed state must be matching 4- or 8-vectors")
    blocks = e.reshape(-1, 4)
    dblocks = ed.reshape(-1, 4)
    out = blocks @ mats.m1.T + dblocks @ mats.m2.T
    return out.reshape(e.shape)
