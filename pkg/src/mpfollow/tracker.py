"""Multi-person tracking from width-based box measurements.

Pipeline per frame: drop mutually-overlapping boxes, convert the survivors
to 2-vector measurements, predict all tracks with a constant-velocity
model, solve a global nearest neighbor assignment on the measurement-space
distance, then run Kalman updates and track lifecycle bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import (
    BoundingBox,
    CameraIntrinsics,
    Extrinsics,
    InvalidDetectionError,
    build_observation_model,
    iou,
    process_measurement,
)


@dataclass
class TrackerConfig:
    delta_iou: float = 0.5          # mutual-overlap rejection threshold
    process_noise_std: tuple = (0.02, 0.05)  # (position m, velocity m/s)
    measurement_noise_std: float = 0.1       # meters
    gate_distance: float = 1.0               # meters, Euclidean gate
    max_missed: int = 30                     # frames before track deletion
    r_body: float = 0.25                     # assumed body width, meters
    min_hits: int = 2                        # matches before a track is confirmed
    init_position_std: float = 0.5
    init_velocity_std: float = 1.0
    default_dt: float = 1.0 / 30.0

    def __post_init__(self):
        if not 0.0 <= self.delta_iou <= 1.0:
            raise ValueError("delta_iou must be in [0, 1]")
        if min(self.process_noise_std) <= 0 or self.measurement_noise_std <= 0:
            raise ValueError("noise stds must be positive")


@dataclass
class TrackState:
    """Kalman state of one person: planar position and velocity, world frame."""

    id: int
    s: np.ndarray                 # [x, y, xdot, ydot]
    P: np.ndarray                 # 4x4 covariance
    age: int = 0
    missed: int = 0
    hits: int = 0
    last_box: BoundingBox | None = None
    valid: bool = True

    @property
    def position(self):
        return self.s[:2].copy()

    def confirmed(self, min_hits):
        return self.hits >= min_hits


@dataclass
class DetectionSet:
    boxes: list
    frame_index: int = 0
    timestamp: float = 0.0


def filter_overlaps(dets: DetectionSet, delta_iou: float) -> DetectionSet:
    """Keep only boxes whose largest IoU with any other box is below threshold."""
    boxes = dets.boxes
    keep = []
    for i, a in enumerate(boxes):
        worst = max((iou(a, b) for j, b in enumerate(boxes) if j != i), default=0.0)
        if worst < delta_iou:
            keep.append(a)
    return replace(dets, boxes=keep)


def _transition(dt):
    F = np.eye(4)
    F[0, 2] = dt
    F[1, 3] = dt
    return F


def _process_noise(dt, cfg: TrackerConfig):
    sp, sv = cfg.process_noise_std
    return np.diag([sp**2, sp**2, sv**2, sv**2]) * dt


def predict(track: TrackState, dt: float, cfg: TrackerConfig) -> TrackState:
    """Constant-velocity prediction of one track over dt seconds."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    F = _transition(dt)
    s = F @ track.s
    P = F @ track.P @ F.T + _process_noise(dt, cfg)
    P = 0.5 * (P + P.T)
    return replace(track, s=s, P=P)


def associate(tracks, measurements, H, gate):
    """Global nearest neighbor assignment of measurements to tracks.

    Cost is the squared Euclidean distance between each track's expected
    observation H @ s and each measurement; pairs whose cost exceeds the
    squared gate are broken into unmatched.

    Returns (pairs, unmatched_track_indices, unmatched_measurement_indices)
    with pairs as (track_index, measurement_index) tuples.
    """
    if not tracks or not measurements:
        return [], list(range(len(tracks))), list(range(len(measurements)))
    cost = np.zeros((len(tracks), len(measurements)))
    for i, t in enumerate(tracks):
        expected = H @ t.s
        for j, y in enumerate(measurements):
            d = expected - y
            cost[i, j] = d @ d
    rows, cols = linear_sum_assignment(cost)
    gate_sq = gate * gate
    pairs = [(i, j) for i, j in zip(rows, cols) if cost[i, j] <= gate_sq]
    matched_t = {i for i, _ in pairs}
    matched_m = {j for _, j in pairs}
    unmatched_t = [i for i in range(len(tracks)) if i not in matched_t]
    unmatched_m = [j for j in range(len(measurements)) if j not in matched_m]
    return pairs, unmatched_t, unmatched_m


def update(track: TrackState, y, H, measurement_noise_std) -> TrackState:
    """Kalman measurement update with observation matrix H."""
    R = np.eye(2) * measurement_noise_std**2
    innovation = y - H @ track.s
    if not np.all(np.isfinite(innovation)):
        return replace(track, valid=False)
    S = H @ track.P @ H.T + R
    K = track.P @ H.T @ np.linalg.inv(S)
    s = track.s + K @ innovation
    I_KH = np.eye(4) - K @ H
    # Joseph form keeps the covariance symmetric positive semi-definite.
    P = I_KH @ track.P @ I_KH.T + K @ R @ K.T
    P = 0.5 * (P + P.T)
    return replace(track, s=s, P=P)


class Tracker:
    """Stateful multi-person tracker over a detection sequence."""

    def __init__(self, intr: CameraIntrinsics, extr: Extrinsics,
                 cfg: TrackerConfig | None = None):
        self.intr = intr
        self.cfg = cfg or TrackerConfig()
        self.tracks: list[TrackState] = []
        self._next_id = 1
        self._last_timestamp = None
        self.set_extrinsics(extr)

    def set_extrinsics(self, extr: Extrinsics):
        """Install the current robot pose; H depends on it."""
        self.extr = extr
        self.H = build_observation_model(extr)

    def _new_track(self, y, box):
        # Invert the position block of H to seed the world position.
        A = self.H[:, :2]
        try:
            pos = np.linalg.solve(A, y)
        except np.linalg.LinAlgError:
            pos, *_ = np.linalg.lstsq(A, y, rcond=None)
        s = np.array([pos[0], pos[1], 0.0, 0.0])
        P = np.diag([self.cfg.init_position_std**2, self.cfg.init_position_std**2,
                     self.cfg.init_velocity_std**2, self.cfg.init_velocity_std**2])
        track = TrackState(id=self._next_id, s=s, P=P, hits=1, last_box=box)
        self._next_id += 1
        return track

    def step(self, dets: DetectionSet):
        """Process one frame.

        Returns (tracks, associations) where associations maps track id to
        the box matched this frame, for confirmed tracks only.
        """
        cfg = self.cfg
        if self._last_timestamp is None:
            dt = cfg.default_dt
        else:
            dt = dets.timestamp - self._last_timestamp
            if dt <= 0:
                dt = cfg.default_dt
        self._last_timestamp = dets.timestamp

        kept = filter_overlaps(dets, cfg.delta_iou)
        measurements, boxes = [], []
        for box in kept.boxes:
            try:
                measurements.append(
                    process_measurement(box, self.intr, self.extr, cfg.r_body))
                boxes.append(box)
            except InvalidDetectionError:
                continue

        self.tracks = [predict(t, dt, cfg) for t in self.tracks]
        for t in self.tracks:
            t.age += 1

        pairs, unmatched_t, unmatched_m = associate(
            self.tracks, measurements, self.H, cfg.gate_distance)

        associations = {}
        for i, j in pairs:
            t = update(self.tracks[i], measurements[j], self.H,
                       cfg.measurement_noise_std)
            t.missed = 0
            t.hits += 1
            t.last_box = boxes[j]
            self.tracks[i] = t
            if t.valid and t.confirmed(cfg.min_hits):
                associations[t.id] = boxes[j]
        for i in unmatched_t:
            t = self.tracks[i]
            t.missed += 1
            if not t.confirmed(cfg.min_hits):
                t.valid = False  # tentative track lost before confirmation
        for j in unmatched_m:
            self.tracks.append(self._new_track(measurements[j], boxes[j]))

        self.tracks = [t for t in self.tracks
                       if t.valid and t.missed <= cfg.max_missed]
        return self.tracks, associations

    def confirmed_tracks(self):
        return [t for t in self.tracks if t.confirmed(self.cfg.min_hits)]
