"""Per-frame orchestration: track people, score appearances, decide the target.

The loop per frame is: update the multi-person tracker, score every
confirmed track with the appearance classifier (previous frame's weight
snapshot), advance the follower state machine, then, while a target is
trusted, harvest labeled samples and retrain the classifier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry, reid
from .geometry import CameraIntrinsics, Extrinsics
from .reid import (
    FollowerMode,
    FollowerState,
    PassthroughExtractor,
    ReidConfig,
    RidgeClassifier,
    SampleSet,
)
from .tracker import DetectionSet, Tracker, TrackerConfig


@dataclass
class FrameResult:
    frame_index: int
    timestamp: float
    mode: str
    target_track_id: int | None
    target_box: object            # BoundingBox or None
    target_position: object       # world (x, y) or None
    tracks: list                  # (track_id, x, y, box or None)
    scores: dict                  # track_id -> appearance score


class FollowPipeline:
    """Stateful person-following estimator over a detection sequence."""

    def __init__(self, intr: CameraIntrinsics,
                 tracker_cfg: TrackerConfig | None = None,
                 reid_cfg: ReidConfig | None = None,
                 target_person_id: int | None = 0,
                 reid_enabled: bool = True,
                 seed: int = 0):
        self.intr = intr
        self.tracker_cfg = tracker_cfg or TrackerConfig()
        self.reid_cfg = reid_cfg or ReidConfig()
        self.reid_enabled = reid_enabled
        self.target_person_id = target_person_id
        self.tracker = Tracker(intr, Extrinsics.identity(), self.tracker_cfg)
        self.extractor = PassthroughExtractor(self.reid_cfg.descriptor_dim)
        self.sample_set = SampleSet(
            self.reid_cfg.capacity, self.reid_cfg.mode,
            self.reid_cfg.long_term_fraction,
            rng=np.random.default_rng(seed))
        self.classifier = RidgeClassifier(lam=self.reid_cfg.lam)
        self.state = FollowerState()
        self._bootstrapped = False

    def process_frame(self, record) -> FrameResult:
        """record is a sim.FrameRecord (descriptors may be None when re-ID is off)."""
        if record.robot_pose is not None:
            x, y, theta = record.robot_pose
            self.tracker.set_extrinsics(geometry.robot_pose_extrinsics(x, y, theta))

        dets = DetectionSet([d.box for d in record.detections],
                            record.frame_index, record.timestamp)
        tracks, associations = self.tracker.step(dets)

        by_box = {}
        for d in record.detections:
            key = (d.box.u_tl, d.box.v_tl, d.box.u_br, d.box.v_br)
            by_box[key] = d
        track_desc, track_person = {}, {}
        for tid, box in associations.items():
            det = by_box.get((box.u_tl, box.v_tl, box.u_br, box.v_br))
            if det is not None and det.descriptor is not None:
                track_desc[tid] = self.extractor.extract(det.descriptor)
                track_person[tid] = det.person_id

        if not self.reid_enabled:
            return self._result(record, None, associations, {})

        scores = {}
        if self.classifier.trained:
            scores = {tid: reid.score(self.classifier, desc)
                      for tid, desc in track_desc.items()}

        target = None
        if not self._bootstrapped:
            target = self._try_bootstrap(track_person)
        elif self.classifier.trained:
            self.state, target = reid.step_state_machine(
                self.state, scores, list(track_desc.keys()), self.reid_cfg)
        else:
            # Classifier could not be trained yet (e.g. no negatives seen);
            # trust pure tracking of the designated target while it lasts.
            tid = self.state.target_track_id
            target = tid if tid in associations else None
            if target is None:
                self.state.mode = FollowerMode.RE_ID
                self.state.target_track_id = None

        if target is not None:
            self._learn(target, track_desc, record.frame_index, associations)
        return self._result(record, target, associations, scores)

    def _try_bootstrap(self, track_person):
        """Operator-style target designation by ground-truth person id."""
        if self.target_person_id is None:
            return None
        for tid, pid in track_person.items():
            if pid == self.target_person_id:
                self.state.mode = FollowerMode.FOLLOWING
                self.state.target_track_id = tid
                self._bootstrapped = True
                return tid
        return None

    def _learn(self, target_tid, track_desc, frame_index, associations):
        if target_tid not in track_desc:
            return
        order = self._negatives_by_image_distance(target_tid, associations)
        samples = reid.label_frame_samples(
            target_tid, track_desc, frame_index,
            max_negatives=self.reid_cfg.max_negatives_per_frame,
            negative_order=order)
        if samples:
            reid.update_samples(self.sample_set, samples)
            reid.train(self.classifier, self.sample_set)

    def _negatives_by_image_distance(self, target_tid, associations):
        if target_tid not in associations:
            return None
        cx, cy = associations[target_tid].center
        others = [(tid, box) for tid, box in associations.items()
                  if tid != target_tid]
        others.sort(key=lambda item: (
            (item[1].center[0] - cx) ** 2 + (item[1].center[1] - cy) ** 2,
            item[0]))
        return [tid for tid, _ in others]

    def _result(self, record, target, associations, scores):
        rows = []
        for t in self.tracker.confirmed_tracks():
            box = associations.get(t.id)
            rows.append((t.id, float(t.s[0]), float(t.s[1]), box))
        target_box = associations.get(target) if target is not None else None
        target_pos = None
        if target is not None:
            for t in self.tracker.tracks:
                if t.id == target:
                    target_pos = (float(t.s[0]), float(t.s[1]))
        return FrameResult(
            frame_index=record.frame_index,
            timestamp=record.timestamp,
            mode=self.state.mode.value,
            target_track_id=target,
            target_box=target_box,
            target_position=target_pos,
            tracks=rows,
            scores=scores)

    def target_in_robot_frame(self, robot_pose):
        """Target position in the robot frame, or None; feeds the controller."""
        tid = self.state.target_track_id
        if tid is None:
            return None
        for t in self.tracker.tracks:
            if t.id == tid:
                x, y, theta = robot_pose
                R = geometry.rotation_z(theta).T
                p = R @ np.array([t.s[0] - x, t.s[1] - y, 0.0])
                return p[:2]
        return None
