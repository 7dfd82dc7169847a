#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# EdgeTrack: model-based 6DoF object detection and tracking.

# Copyright (C) 2026  EdgeTrack developers

# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as published
# by the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.

# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.

# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.


"""
Multi-object tracking runtime.

Objects with a validated pose are refined locally from their previous pose.
Only objects without a pose consult the correspondence frame; detections are
refined and become candidates until the edge score accepts or discards them.
"""

import time
import logging
from dataclasses import dataclass

import numpy as np

from edgetrack.detector import DetectionConfig, crop_frame, detect_pose
from edgetrack.exceptions import TrackingError
from edgetrack.formats import PoseLogRow
from edgetrack.geometry import project
from edgetrack.imageops import as_gray
from edgetrack.refine import RefineConfig, refine_pose
from edgetrack.validation import (UNINITIALIZED, Decision, State, ValidationConfig,
                                  edge_score, step_candidate, step_valid)
from edgetrack.workers import run_workers


logger = logging.getLogger(__name__)

TRACKER_MODES = ('close', 'far')


@dataclass(frozen=True)
class TrackerMode:
    """Close-Range passes whole correspondence frames to the detector,
    Far-Range a square patch around the last detection."""

    name: str = 'close'
    # 0 selects half the image width
    patch_side: int = 0
    start_anchor: tuple = None
    parallel: bool = False
    workers: int = 0

    def __post_init__(self):
        if self.name not in TRACKER_MODES:
            raise ValueError('tracker mode must be one of {}'.format(', '.join(TRACKER_MODES)))
        if self.patch_side < 0:
            raise ValueError('patch_side must be non-negative')
        if self.start_anchor is not None:
            object.__setattr__(self, 'start_anchor', tuple(float(v) for v in self.start_anchor))
            if len(self.start_anchor) != 2:
                raise ValueError('start_anchor must hold two pixel coordinates')

    @property
    def far(self):
        return self.name == 'far'


class ObjectTrack:
    """State of one registered object."""

    def __init__(self, object_id, mesh, keypoints, class_id):
        # name used in logs and pose logs
        self.object_id = str(object_id)
        self.mesh = mesh
        self.keypoints = keypoints
        # label of the object in correspondence frames
        self.class_id = int(class_id)
        self.health = UNINITIALIZED
        self.pose = None
        self.last_score = None
        # Far-Range patch center, None until the object was seen
        self.anchor = None

    def __repr__(self):
        return 'ObjectTrack: {}, {}'.format(self.object_id, self.health.state.value)


@dataclass
class ObjectReport:
    object_id: str
    state_before: State
    state: State
    decision: Decision
    pose: object
    score: object
    detection_used: bool
    timings: dict
    error: str = None


@dataclass
class FrameReport:
    frame: int
    objects: list

    @property
    def detection_used(self):
        return any(o.detection_used for o in self.objects)

    def rows(self):
        return [PoseLogRow(self.frame, o.object_id, o.pose, o.score, o.state.value,
                           o.detection_used) for o in self.objects]


def far_range_patch(image, track, mode, intr):
    """Square crop around the track anchor (or the start position) clamped to
    the image -> (patch, offset (x, y), intrinsics of the patch)."""

    height, width = image.shape
    side = mode.patch_side or width // 2
    side = max(1, min(side, width, height))
    anchor = track.anchor
    if anchor is None:
        anchor = mode.start_anchor if mode.start_anchor is not None else \
            ((width - 1) / 2.0, (height - 1) / 2.0)
    x0 = int(np.clip(np.floor(anchor[0] + 0.5 - side / 2.0), 0, width - side))
    y0 = int(np.clip(np.floor(anchor[1] + 0.5 - side / 2.0), 0, height - side))
    patch = image[y0:y0 + side, x0:x0 + side]
    return patch, np.array([x0, y0]), intr.shifted((x0, y0), side, side)


class Tracker:

    def __init__(self, tracks, intr, refine_cfg=None, validation_cfg=None,
                 detection_cfg=None, mode=None, seed=0):
        self.tracks = list(tracks)
        self.intr = intr
        self.refine_cfg = refine_cfg or RefineConfig()
        self.validation_cfg = validation_cfg or ValidationConfig()
        self.detection_cfg = detection_cfg or DetectionConfig()
        self.mode = mode or TrackerMode()
        self.seed = int(seed)
        self.frame_index = 0
        # number of detector evaluations so far
        self.detector_calls = 0

    def process_frame(self, image, correspondences=None):
        """Advance every track by one frame -> FrameReport (one entry per
        registered object, in registration order)."""

        image = as_gray(image)
        if image.shape != (self.intr.height, self.intr.width):
            raise ValueError('frame size {}x{} does not match the intrinsics'.format(
                image.shape[1], image.shape[0]))
        if correspondences is not None and correspondences.class_mask.shape != image.shape:
            raise ValueError('correspondence frame size does not match the image')

        def work(track):
            return self._process_track(track, image, correspondences)

        if self.mode.parallel and len(self.tracks) > 1:
            entries = run_workers(self.tracks, work, self.mode.workers)
        else:
            entries = [work(t) for t in self.tracks]
        self.detector_calls += sum(e.detection_used for e in entries)
        report = FrameReport(self.frame_index, entries)
        self.frame_index += 1
        return report

    def _process_track(self, track, image, correspondences):
        timings = {}
        state_before = track.health.state
        detection_used = False
        decision = None
        try:
            if track.health.is_tracking:
                decision = self._local_step(track, image, timings)
            elif track.health.state is State.CANDIDATE:
                decision = self._candidate_step(track, image, timings, fresh=False)
            if not track.health.is_tracking and track.health.state is not State.CANDIDATE \
                    and correspondences is not None:
                detection_used = True
                decision = self._detection_step(track, image, correspondences, timings)
        except TrackingError as e:
            logger.warning(self._logalize(track, 'Demoted after error: {}'.format(e)))
            self._lose(track)
            return ObjectReport(track.object_id, state_before, track.health.state,
                                Decision.REINITIALIZE, None, None, detection_used, timings,
                                error=str(e))

        if track.health.state is not state_before:
            logger.info(self._logalize(track, '{} -> {} ({})'.format(
                state_before.value, track.health.state.value,
                decision.value if decision else 'no decision')))
        return ObjectReport(track.object_id, state_before, track.health.state, decision,
                            track.pose, track.last_score, detection_used, timings)

    def _refine_and_score(self, track, image, pose, timings):
        t0 = time.perf_counter()
        result = refine_pose(image, track.mesh, pose, self.intr, self.refine_cfg)
        timings['refine'] = timings.get('refine', 0.0) + 1000.0 * (time.perf_counter() - t0)
        score = edge_score(result.stats)
        track.last_score = score
        logger.debug(self._logalize(track, 'e_edge {:.4f} (irls {:.4f}, dist {:.4f}, valid {:.3f})'.format(
            score.e_edge, score.e_irls, score.e_dist, score.e_valid)))
        return result.pose, score

    def _local_step(self, track, image, timings):
        pose, score = self._refine_and_score(track, image, track.pose, timings)
        track.health, decision = step_valid(track.health, score, self.validation_cfg, track.pose)
        if decision is Decision.UPDATE_POSE:
            track.pose = pose
            self._update_anchor(track)
        elif decision is Decision.REINITIALIZE:
            self._lose(track)
        return decision

    def _candidate_step(self, track, image, timings, fresh):
        pose, score = self._refine_and_score(track, image, track.pose, timings)
        health = UNINITIALIZED if fresh else track.health
        track.health, decision = step_candidate(health, score, self.validation_cfg)
        if decision is Decision.DISCARD:
            self._lose(track)
        else:
            track.pose = pose
            self._update_anchor(track)
        return decision

    def _detection_step(self, track, image, correspondences, timings):
        t0 = time.perf_counter()
        frame, intr = correspondences, self.intr
        if self.mode.far:
            _, offset, intr = far_range_patch(image, track, self.mode, self.intr)
            frame = crop_frame(correspondences, offset, intr.width, intr.height)
        detection = detect_pose(frame, track.class_id, track.keypoints, intr,
                                self.detection_cfg, seed=self.seed + 7919 * self.frame_index)
        timings['detect'] = 1000.0 * (time.perf_counter() - t0)
        if not detection.accepted:
            logger.debug(self._logalize(track, 'No valid detection ({} usable keypoints)'.format(
                detection.used_keypoints)))
            self._lose(track)
            return Decision.DISCARD
        # the pose is camera-frame, so patch and full-frame detections agree
        track.pose = detection.pose
        return self._candidate_step(track, image, timings, fresh=True)

    def _update_anchor(self, track):
        try:
            track.anchor = project(track.pose.translation, self.intr)
        except TrackingError:
            track.anchor = None

    def _lose(self, track):
        track.health = UNINITIALIZED
        track.pose = None
        track.anchor = None

    def _logalize(self, track, message):
        return 'Object-{}: {}'.format(track.object_id, message)
