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
Edge matching score and the per-object acceptance state machine.
"""

import enum
import math
from dataclasses import dataclass, replace

import numpy as np


class State(enum.Enum):
    UNINITIALIZED = 'uninitialized'
    CANDIDATE = 'candidate'
    VALID = 'valid'
    BORDERLINE = 'borderline'


class Decision(enum.Enum):
    ACCEPT = 'accept'
    KEEP_REFINING = 'keep_refining'
    DISCARD = 'discard'
    UPDATE_POSE = 'update_pose'
    HOLD_POSE = 'hold_pose'
    REINITIALIZE = 'reinitialize'


@dataclass(frozen=True)
class EdgeScore:
    e_irls: float
    e_dist: float
    e_valid: float
    e_edge: float


@dataclass(frozen=True)
class ValidationConfig:
    e_init_threshold: float = 0.12
    e_max: float = 0.30
    mean_factor_f: float = 2.0
    ema_alpha: float = 0.1
    max_candidate_frames: int = 10

    def __post_init__(self):
        if not self.e_init_threshold > 0:
            raise ValueError('e_init_threshold must be positive')
        if not self.e_max > 0:
            raise ValueError('e_max must be positive')
        if not self.mean_factor_f > 1:
            raise ValueError('mean_factor_f must be greater than 1')
        if not 0 < self.ema_alpha <= 1:
            raise ValueError('ema_alpha must lie in (0, 1]')
        if self.max_candidate_frames < 1:
            raise ValueError('max_candidate_frames must be at least 1')


@dataclass(frozen=True, eq=False)
class TrackHealth:
    state: State = State.UNINITIALIZED
    last_e: float = math.inf
    candidate_frames: int = 0
    running_mean: float = 0.0
    frames_valid: int = 0
    mismatch_count: int = 0
    held_pose: object = None

    def __eq__(self, other):
        if not isinstance(other, TrackHealth):
            return NotImplemented
        return (self.state, self.last_e, self.candidate_frames, self.running_mean,
                self.frames_valid, self.mismatch_count) == \
               (other.state, other.last_e, other.candidate_frames, other.running_mean,
                other.frames_valid, other.mismatch_count) and \
               self.held_pose is other.held_pose

    @property
    def is_tracking(self):
        return self.state in (State.VALID, State.BORDERLINE)


UNINITIALIZED = TrackHealth()


def edge_score(stats):
    e_irls = float(stats.irls_mean_residual)
    e_dist = float(stats.mean_hyp_distance)
    e_valid = float(stats.valid_ratio)
    if math.isinf(e_valid) or math.isinf(e_irls) or math.isinf(e_dist):
        return EdgeScore(e_irls, e_dist, e_valid, math.inf)
    return EdgeScore(e_irls, e_dist, e_valid, e_irls * e_dist * e_valid)

def _value(e):
    return float(e.e_edge if isinstance(e, EdgeScore) else e)

def step_candidate(h, e, cfg):
    """Advance a fresh detection (Uninitialized) or a Candidate by one score."""

    if h.state not in (State.UNINITIALIZED, State.CANDIDATE):
        raise ValueError('step_candidate needs an uninitialized or candidate track')
    e = _value(e)
    if e < cfg.e_init_threshold:
        return TrackHealth(State.VALID, running_mean=e, frames_valid=1), Decision.ACCEPT
    frames = h.candidate_frames + 1 if h.state is State.CANDIDATE else 1
    if e < h.last_e and frames <= cfg.max_candidate_frames:
        return TrackHealth(State.CANDIDATE, last_e=e, candidate_frames=frames), \
               Decision.KEEP_REFINING
    return UNINITIALIZED, Decision.DISCARD

def step_valid(h, e, cfg, pose=None):
    """Advance a Valid or Borderline track by one score. `pose` is the pose
    held while the track is Borderline."""

    if not h.is_tracking:
        raise ValueError('step_valid needs a valid or borderline track')
    e = _value(e)
    if e < cfg.e_max and e < h.running_mean * cfg.mean_factor_f:
        mean = (1.0 - cfg.ema_alpha) * h.running_mean + cfg.ema_alpha * e
        return TrackHealth(State.VALID, running_mean=mean,
                           frames_valid=h.frames_valid + 1), Decision.UPDATE_POSE
    if h.state is State.VALID:
        return replace(h, state=State.BORDERLINE, mismatch_count=1,
                       held_pose=pose), Decision.HOLD_POSE
    return UNINITIALIZED, Decision.REINITIALIZE

def step(h, e, cfg, pose=None):
    if h.is_tracking:
        return step_valid(h, e, cfg, pose)
    return step_candidate(h, e, cfg)

def replay(scores, cfg, initial=UNINITIALIZED):
    """Feed a score log through the state machine -> [(TrackHealth, Decision)]."""

    h = initial
    out = []
    for e in scores:
        h, decision = step(h, e, cfg)
        out.append((h, decision))
    return out


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    accepted_correct: float
    rejected_wrong: float


def sweep_thresholds(correct_scores, wrong_scores, thresholds):
    """Fraction of correct poses accepted and of wrong poses rejected by an
    initialization threshold, for every threshold."""

    correct = np.array([_value(e) for e in correct_scores], dtype=np.float64)
    wrong = np.array([_value(e) for e in wrong_scores], dtype=np.float64)
    rows = []
    for t in thresholds:
        rows.append(SweepRow(threshold=float(t),
                             accepted_correct=float(np.mean(correct < t)) if len(correct) else 0.0,
                             rejected_wrong=float(np.mean(wrong >= t)) if len(wrong) else 0.0))
    return rows
