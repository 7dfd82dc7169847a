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


import os
import json
import logging
from dataclasses import dataclass, fields, replace

from edgetrack.detector import DetectionConfig
from edgetrack.exceptions import ConfigError, FormatError
from edgetrack.formats import intrinsics_from_dict
from edgetrack.refine import RefineConfig
from edgetrack.tracker import TrackerMode
from edgetrack.validation import ValidationConfig


# Far-Range defaults used when the configuration leaves them unset
FAR_PYRAMID_LEVELS = 2
FAR_E_INIT = 0.08

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(message)s'


@dataclass(frozen=True)
class PipelineConfig:
    camera: object = None
    refine: RefineConfig = RefineConfig()
    validation: ValidationConfig = ValidationConfig()
    detection: DetectionConfig = DetectionConfig()
    tracker: TrackerMode = TrackerMode()
    # keypoints per object and seed of the detector random streams
    keypoints: int = 9
    seed: int = 0
    meshes: dict = None
    log_file: str = None
    verbose: bool = False


def _check_type(section, key, value, default):
    where = '{}.{}'.format(section, key)
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError('{}: expected {}, got {!r}'.format(where, type(default).__name__, value))
    return value

def _section(doc, section, cls, overrides=None):
    """Build the dataclass `cls` from doc[section], rejecting unknown keys."""

    values = doc.get(section, {})
    if not isinstance(values, dict):
        raise ConfigError('{}: expected an object'.format(section))
    defaults = cls()
    known = {f.name for f in fields(cls)}
    kwargs = dict(overrides or {})
    for key, value in values.items():
        if key not in known:
            raise ConfigError('{}.{}: unknown key'.format(section, key))
        kwargs[key] = _check_type(section, key, value, getattr(defaults, key))
    try:
        return replace(defaults, **kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError('{}: {}'.format(section, e))

def _plain(doc, section, spec):
    values = doc.get(section, {})
    if not isinstance(values, dict):
        raise ConfigError('{}: expected an object'.format(section))
    out = {}
    for key, value in values.items():
        if key not in spec:
            raise ConfigError('{}.{}: unknown key'.format(section, key))
        out[key] = value
    return out

def parse_conf(fname):
    """Read a JSON pipeline configuration. Every key has a fallback default;
    unknown sections or keys and invalid values raise ConfigError."""

    try:
        with open(fname, 'r') as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError('{}: line {}: {}'.format(fname, e.lineno, e.msg))
    return conf_from_dict(doc)

def conf_from_dict(doc):
    if not isinstance(doc, dict):
        raise ConfigError('configuration must be a JSON object')
    unknown = set(doc) - {'camera', 'refine', 'validation', 'detection', 'tracker',
                          'registry', 'logging'}
    if unknown:
        raise ConfigError('unknown section(s): {}'.format(', '.join(sorted(unknown))))

    camera = None
    if 'camera' in doc:
        cam = _plain(doc, 'camera', ('fx', 'fy', 'cx', 'cy', 'width', 'height'))
        try:
            camera = intrinsics_from_dict(cam)
        except FormatError as e:
            raise ConfigError('camera: {}'.format(e))

    tracker_doc = dict(doc.get('tracker', {})) if isinstance(doc.get('tracker', {}), dict) else None
    if tracker_doc is None:
        raise ConfigError('tracker: expected an object')
    if 'mode' in tracker_doc:
        tracker_doc['name'] = tracker_doc.pop('mode')
    tracker = _section({'tracker': tracker_doc}, 'tracker', TrackerMode)

    refine_overrides, validation_overrides = {}, {}
    if tracker.far:
        refine_overrides['pyramid_levels'] = FAR_PYRAMID_LEVELS
        validation_overrides['e_init_threshold'] = FAR_E_INIT
    refine = _section(doc, 'refine', RefineConfig, refine_overrides)
    validation = _section(doc, 'validation', ValidationConfig, validation_overrides)
    detection = _section(doc, 'detection', DetectionConfig)

    registry = _plain(doc, 'registry', ('keypoints', 'seed', 'meshes'))
    keypoints = _check_type('registry', 'keypoints', registry.get('keypoints', 9), 9)
    seed = _check_type('registry', 'seed', registry.get('seed', 0), 0)
    if keypoints < 4:
        raise ConfigError('registry.keypoints: at least 4 keypoints are required')
    meshes = registry.get('meshes')
    if meshes is not None and not (isinstance(meshes, dict)
                                   and all(isinstance(v, str) for v in meshes.values())):
        raise ConfigError('registry.meshes: expected an object mapping ids to paths')

    log = _plain(doc, 'logging', ('file', 'verbose'))
    log_file = log.get('file')
    if log_file is not None and not isinstance(log_file, str):
        raise ConfigError('logging.file: expected a path')
    verbose = _check_type('logging', 'verbose', log.get('verbose', False), False)

    return PipelineConfig(camera=camera, refine=refine, validation=validation,
                          detection=detection, tracker=tracker, keypoints=keypoints,
                          seed=seed, meshes=meshes,
                          log_file=os.path.expanduser(log_file) if log_file else None,
                          verbose=verbose)

def setup_logging(log_file=None, verbose=False):
    """Configure the package logger: a log file when given and the console
    when verbose."""

    logger = logging.getLogger('edgetrack')
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    for handler in list(logger.handlers):
        if not isinstance(handler, logging.NullHandler):
            logger.removeHandler(handler)
            handler.close()
    formatter = logging.Formatter(LOG_FORMAT)
    if log_file is not None:
        fh = logging.FileHandler(log_file)
        fh.setFormatter(formatter)
        logger.addHandler(fh)
    # if the verbose mode is selected, log also on the console
    if verbose:
        ch = logging.StreamHandler()
        ch.setFormatter(formatter)
        logger.addHandler(ch)
    return logger
