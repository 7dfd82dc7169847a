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
Command line front end: synthetic dataset generation, one-shot detection and
refinement, sequence tracking, evaluation and debug renders.
"""

import os
import sys
import json
import logging
import argparse

import numpy as np

from edgetrack import formats, utils
from edgetrack.detector import detect_pose
from edgetrack.exceptions import ConfigError, FormatError, TrackingError
from edgetrack.geometry import farthest_point_sample
from edgetrack.metrics import evaluate
from edgetrack.raster import extract_contour, render, render_overlay
from edgetrack.refine import refine_pose
from edgetrack.scenes import SceneScript, render_sequence, write_dataset
from edgetrack.tracker import ObjectTrack, Tracker
from edgetrack.validation import edge_score


logger = logging.getLogger('edgetrack.cli')


def abort(message):
    sys.stderr.write('Error: {}\n'.format(message))
    sys.exit(1)

def camera_or_abort(conf, image=None):
    if conf.camera is None:
        abort('the configuration has no camera section')
    if image is not None and image.shape != (conf.camera.height, conf.camera.width):
        abort('image size {}x{} does not match the camera {}x{}'.format(
            image.shape[1], image.shape[0], conf.camera.width, conf.camera.height))
    return conf.camera

def print_rows(rows):
    sys.stdout.write(formats.format_pose_log(rows))
    sys.stdout.flush()

def gen(args):
    with open(args.script, 'r') as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(args.script, e.msg, 'line {}'.format(e.lineno))
    try:
        script = SceneScript.from_dict(doc)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(args.script, 'invalid scene script: {}'.format(e))
    sequence = render_sequence(script, args.num_workers)
    write_dataset(args.out_dir, script, sequence)
    logger.info('Dataset written to %s', args.out_dir)

def registry_tracks(conf):
    if not conf.meshes:
        abort('the configuration registry lists no meshes')
    tracks = []
    for class_id, (object_id, path) in enumerate(conf.meshes.items(), start=1):
        mesh = formats.read_mesh(os.path.expanduser(path))
        tracks.append(ObjectTrack(object_id, mesh, farthest_point_sample(mesh, conf.keypoints),
                                  class_id))
    return tracks

def detect(args, conf):
    image = formats.read_pgm(args.frame)
    intr = camera_or_abort(conf, image)
    frame = formats.read_vff(args.vff)
    if frame.class_mask.shape != image.shape:
        abort('correspondence frame and image differ in size')
    rows = []
    for track in registry_tracks(conf):
        detection = detect_pose(frame, track.class_id, track.keypoints, intr, conf.detection,
                                seed=conf.seed)
        pose = detection.pose if detection.accepted else None
        logger.info('Object-%s: %s (%d usable keypoints)', track.object_id,
                    'detected' if pose is not None else 'not detected', detection.used_keypoints)
        rows.append(formats.PoseLogRow(0, track.object_id, pose,
                                       state='detected' if pose is not None else 'uninitialized',
                                       detection_used=True))
    print_rows(rows)

def refine(args, conf):
    image = formats.read_pgm(args.frame)
    intr = camera_or_abort(conf, image)
    mesh = formats.read_mesh(args.mesh)
    init = formats.read_pose_json(args.init_pose)
    result = refine_pose(image, mesh, init, intr, conf.refine)
    score = edge_score(result.stats)
    object_id = os.path.splitext(os.path.basename(args.mesh))[0]
    print_rows([formats.PoseLogRow(0, object_id, result.pose, score,
                                   state='refined' if result.converged else 'failed')])
    sys.stdout.write('e_irls={:.6g} e_dist={:.6g} e_valid={:.6g} e_edge={:.6g}\n'.format(
        score.e_irls, score.e_dist, score.e_valid, score.e_edge))

def track(args, conf):
    dataset = formats.load_dataset(args.dataset_dir)
    intr = dataset['intrinsics']
    tracks = [ObjectTrack(o['id'], o['mesh'], farthest_point_sample(o['mesh'], o['keypoints']),
                          class_id)
              for class_id, o in enumerate(dataset['objects'], start=1)]
    tracker = Tracker(tracks, intr, conf.refine, conf.validation, conf.detection,
                      conf.tracker, seed=conf.seed)
    rows = []
    for i, path in enumerate(dataset['frame_paths']):
        image = formats.read_pgm(path)
        correspondences = None
        if dataset['vff_paths'] is not None:
            correspondences = formats.read_vff(dataset['vff_paths'][i])
        report = tracker.process_frame(image, correspondences)
        rows.extend(report.rows())
    formats.write_pose_log(args.out_csv, rows)
    logger.info('Tracked %d frames, detector evaluated %d times', len(dataset['frame_paths']),
                tracker.detector_calls)

def eval_intrinsics(args):
    path = args.intrinsics
    if path is None:
        path = os.path.join(os.path.dirname(os.path.normpath(args.meshes_dir)), 'dataset.json')
    doc = formats.read_json(path)
    if isinstance(doc, dict) and 'intrinsics' in doc:
        doc = doc['intrinsics']
    elif isinstance(doc, dict) and 'camera' in doc:
        doc = doc['camera']
    return formats.intrinsics_from_dict(doc, path)

def eval_(args):
    est = formats.read_pose_log(args.est_csv)
    gt = formats.read_pose_log(args.gt_csv)
    reference = formats.read_pose_log(args.reference) if args.reference else None
    intr = eval_intrinsics(args)
    meshes = {}
    for row in gt:
        if row.object_id not in meshes:
            base = os.path.join(args.meshes_dir, row.object_id)
            path = base + '.obj' if os.path.exists(base + '.obj') else base + '.msh'
            meshes[row.object_id] = formats.read_mesh(path)
    summary = evaluate(est, gt, meshes, intr, reference)
    for line in summary.lines():
        print(line)

def render_debug(args, conf):
    image = formats.read_pgm(args.frame)
    intr = camera_or_abort(conf, image)
    mesh = formats.read_mesh(args.mesh)
    pose = formats.read_pose_json(args.pose)
    if args.refine:
        pose = refine_pose(image, mesh, pose, intr, conf.refine).pose
    contour = extract_contour(render([(mesh, pose)], intr), 1, intr, conf.refine.contour_points)
    formats.write_pgm(args.out, render_overlay(image, contour.points_2d,
                                               value=1.0 if np.mean(image) < 0.5 else 0.0))

def parse_args(argv=None):
    parser = argparse.ArgumentParser(description='Model-based 6DoF object detection and tracking')
    parser.add_argument('-v', dest='verbose', action='store_true', default=False,
        help='Set logging level to debug and log on the console')
    parser.add_argument('-l', '--log-file', dest='log_file', type=str, default=None,
        help='Log file (overrides the configuration)')
    subparsers = parser.add_subparsers(dest='command')

    parser_gen = subparsers.add_parser('gen', help='Render a synthetic dataset from a scene script')
    parser_gen.add_argument('script', type=str, help='Scene script (JSON)')
    parser_gen.add_argument('out_dir', type=str, help='Output dataset directory')
    parser_gen.add_argument('-n', dest='num_workers', type=int, default=None,
        help='Number of concurrent workers (default: EDGETRACK_THREADS or CPU count)')

    parser_detect = subparsers.add_parser('detect', help='Detect registered objects in one frame')
    parser_detect.add_argument('frame', type=str, help='Camera frame (PGM)')
    parser_detect.add_argument('vff', type=str, help='Correspondence frame (VFF)')
    parser_detect.add_argument('config', type=str, help='Pipeline configuration (JSON)')

    parser_refine = subparsers.add_parser('refine', help='Refine one pose on one frame')
    parser_refine.add_argument('frame', type=str, help='Camera frame (PGM)')
    parser_refine.add_argument('mesh', type=str, help='Object mesh (OBJ or MSH1)')
    parser_refine.add_argument('init_pose', type=str, help='Initial pose (JSON)')
    parser_refine.add_argument('config', type=str, help='Pipeline configuration (JSON)')

    parser_track = subparsers.add_parser('track', help='Track all objects of a dataset')
    parser_track.add_argument('dataset_dir', type=str, help='Dataset directory')
    parser_track.add_argument('config', type=str, help='Pipeline configuration (JSON)')
    parser_track.add_argument('out_csv', type=str, help='Output pose log (CSV)')

    parser_eval = subparsers.add_parser('eval', help='Evaluate a pose log against ground truth')
    parser_eval.add_argument('est_csv', type=str, help='Estimated pose log')
    parser_eval.add_argument('gt_csv', type=str, help='Ground truth pose log')
    parser_eval.add_argument('meshes_dir', type=str, help='Directory holding <object id>.obj')
    parser_eval.add_argument('--intrinsics', type=str, default=None,
        help='Dataset manifest or camera JSON (default: dataset.json next to the meshes)')
    parser_eval.add_argument('--reference', type=str, default=None,
        help='Reference pose log (e.g. initial poses) for the improvement rate')

    parser_debug = subparsers.add_parser('render-debug',
        help='Draw the projected model contour over a frame')
    parser_debug.add_argument('frame', type=str, help='Camera frame (PGM)')
    parser_debug.add_argument('mesh', type=str, help='Object mesh (OBJ or MSH1)')
    parser_debug.add_argument('pose', type=str, help='Pose (JSON)')
    parser_debug.add_argument('config', type=str, help='Pipeline configuration (JSON)')
    parser_debug.add_argument('out', type=str, help='Output image (PGM)')
    parser_debug.add_argument('--refine', action='store_true', default=False,
        help='Refine the pose before drawing')

    return parser.parse_args(argv)

def main(argv=None):
    args = parse_args(argv)
    if args.command is None:
        sys.stderr.write('... Doing nothing, bye\n')
        sys.exit(1)

    conf = None
    try:
        if getattr(args, 'config', None) is not None:
            conf = utils.parse_conf(args.config)
        log_file = args.log_file or (conf.log_file if conf else None)
        utils.setup_logging(log_file, args.verbose or (conf.verbose if conf else False))
        if conf is not None:
            logger.debug('Configuration read from %s', args.config)

        if args.command == 'gen':
            gen(args)
        elif args.command == 'detect':
            detect(args, conf)
        elif args.command == 'refine':
            refine(args, conf)
        elif args.command == 'track':
            track(args, conf)
        elif args.command == 'eval':
            eval_(args)
        elif args.command == 'render-debug':
            render_debug(args, conf)
    except ConfigError as e:
        abort('invalid configuration: {}'.format(e))
    except (FormatError, OSError) as e:
        abort(e)
    except TrackingError as e:
        abort('tracking failed: {}'.format(e))
    except ValueError as e:
        abort(e)

    sys.exit(0)

if __name__ == '__main__':
    main()
