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

import numpy as np
import pytest
from numpy.testing import assert_allclose

from edgetrack.formats import load_dataset, read_pgm, read_pose_log, read_vff
from edgetrack.geometry import Intrinsics, Pose, rotation_error
from edgetrack.scenes import (FamilyParams, Occluder, SceneScript, ScriptObject, Trajectory,
                              box_mesh, family_member, generate_family, make_background,
                              mesh_distance, perturb_pose, render_sequence, sphere_mesh,
                              write_dataset)


@pytest.fixture
def small_intr():
    return Intrinsics(fx=150.0, fy=150.0, cx=39.5, cy=29.5, width=80, height=60)

@pytest.fixture
def script(small_intr, cube):
    still = Trajectory([(0, [0.3, 0.2, 0.1], [0.0, 0.0, 0.6])])
    return SceneScript(intr=small_intr, frames=4, objects=[ScriptObject('a', cube, still)],
                       occluders=[Occluder((0, 0, 40, 60), 2, 2, 0.0)], keypoints=5)

class TestMeshes:

    def test_box_faces_point_outward(self):
        center = np.array([0.1, -0.2, 0.3])
        vertices, triangles = box_mesh(center, [0.1, 0.2, 0.3], 2)
        tris = vertices[triangles]
        normals = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
        assert np.all(np.sum(normals * (tris.mean(axis=1) - center), axis=1) > 0)
        assert len(triangles) == 6 * 2 * 4

    def test_box_arguments(self):
        with pytest.raises(ValueError):
            box_mesh(np.zeros(3), [0.1, 0.0, 0.1])
        with pytest.raises(ValueError):
            box_mesh(np.zeros(3), [0.1, 0.1, 0.1], 0)

    def test_sphere(self):
        mesh = sphere_mesh(0.05, 4)
        assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 0.05)
        assert mesh.diameter == pytest.approx(0.1)

class TestFamily:

    def test_seeded(self):
        a = generate_family(FamilyParams(), 4, seed=5)
        b = generate_family(FamilyParams(), 4, seed=5)
        for x, y in zip(a, b):
            assert np.array_equal(x.vertices, y.vertices)
            assert np.array_equal(x.triangles, y.triangles)

    def test_members_are_distinct_and_alike(self):
        family = generate_family(FamilyParams(), 13, seed=0)
        diameters = np.array([m.diameter for m in family])
        assert diameters.max() <= 1.1 * diameters.min()
        for i in range(len(family)):
            for j in range(i + 1, len(family)):
                a, b = family[i], family[j]
                assert len(a.vertices) != len(b.vertices) or \
                    mesh_distance(a, b) + mesh_distance(b, a) > 0

    def test_one_pin_apart(self):
        params = FamilyParams()
        pins = [0] * params.slots
        a = family_member(params, pins)
        b = family_member(params, [1] + pins[1:])
        assert len(b.vertices) == len(a.vertices) + 24
        distance = mesh_distance(b, a)
        assert 0 < distance < 0.05 * a.diameter
        assert a.diameter == pytest.approx(b.diameter)

    def test_parameter_checks(self):
        with pytest.raises(ValueError):
            FamilyParams(stub_width=0.1)
        with pytest.raises(ValueError):
            FamilyParams(pin_offset=0.035)
        with pytest.raises(ValueError):
            generate_family(FamilyParams(), 1)

class TestTrajectory:

    def test_interpolation(self):
        track = Trajectory([(10, [0.0, 0.0, 1.0], [0.1, 0.0, 1.0]),
                            (0, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0])])
        mid = track.pose_at(5)
        assert_allclose(mid.translation, [0.05, 0.0, 1.0])
        assert_allclose(mid.rotvec(), [0.0, 0.0, 0.5], atol=1e-12)
        assert_allclose(track.pose_at(-3).translation, [0.0, 0.0, 1.0])
        assert_allclose(track.pose_at(30).rotvec(), [0.0, 0.0, 1.0], atol=1e-12)

    def test_single_keyframe(self):
        track = Trajectory([(0, [0.1, 0.0, 0.0], [0.0, 0.0, 2.0])])
        assert_allclose(track.pose_at(7).translation, [0.0, 0.0, 2.0])

    def test_duplicate_keyframes(self):
        with pytest.raises(ValueError):
            Trajectory([(1, [0.0] * 3, [0.0, 0.0, 1.0]), (1, [0.0] * 3, [0.0, 0.0, 1.0])])
        with pytest.raises(ValueError):
            Trajectory([])

def test_perturb_pose():
    pose = Pose.from_rotvec([0.1, 0.2, 0.3], [0.0, 0.0, 1.0])
    a = perturb_pose(pose, 2.0, 0.01, np.random.default_rng(1))
    b = perturb_pose(pose, 2.0, 0.01, np.random.default_rng(1))
    assert np.array_equal(a.rotation, b.rotation)
    assert 0 < rotation_error(a, pose) < 10.0
    same = perturb_pose(pose, 0.0, 0.0, np.random.default_rng(1))
    assert_allclose(same.rotation, pose.rotation, atol=1e-15)
    assert np.array_equal(same.translation, pose.translation)

class TestSequence:

    def test_static_scene(self, script):
        seq = render_sequence(script, n_workers=2)
        assert len(seq.frames) == 4 and len(seq.vff) == 4
        assert np.array_equal(seq.frames[0], seq.frames[1])
        assert np.array_equal(seq.frames[0], seq.frames[3])
        assert all(np.array_equal(g['a'].rotation, seq.gt[0]['a'].rotation) for g in seq.gt)
        assert seq.keypoints['a'].k == 5 and seq.vff[0].k == 5

    def test_occluder_hides_pixels_and_vectors(self, script):
        seq = render_sequence(script, n_workers=1)
        assert np.all(seq.frames[2][:, :40] == 0.0)
        assert not np.any(seq.vff[2].class_mask[:, :40])
        assert np.any(seq.vff[0].class_mask[:, :40])
        assert np.all(seq.vff[2].fields[:, :, :40] == 0.0)

    def test_noise_is_seeded_per_frame(self, script):
        script.noise_sigma = 0.02
        a = render_sequence(script, n_workers=2)
        b = render_sequence(script, n_workers=1)
        assert all(np.array_equal(x, y) for x, y in zip(a.frames, b.frames))
        assert not np.array_equal(a.frames[0], a.frames[1])

    @pytest.mark.parametrize('background', ['constant', 'gradient', 'texture'])
    def test_backgrounds(self, script, background):
        script.background = background
        image = make_background(script)
        assert image.shape == (60, 80)
        assert image.min() >= 0.0 and image.max() <= 1.0

    def test_write_dataset(self, script, tmp_path):
        seq = render_sequence(script)
        out = str(tmp_path / 'ds')
        write_dataset(out, script, seq)
        dataset = load_dataset(out)
        assert dataset['frames'] == 4 and dataset['objects'][0]['id'] == 'a'
        assert_allclose(read_pgm(dataset['frame_paths'][1]), seq.frames[1], atol=0.5 / 255)
        assert np.array_equal(read_vff(dataset['vff_paths'][3]).class_mask,
                              seq.vff[3].class_mask)
        rows = read_pose_log(os.path.join(out, 'gt.csv'))
        assert [r.key for r in rows] == [(i, 'a') for i in range(4)]

def test_script_from_dict():
    doc = {'intrinsics': {'fx': 100.0, 'fy': 100.0, 'cx': 31.5, 'cy': 23.5,
                          'width': 64, 'height': 48},
           'frames': 3,
           'family': {'size': 3, 'seed': 1},
           'objects': [
               {'id': 'n', 'mesh': {'family': 2},
                'keyframes': [{'frame': 0, 'rotvec': [0, 0, 0], 'translation': [0, 0, 0.7]}]},
               {'mesh': {'box': [0.02, 0.03, 0.04]},
                'keyframes': [{'frame': 0, 'rotvec': [0, 0, 0], 'translation': [0, 0, 0.9]}]}],
           'distractors': [
               {'mesh': {'sphere': 0.02},
                'keyframes': [{'frame': 0, 'rotvec': [0, 0, 0], 'translation': [0, 0, 0.5]}]}],
           'occluders': [{'rect': [0, 0, 10, 10], 'start': 1, 'end': 2}]}
    script = SceneScript.from_dict(doc)
    assert [o.object_id for o in script.objects] == ['n', '2']
    assert script.distractors[0].object_id == 'distractor-0'
    assert script.occluders[0].active(2) and not script.occluders[0].active(0)
    assert script.objects[1].mesh.diameter == pytest.approx(2 * np.sqrt(0.02 ** 2 + 0.03 ** 2
                                                                        + 0.04 ** 2))
    with pytest.raises(ValueError):
        SceneScript.from_dict(dict(doc, objects=[dict(doc['objects'][0], mesh={'cone': 1})]))
