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
Grayscale image helpers: pyramids, Sobel machinery, the rotated kernel bank
used on scanlines and the paired adaptive thresholding that makes a rendered
image comparable with a camera image.

Images are 2D float64 numpy arrays (rows = y, columns = x) with values in
[0, 1].
"""

from dataclasses import dataclass
from functools import lru_cache

import cv2
import numpy as np
from scipy import ndimage


def as_gray(img):
    img = np.ascontiguousarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError('expected a 2D grayscale image, got shape {}'.format(img.shape))
    if not np.all(np.isfinite(img)):
        raise ValueError('image contains non-finite values')
    return img


class ImagePyramid:
    """Level 0 is the full resolution image, each further level halves it."""

    def __init__(self, levels):
        self.levels = list(levels)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, level):
        return self.levels[level]


@dataclass(frozen=True, eq=False)
class EdgeImagePair:
    rendered_edges: np.ndarray
    camera_edges: np.ndarray
    # binary masks before smoothing
    rendered_mask: np.ndarray
    camera_mask: np.ndarray


class KernelBank:
    """Oriented 5x5 derivative kernels. The tag of a kernel is the gradient
    direction it responds to, in degrees within [0, 180)."""

    def __init__(self, kernels, angles):
        self.kernels = kernels
        self.angles = angles
        self.step = 180.0 / len(kernels)

    def __len__(self):
        return len(self.kernels)

    def nearest(self, angle):
        """Index of the kernel closest to `angle` (degrees, scalar or array)."""

        idx = np.floor(np.mod(angle, 180.0) / self.step + 0.5).astype(np.int64)
        return idx % len(self.kernels)


def downsample(img):
    """2x2 box-average downsampling, odd sizes replicate the last row/col."""

    if img.shape[0] % 2:
        img = np.vstack([img, img[-1:]])
    if img.shape[1] % 2:
        img = np.hstack([img, img[:, -1:]])
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])

def build_pyramid(img, levels):
    if levels < 1:
        raise ValueError('at least one pyramid level is required')
    img = as_gray(img)
    if min(img.shape) < 2 ** (levels - 1):
        raise ValueError('image {}x{} too small for {} pyramid levels'.format(
            img.shape[1], img.shape[0], levels))
    out = [img]
    for _ in range(levels - 1):
        out.append(downsample(out[-1]))
    return ImagePyramid(out)

def sobel_gradients(img):
    """3x3 Sobel responses scaled by 1/4, replicated borders."""

    img = as_gray(img)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError('image must be at least 3x3')
    gx = cv2.Sobel(img, cv2.CV_64F, 1, 0, ksize=3, scale=0.25,
                   borderType=cv2.BORDER_REPLICATE)
    gy = cv2.Sobel(img, cv2.CV_64F, 0, 1, ksize=3, scale=0.25,
                   borderType=cv2.BORDER_REPLICATE)
    return gx, gy

def sobel_magnitude(img):
    gx, gy = sobel_gradients(img)
    return np.hypot(gx, gy)

@lru_cache(maxsize=8)
def rotated_sobel_bank(n=8):
    """Bank of `n` 5x5 Sobel kernels at orientations i * 180 / n.

    Each kernel is the 0 degree kernel resampled bilinearly on a rotated grid,
    then shifted to zero sum and scaled to unit positive mass, so a unit step
    aligned with the kernel responds with 1.
    """

    if n < 2:
        raise ValueError('the kernel bank needs at least two orientations')
    kx = np.array([-1.0, -2.0, 0.0, 2.0, 1.0])
    ky = np.array([1.0, 4.0, 6.0, 4.0, 1.0])
    base = np.outer(ky, kx)
    ys, xs = np.mgrid[-2:3, -2:3].astype(np.float64)
    kernels, angles = [], []
    for i in range(n):
        angle = i * 180.0 / n
        c, s = np.cos(np.radians(angle)), np.sin(np.radians(angle))
        u = c * xs + s * ys
        v = -s * xs + c * ys
        k = ndimage.map_coordinates(base, [v + 2.0, u + 2.0], order=1,
                                    mode='constant', cval=0.0)
        k = k - k.mean()
        k = k / k[k > 0].sum()
        k.setflags(write=False)
        kernels.append(k)
        angles.append(angle)
    return KernelBank(tuple(kernels), np.array(angles))

def oriented_responses(img, bank):
    """Filter `img` with every kernel of the bank -> (n, H, W)."""

    img = as_gray(img)
    return np.stack([cv2.filter2D(img, cv2.CV_64F, k, borderType=cv2.BORDER_REPLICATE)
                     for k in bank.kernels])

def box_filter(img, radius):
    if radius < 0:
        raise ValueError('radius must be non-negative')
    img = as_gray(img)
    if radius == 0:
        return img.copy()
    size = 2 * int(radius) + 1
    return cv2.blur(img, (size, size), borderType=cv2.BORDER_REPLICATE)

def grid_bounds(n, cells):
    """Cell boundaries along one axis; the remainder joins the last cell."""

    cells = max(1, min(int(cells), n))
    step = n // cells
    return [i * step for i in range(cells)] + [n]

def adaptive_threshold_pair(rendered, camera, grid_cells=16, t_r=0.05,
                            box_radius=2, t_min=0.02):
    """Edge images of a rendering and a camera frame with matched statistics.

    Rendered edges are Sobel magnitudes above `t_r`. In every grid cell the
    camera image keeps as many of its strongest gradients as the rendering has
    edge pixels there (never below the noise floor `t_min`). Both binary masks
    are box filtered.
    """

    rendered = as_gray(rendered)
    camera = as_gray(camera)
    if rendered.shape != camera.shape:
        raise ValueError('rendered and camera images differ in size')
    mag_r = sobel_magnitude(rendered)
    mag_c = sobel_magnitude(camera)
    mask_r = mag_r > t_r
    mask_c = np.zeros_like(mask_r)
    rows = grid_bounds(rendered.shape[0], grid_cells)
    cols = grid_bounds(rendered.shape[1], grid_cells)
    for r0, r1 in zip(rows[:-1], rows[1:]):
        for c0, c1 in zip(cols[:-1], cols[1:]):
            count = int(np.count_nonzero(mask_r[r0:r1, c0:c1]))
            if count == 0:
                continue
            cell = mag_c[r0:r1, c0:c1].ravel()
            strongest = np.argsort(-cell, kind='stable')[:count]
            selected = np.zeros(cell.size, dtype=bool)
            selected[strongest] = True
            selected &= cell > t_min
            mask_c[r0:r1, c0:c1] = selected.reshape(r1 - r0, c1 - c0)
    return EdgeImagePair(rendered_edges=box_filter(mask_r.astype(np.float64), box_radius),
                         camera_edges=box_filter(mask_c.astype(np.float64), box_radius),
                         rendered_mask=mask_r, camera_mask=mask_c)
