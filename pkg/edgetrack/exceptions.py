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


class TrackingError(Exception):
    pass

class BehindCamera(TrackingError):
    pass

class ObjectNotVisible(TrackingError):
    pass

class DegenerateSilhouette(TrackingError):
    pass

class DegenerateGeometry(TrackingError):
    pass

class TooFewScanlines(TrackingError):
    pass

class InsufficientEdgeStructure(TrackingError):
    pass

class FormatError(Exception):
    """Malformed input file. The message carries the path and the line or
    byte offset where parsing stopped."""

    def __init__(self, path, message, position=None):
        self.path = path
        self.position = position
        where = path if position is None else '{}:{}'.format(path, position)
        super(FormatError, self).__init__('{}: {}'.format(where, message))

class ConfigError(Exception):
    pass
