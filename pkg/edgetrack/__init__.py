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


import logging


__author__      = "EdgeTrack developers"
__license__     = "AGPLv3"
__copyright__   = "Copyright 2026, EdgeTrack developers"
__version__     = "0.1"

# library logger, handlers are attached by utils.setup_logging
logging.getLogger(__name__).addHandler(logging.NullHandler())
