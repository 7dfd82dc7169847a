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


from setuptools import setup, find_packages

setup(
    name='EdgeTrack',
    version='0.1',
    description='Model-based multi-object 6DoF detection and tracking',
    long_description=__doc__,
    license='AGPLv3',
    author='EdgeTrack developers',
    packages=find_packages(exclude=['tests']),
    include_package_data=True,
    zip_safe=False,
    python_requires='>=3.9',
    entry_points = {
        'console_scripts': [
            'edgetrack = edgetrack.scripts.edgetrack:main'
        ]
    },
    install_requires=[
        'numpy>=1.21',
        'scipy>=1.8',
        'opencv-python-headless>=4.5.4'
    ],
    extras_require={
        'test': [
            'pytest>=7.0',
            'hypothesis>=6.0'
        ]
    },
    classifiers=[
        'Private :: Do Not Upload'
    ]
)
