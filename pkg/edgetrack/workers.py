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
Thread pool used by the frame generator and by parallel per-object
refinement: a fixed number of workers drain a shared queue of numbered tasks.
"""

import os
import logging
import threading
from queue import Queue, Empty


logger = logging.getLogger(__name__)

THREADS_ENV = 'EDGETRACK_THREADS'


def thread_count(requested=None):
    """Number of worker threads: `requested` when positive, otherwise
    EDGETRACK_THREADS, otherwise the CPU count. EDGETRACK_THREADS also caps
    explicit requests."""

    try:
        cap = int(os.environ.get(THREADS_ENV, '0'))
    except ValueError:
        logger.warning('Ignoring malformed %s=%r', THREADS_ENV, os.environ.get(THREADS_ENV))
        cap = 0
    auto = os.cpu_count() or 1
    n = requested if requested and requested > 0 else (cap if cap > 0 else auto)
    if cap > 0:
        n = min(n, cap)
    return max(1, n)

class Worker(threading.Thread):
    """Execute tasks from the queue until there is nothing left to do or
    another worker failed."""

    def __init__(self, n, tasks, results, errors, fn, stop):
        super(Worker, self).__init__()
        # numeric identifier of the worker
        self.n = n
        self.tasks = tasks
        self.results = results
        self.errors = errors
        self.fn = fn
        self.stop = stop
        self.index = None
        self.daemon = True

    def run(self):
        while not self.stop.is_set():
            try:
                self.index, item = self.tasks.get_nowait()
            except Empty:
                break
            try:
                self.results[self.index] = self.fn(item)
            except Exception as e:
                logger.error(self._logalize('Task failed: {}'.format(e)))
                self.errors.append((self.index, e))
                self.stop.set()

    def _logalize(self, message):
        return 'Worker-{} (task {}): {}'.format(self.n, self.index, message)

def run_workers(tasks, fn, n_workers=None):
    """Apply `fn` to every task and return the results in task order.

    Tasks must not share mutable state. The exception of the lowest numbered
    failing task is re-raised.
    """

    tasks = list(tasks)
    n = min(thread_count(n_workers), len(tasks))
    if n <= 1:
        return [fn(t) for t in tasks]

    queue = Queue()
    for i, t in enumerate(tasks):
        queue.put_nowait((i, t))
    results = [None] * len(tasks)
    errors = []
    stop = threading.Event()
    workers = [Worker(i, queue, results, errors, fn, stop) for i in range(n)]
    for worker in workers:
        worker.start()
    for worker in workers:
        worker.join()
    if errors:
        raise min(errors, key=lambda e: e[0])[1]
    return results
