#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
# Copyright (c) 2026 Countsift Developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program. If not, see <http://www.gnu.org/licenses/>.
"""Seeded, order-independent random streams.

Every stochastic draw in countsift comes from a Philox counter-based
generator keyed by a :class:`numpy.random.SeedSequence` built from a base
seed and a tuple of non-negative integer keys (replicate index, purpose,
row index, ...). Two draws with different key tuples are independent, and a
draw never depends on which other streams were consumed before it.
"""

import numpy as np


def seed_sequence(seed, *keys):
    """Return the seed sequence for *seed* and the stream *keys*."""
    keys = tuple(int(key) for key in keys)
    if any(key < 0 for key in keys):
        raise ValueError("Stream keys must be non-negative integers")
    return np.random.SeedSequence(int(seed), spawn_key=keys)


def rng_stream(seed, *keys):
    """Return an independent generator for *seed* and the stream *keys*."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *keys)))
