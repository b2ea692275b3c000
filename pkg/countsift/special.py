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
"""Sums over rising factorials.

The count likelihoods need three finite sums per cell,

    log_rising(z, y)        = sum_{l<y} log(z + l)
    reciprocal_rising(z, y) = sum_{l<y} 1 / (z + l)
    ratio_rising(z, y)      = sum_{l<y} z / (z + l)

with ``z > 0`` real and ``y >= 0`` integer. Two evaluation methods are
available: ``"loop"`` adds the terms one by one and ``"special"`` uses
log-gamma and digamma differences, switching to an asymptotic expansion
of the difference for large ``z`` where the plain difference cancels.
"""

import numpy as np
from scipy.special import digamma, gammaln

METHODS = ("special", "loop")

#: Above this ``z`` the special-function differences lose digits and the
#: asymptotic difference series is used instead.
ASYMPTOTIC_THRESHOLD = 1e3


def _check_method(method):
    if method not in METHODS:
        raise ValueError("Unknown summation method '{}', use one of {}".format(method, METHODS))


def _broadcast(z, y):
    z = np.asarray(z, dtype=float)
    y = np.asarray(y)
    z, y = np.broadcast_arrays(z, y)
    return z, y.astype(np.int64)


def _loop(z, y, term):
    out = np.zeros(z.shape)
    if out.size == 0:
        return out
    for l in range(int(y.max(initial=0))):
        live = l < y
        out[live] += term(z[live], l)
    return out


def _inv_pow_diff(a, b, power):
    """Return ``a**-power - b**-power`` for ``a >= b > 0`` without cancellation."""
    # a**-k - b**-k = (b**k - a**k) / (a*b)**k and b**k - a**k = (b - a) * sum(...)
    ratio = b / a
    partial = np.zeros_like(a)
    for k in range(power):
        partial += ratio ** k
    return -(a - b) * partial / (a * b ** power)


def _log_rising_asymptotic(z, y):
    a = z + y
    ratio = y / z
    value = (z - 0.5) * np.log1p(ratio) + y * np.log(a) - y
    value += _inv_pow_diff(a, z, 1) / 12.0
    value -= _inv_pow_diff(a, z, 3) / 360.0
    value += _inv_pow_diff(a, z, 5) / 1260.0
    return value


def _reciprocal_rising_asymptotic(z, y):
    a = z + y
    value = np.log1p(y / z)
    value -= _inv_pow_diff(a, z, 1) / 2.0
    value -= _inv_pow_diff(a, z, 2) / 12.0
    value += _inv_pow_diff(a, z, 4) / 120.0
    value -= _inv_pow_diff(a, z, 6) / 252.0
    return value


def _special(z, y, exact, asymptotic):
    out = np.zeros(z.shape)
    live = y > 0
    large = live & (z > ASYMPTOTIC_THRESHOLD)
    small = live & ~large
    out[small] = exact(z[small], y[small])
    out[large] = asymptotic(z[large], y[large].astype(float))
    return out


def log_rising(z, y, method="special"):
    """Sum ``log(z + l)`` over ``l = 0 .. y-1``, elementwise."""
    _check_method(method)
    z, y = _broadcast(z, y)
    if method == "loop":
        return _loop(z, y, lambda zz, l: np.log(zz + l))
    return _special(z, y, lambda zz, yy: gammaln(zz + yy) - gammaln(zz), _log_rising_asymptotic)


def reciprocal_rising(z, y, method="special"):
    """Sum ``1 / (z + l)`` over ``l = 0 .. y-1``, elementwise."""
    _check_method(method)
    z, y = _broadcast(z, y)
    if method == "loop":
        return _loop(z, y, lambda zz, l: 1.0 / (zz + l))
    return _special(z, y, lambda zz, yy: digamma(zz + yy) - digamma(zz), _reciprocal_rising_asymptotic)


def ratio_rising(z, y, method="special"):
    """Sum ``z / (z + l)`` over ``l = 0 .. y-1``, elementwise."""
    _check_method(method)
    z, y = _broadcast(z, y)
    if method == "loop":
        return _loop(z, y, lambda zz, l: zz / (zz + l))
    return z * reciprocal_rising(z, y, method=method)
