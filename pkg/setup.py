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
"""Setup for countsift."""
from setuptools import setup

version = "0.1.0"
README = open('README.rst', 'r').read()

setup(name="countsift",
      version=version,
      description='Sparse group lasso regularized multivariate count regression',
      long_description=README,
      long_description_content_type='text/x-rst',
      author='The Countsift Developers',
      classifiers=["Development Status :: 3 - Alpha",
                   "Intended Audience :: Science/Research",
                   "License :: OSI Approved :: GNU General Public License v3 " +
                   "or later (GPLv3+)",
                   "Operating System :: OS Independent",
                   "Programming Language :: Python",
                   "Topic :: Scientific/Engineering"],
      packages=['countsift', 'countsift.tests', 'countsift.tests.unittests',
                'countsift.tests.integrationtests', 'countsift.tests.regressiontests'],
      keywords=["count regression", "dirichlet-multinomial", "sparse group lasso", "variable selection"],
      zip_safe=False,
      python_requires='>=3.8',
      install_requires=['numpy>=1.20', 'scipy>=1.6', 'pandas>=1.2'],
      entry_points={'console_scripts': ['countsift=countsift.cli:main']},
      tests_require=['pytest']
      )
