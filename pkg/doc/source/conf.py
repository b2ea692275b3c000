# -*- coding: utf-8 -*-
#
# countsift documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing dir.

import sys, os

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here.
sys.path.insert(0, os.path.abspath('../../'))

# -- General configuration -----------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.doctest', 'sphinx.ext.intersphinx',
              'sphinx.ext.napoleon', 'sphinx.ext.viewcode', 'sphinx.ext.mathjax']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'countsift'
copyright = u'2026, Countsift Developers'

version = '0.1'
release = '0.1.0'

exclude_patterns = []
pygments_style = 'sphinx'

# -- Options for HTML output ---------------------------------------------------

html_theme = 'default'
html_static_path = ['_static']
htmlhelp_basename = 'countsiftdoc'

# -- Options for LaTeX output --------------------------------------------------

latex_elements = {}
latex_documents = [
    ('index', 'countsift.tex', u'Countsift Documentation',
     u'Countsift Developers', 'manual'),
    ]

# -- Options for manual page output --------------------------------------------

man_pages = [
    ('index', 'countsift', u'Countsift Documentation',
     [u'Countsift Developers'], 1)
]

# -- Options for Texinfo output ------------------------------------------------

texinfo_documents = [
    ('index', 'countsift', u'Countsift Documentation', u'Countsift Developers',
     'countsift', 'Sparse group lasso regression for multivariate count data.',
     'Miscellaneous'),
    ]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'pandas': ('https://pandas.pydata.org/docs', None),
}
