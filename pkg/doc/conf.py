# Sphinx configuration for the mmwtcp documentation.

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

import mmwtcp  # noqa: E402

project = 'mmwtcp'
copyright = '2026, mmwtcp developers'
author = 'mmwtcp developers'
version = mmwtcp.__version__
release = mmwtcp.__version__

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'IPython.sphinxext.ipython_console_highlighting',
    'IPython.sphinxext.ipython_directive',
]
# docstrings follow the numpydoc layout
napoleon_google_docstring = False
napoleon_numpy_docstring = True
autodoc_member_order = 'bysource'

master_doc = 'index'
exclude_patterns = ['_build']

html_theme = 'alabaster'
