# Sphinx configuration of the phasecav documentation.
#
# Build with: sphinx-build -b html docs/source docs/build

import os
import sys
import sphinx_bootstrap_theme
sys.path.insert(0, os.path.abspath('../..'))

from phasecav.__about__ import __version__

# -- Project information -----------------------------------------------------

project = 'phasecav'
copyright = '2026, Duncan Eddy'
author = 'Duncan Eddy'

version = ''
release = __version__

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.mathjax',
    'sphinx.ext.autosectionlabel',
    'sphinxcontrib.napoleon',
]

# Google style docstrings only
napoleon_google_docstring = True
napoleon_numpy_docstring = False

autodoc_member_order = 'bysource'

source_suffix = '.rst'
master_doc = 'index'
exclude_patterns = []
html_show_sourcelink = False

# -- Options for HTML output -------------------------------------------------

html_theme = 'bootstrap'
html_theme_path = sphinx_bootstrap_theme.get_html_theme_path()
html_theme_options = {
    'bootswatch_theme': 'united',
    'bootstrap_version': '3',
    'navbar_sidebarrel': False,
    'globaltoc_depth': 1,
}

htmlhelp_basename = 'phasecavdoc'

man_pages = [
    (master_doc, 'phasecav', 'phasecav Documentation', [author], 1)
]
