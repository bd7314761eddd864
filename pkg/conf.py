# Sphinx settings for the levsample API reference, built from the docstrings under src/levsample.
import os
import sys
sys.path.insert(0, os.path.abspath('./src/'))

project = 'levsample'
copyright = '2026, levsample developers'
author = 'levsample developers'
release = '0'

extensions = [
        "sphinx.ext.autodoc",
        "sphinx.ext.autosummary",
        "sphinx.ext.coverage",
        "sphinx.ext.napoleon",
]
# docstrings use :param: fields and plain text formulas
napoleon_google_docstring = False
autodoc_member_order = 'bysource'
autosummary_generate = True

exclude_patterns = ['_build', 'examples', 'tests', 'Thumbs.db', '.DS_Store']

html_theme = 'alabaster'
html_theme_options = {
    'description': 'Leverage-based subsampling estimators for least squares',
}
