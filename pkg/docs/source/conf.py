"""Sphinx configuration for the econform documentation."""

import os
import sys

sys.path.insert(0, os.path.abspath("../../src/"))

project = "econform"

extensions = [
    "m2r2",
    "sphinx.ext.autodoc",
    "sphinx.ext.doctest",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx_autodoc_typehints",
]

source_suffix = [".rst", ".md"]
templates_path = ["_templates"]
exclude_patterns = []

# docstrings use Google style with "Examples:" blocks holding doctests
napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_use_admonition_for_examples = True

autodoc_typehints = "none"
autodoc_member_order = "bysource"
always_document_param_types = True
add_module_names = False
typehints_fully_qualified = False

# ScoreVector, ExpertScoreMatrix and friends wrap numpy arrays, and the
# solvers come from scipy.optimize
intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
    "pandas": ("https://pandas.pydata.org/docs/", None),
}

doctest_global_setup = "import numpy as np"

html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
