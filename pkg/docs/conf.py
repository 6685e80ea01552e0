#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# pymixbf documentation build configuration file.

import os

suppress_warnings = ["image.nonlocal_uri"]

# -- General configuration ------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
    "sphinx.ext.napoleon",
]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3.8", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "scipy": ("https://docs.scipy.org/doc/scipy", None),
}

autodoc_member_order = "bysource"

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "pymixbf"
copyright = "2021, Daniel Nunes"
author = "Daniel Nunes"

# The short X.Y version.
version = "0.1.0"
release = version

language = None
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"

# -- Options for HTML output ----------------------------------------------

on_rtd = os.environ.get("READTHEDOCS", None) == "True"

if not on_rtd:  # only import and set the theme if we're building docs locally
    import sphinx_rtd_theme

    html_theme = "sphinx_rtd_theme"
    html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]

html_static_path = ["_static"]
htmlhelp_basename = "pymixbfdoc"

# -- Options for manual page output ---------------------------------------

man_pages = [(master_doc, "pymixbf", "pymixbf Documentation", [author], 1)]
