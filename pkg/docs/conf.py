# Sphinx configuration for the gestaltbind docs (Markdown pages rendered with MyST).

project = 'gestaltbind'
copyright = '2026, gestaltbind developers'
author = 'gestaltbind developers'
release = '0.1.0'

extensions = ['myst_parser']

source_suffix = {
    '.rst': 'restructuredtext',
    '.md': 'markdown',
}

exclude_patterns = ['_build', '.DS_Store']

html_theme = 'sphinx_book_theme'
html_theme_options = {
    "show_toc_level": 2,
    "show_navbar_depth": 2,
    "collapse_navigation": False,
}
