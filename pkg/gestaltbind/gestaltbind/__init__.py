import os

presets_root = os.path.join(os.path.dirname(__file__), "presets")

__version__ = "0.1.0"
