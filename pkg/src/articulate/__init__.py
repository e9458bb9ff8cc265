"""Articulated-object joint perception, active viewpoint selection and
command-driven point-cloud manipulation on procedural scenes."""

__version__ = "0.1.0"
