"""fixcam-mot - Online multi-object tracking for static surveillance cameras."""

__version__ = "0.1.0"
