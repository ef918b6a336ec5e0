"""fixcam-mot tests."""
