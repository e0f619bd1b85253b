"""Grid-world exploration workbench: lidar mapping, frontier baseline and
fully convolutional Q-network decision policies."""

__version__ = "0.1.0"
