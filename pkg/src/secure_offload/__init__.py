"""Secure task offloading for multi-UAV edge networks with masked multi-agent DDQN."""

__version__ = "0.1.0"
