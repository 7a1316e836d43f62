"""Simulation, control and energy-optimal actuation for a caged coaxial tilt-rotor vehicle."""

from tiltcage.params import DragParams, RotorParams, VehicleParams, load_params

__all__ = ["DragParams", "RotorParams", "VehicleParams", "load_params"]
__version__ = "0.1.0"
