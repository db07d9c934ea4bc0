"""Energy-efficient metro timetables by two linear programs."""

__version__ = "0.1.0"
