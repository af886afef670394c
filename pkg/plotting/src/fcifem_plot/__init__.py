"""Figure rendering for fcifem experiment outputs."""

from .plots import render

__version__ = "0.1.0"
