"""
Command-line entry point for simulate, serve, replay, export and stats.
"""

from .cli import main
from .output import write_output

__all__ = ['main', 'write_output']
