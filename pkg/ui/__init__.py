"""
Read-only Flask JSON API over the reading store.
"""

from .app import create_app

__all__ = ['create_app']
