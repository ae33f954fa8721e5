"""Handlers package initialization."""
from .command_handler import Runtime, cli

__all__ = ['cli', 'Runtime']
