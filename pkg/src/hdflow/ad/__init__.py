"""Reverse-mode autodiff: Tape/Var engine, operation library, Adam."""

from . import ops
from .engine import ShapeError, Tape, TapeError, Var
from .optim import Adam, adam_step

__all__ = ["Tape", "Var", "TapeError", "ShapeError", "ops", "Adam", "adam_step"]
