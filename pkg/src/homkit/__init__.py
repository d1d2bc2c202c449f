"""Executable toolkit for Datalog with existentials: chase evaluation,
program classification, right-adjoint constructions, homomorphism dualities,
uniquely characterizing example sets, and tree automata."""

__version__ = "0.1.0"
