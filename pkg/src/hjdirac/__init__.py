"""Verification toolkit for slashed-operator algebra on local frames,
Hamilton-Jacobi field checks, canonical particle dynamics, and the
statistical ensembles built on top of them."""

__version__ = "0.1.0"
