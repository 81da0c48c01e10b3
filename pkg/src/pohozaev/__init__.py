"""Pohozaev MMAP: radial ground states of -Δu + λu = f(u) in R³."""

__version__ = "0.1.0"
