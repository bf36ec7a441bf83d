"""
Schrödinger map numerical laboratory.

Spectral evolution of maps into the sphere, caloric gauge extraction,
space-time norm evaluation and linear-estimate probes.
"""

__version__ = "0.1.0"
