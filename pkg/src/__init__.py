"""
Schrödinger map laboratory sources.

The library lives in smaplab; generate_scenarios, export_json and
validate_json are command-line helpers.
"""

__version__ = "0.1.0"
