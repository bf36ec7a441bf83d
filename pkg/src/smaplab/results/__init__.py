"""
Result handling in four phases: extract, transform, validate, load.
"""
