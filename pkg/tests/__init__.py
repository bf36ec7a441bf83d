"""
Test suite for the Schrödinger map laboratory.

Unit tests per package run on small grids; test_run_lab drives the runner
end to end.
"""
