"""
Test package for hodg

- Unit tests for the numerical modules and the harness
- Integration tests for CLI commands and reference convergence runs
"""
