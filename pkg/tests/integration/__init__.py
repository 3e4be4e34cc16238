"""Integration tests for the hodg CLI and full solves"""
