"""Unit tests for hodg modules"""
