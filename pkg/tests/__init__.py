"""
Unit tests for the globalctl package.
"""
