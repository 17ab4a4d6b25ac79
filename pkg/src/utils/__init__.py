"""
Utility functions and helpers for the shift audit toolkit
"""
