"""
Core components of the shift audit toolkit
"""
