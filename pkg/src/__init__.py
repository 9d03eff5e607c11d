"""
Continuous-variable MDI-QKD rate, threshold and simulation toolkit.
"""

__version__ = "0.1.0"
