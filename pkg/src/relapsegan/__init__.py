"""Relapse prediction from comment histories.

Comment histories become two-channel emotion images, which a small
semi-supervised GAN classifies as relapsed or abstinent.
"""
from .corpus import Label

__version__ = "0.1.0"

__all__ = ["Label", "__version__"]
