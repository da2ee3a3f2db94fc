"""
NapSelect - Diverse target-domain LiDAR frame selection from neuron activation patterns.
"""

__version__ = "1.0.0"
