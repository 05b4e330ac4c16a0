"""
rnd - Radon-Nikodym derivative estimation with Nystrom-subsampled Tikhonov regularization.
"""

__version__ = "0.1.0"
