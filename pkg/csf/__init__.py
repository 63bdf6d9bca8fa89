"""Cross-space spectral filters for deep graph convolution.

The package builds an attribute-based high-pass kernel, a topology-based
low-pass kernel and their fusion, and trains a deep graph-convolutional
classifier on top of the fused kernel.
"""

__version__ = '0.1.0'
