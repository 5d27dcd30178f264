"""Iris presentation attack detection with pixel-wise binary supervision.

Three network variants share a truncated DenseNet121 feature extractor:

``baseline``
    average pooling and a single fully-connected binary output.
``pbs``
    a 1x1 convolution producing a supervised intermediate map, then the
    binary output over the flattened map.
``apbs``
    spatial attention on three backbone levels, multi-scale fusion, then the
    same map and binary output as ``pbs``.
"""

__version__ = "0.1.0"
