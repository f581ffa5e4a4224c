"""Privacy-preserving wrist-gesture communication pipeline.

Segmentation of pause-delimited motion traces, temporal/spectral feature
extraction, and a three-layer gesture classifier that trains and infers
either in plaintext or entirely over additively secret-shared fixed-point
tensors, plus the supporting multi-party runtime, an LWE bit-encryption
primitive, vocabulary clustering, and covert feedback codecs.
"""

__version__ = "0.1.0"
