"""Multimodal deepfake detection pipeline.

Two detection agents (a visual CNN and an audio-visual semantic-consistency
network) are fused by a random-forest meta-classifier under stratified
cross-validation. Everything numerical is built on numpy arrays; tensors are
plain ndarrays in channels-last layout.
"""

__version__ = "0.1.0"
