"""featsynth: self-supervised semantic image synthesis by rearranging the
feature maps of a small unconditional generator according to proxy masks."""

__version__ = "0.1.0"
