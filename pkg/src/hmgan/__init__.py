"""Layer-ratio regularization for conditional GANs, with bounds, metrics and a toy harness."""
__version__ = "0.1.0"
