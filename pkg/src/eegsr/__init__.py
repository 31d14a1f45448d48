"""EEG channel super-resolution toolkit.

Reconstructs unmeasured scalp electrodes from a low-density subset with a
spatiotemporal attention model, and ships classical interpolation baselines,
synthetic data generation, evaluation metrics, and a downstream band-feature
classification pipeline. Built on a small float64 autodiff engine so every
gradient is finite-difference checkable.
"""

__version__ = "0.1.0"
