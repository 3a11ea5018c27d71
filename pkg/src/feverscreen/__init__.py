"""Cross-spectral fever screening: thermal-to-visual synthesis, pose-aware
temperature compensation, and edge-vs-cloud deployment simulation."""

__version__ = "0.1.0"
