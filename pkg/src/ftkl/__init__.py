"""Model Bergman kernels, normal forms and spectral gaps at finite-type points."""

__version__ = "0.1.0"
