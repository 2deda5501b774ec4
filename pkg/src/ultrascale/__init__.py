"""Weight-function calculus, Fourier seminorms and generalized-function nets."""

__version__ = "0.1.0"
