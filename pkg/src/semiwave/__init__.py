"""Critical speeds, semi-wavefront profiles and dichotomy diagnostics for
monostable nonlocal equations reduced to scalar convolution equations."""

__version__ = "0.1.0"
