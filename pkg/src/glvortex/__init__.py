"""2D Ginzburg-Landau energies with divergence/curl penalization under tangential anchoring."""

__version__ = "0.1.0"
