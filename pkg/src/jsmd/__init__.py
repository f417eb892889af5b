"""Joint spatial mode distributions of down-converted photon pairs in the LG basis."""

__version__ = "0.1.0"
