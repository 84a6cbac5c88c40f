"""Secrecy-rate optimization for the two-user full-duplex MISO wiretap channel."""
__version__ = "0.1.0"
