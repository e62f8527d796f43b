"""Chart-based numerics for projective connections, Thomas symbols and densities."""

__version__ = "0.1.0"
