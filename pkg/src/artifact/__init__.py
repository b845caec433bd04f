"""Learning approximately revenue-optimal multi-item auctions from samples."""

__version__ = "0.1.0"
