"""Co-trained two-view engine for discovering new relation/event types."""

__version__ = "0.1.0"
