"""Three-player 5x5 Go with UCT, AlphaZero-style and Descent agents."""
__version__ = "0.1.0"
