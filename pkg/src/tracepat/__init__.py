"""Pattern mining over long-horizon LLM binary-analysis traces."""

__version__ = "0.1.0"
