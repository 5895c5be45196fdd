"""Contact graphs from WLAN association logs, centrality-ranked superspreader
candidates and their validation by SEIR quarantine simulation."""

__version__ = "0.1.0"
