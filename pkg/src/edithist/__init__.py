"""Edit-history mining and type prediction for Wikibase-style knowledge graphs."""

__version__ = "0.1.0"
