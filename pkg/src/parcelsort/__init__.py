"""Multi-robot parcel sorting: bin assignment and decentralized lifelong routing."""

__version__ = "0.1.0"
