"""Bounded model checking of a ZK-rollup L1 contract with forced queue,
blacklisting and timed upgrades."""

__version__ = "0.1.0"
