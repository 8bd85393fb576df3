"""Energy-efficient multi-BS power allocation for UAVs under location-dependent
outage targets."""

__version__ = "0.1.0"
