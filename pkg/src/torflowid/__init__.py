"""App identification from Tor-like traffic: PCAP ingestion, flow features,
classification and evaluation, plus a synthetic padded-traffic generator."""

__version__ = "0.1.0"
