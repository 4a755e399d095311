"""NER bridge process: line-delimited JSON over stdio, protocol version 1."""

__version__ = "0.1.0"

PROTOCOL_NAME = "tagforge-bridge"
PROTOCOL_VERSION = 1
