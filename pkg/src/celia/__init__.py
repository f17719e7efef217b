"""Celia: a streaming spatial-relations engine for a watched workspace.

Detects and tracks objects and people, maintains ownership and spatial facts
(in, on, near, next to, belongs, last touched by), and answers natural
language "where is ..." questions over an HTTP service.
"""

__version__ = "0.1.0"
