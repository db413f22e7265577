"""adsplice: detect commercial intervals in a linear video stream, replace them
with targeted ads, and deliver the result as a packetized multiplex over
WebSocket, driven by a REST job API."""

__version__ = "0.1.0"
