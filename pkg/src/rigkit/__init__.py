"""Resource-interaction graphs from Linux audit logs."""

__version__ = "0.1.0"
