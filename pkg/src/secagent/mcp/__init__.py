from .client import McpError, McpManager, McpServerHandle

__all__ = ["McpError", "McpManager", "McpServerHandle"]
