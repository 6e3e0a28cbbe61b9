"""
Resources Module

Contains MCP resource definitions for stored experiment reports.
Resources provide read-only access to data that clients can consume.
"""

from .report_resources import register_resources

__all__ = [
    "register_resources",
]

# Resource URIs for reference
AVAILABLE_RESOURCES = [
    "data://reports",
]

# Resource templates (parameterized resources)
AVAILABLE_RESOURCE_TEMPLATES = [
    "data://reports/{report_name}",
    "data://reports/{report_name}/calibration",
]
