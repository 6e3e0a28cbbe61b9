"""
Tools Module

Contains MCP tool definitions for sampling, measuring, recovering and sweeping.
Tools provide executable functions that clients can call to perform actions.
"""

from .sensing_tools import register_tools

__all__ = [
    "register_tools",
]

# Tool names for reference
AVAILABLE_TOOLS = [
    "sample_filter",
    "measure_signal",
    "recover_signal",
    "certify_instance",
    "run_diagnostics",
    "run_phase_transition",
    "get_report_count",
]
