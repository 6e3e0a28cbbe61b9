"""
Prompts Module

Contains MCP prompt definitions for experiment planning and report analysis.
Prompts provide templates that can be used to guide AI conversations.
"""

from .analysis_prompts import register_prompts

__all__ = [
    "register_prompts",
]

# Prompt names for reference
AVAILABLE_PROMPTS = [
    "experiment_design_assistant",
    "phase_transition_analysis",
]
