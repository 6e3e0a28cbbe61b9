"""
Source modules for the random-filter sensing toolkit.

Contains the numerical library, the experiment harness and CLI, and the MCP
tools, resources, prompts and middleware that expose them.
"""
