import time

from fastmcp import FastMCP
from fastmcp.exceptions import ToolError
from fastmcp.server.middleware import Middleware, MiddlewareContext
from fastmcp.utilities.logging import get_logger

from ..harness.report import is_report_name
from ..sensing.spectral import MIN_DIMENSION, is_power_of_two

logger = get_logger(__name__)

COUNT_ARGUMENTS = ("sparsity", "m", "seeds", "trials_per_cell")


def _arguments(context: MiddlewareContext) -> dict:
    return getattr(context.message, "arguments", None) or {}


def _tool_name(context: MiddlewareContext) -> str:
    return getattr(context.message, "name", "unknown")


def check_arguments(arguments: dict) -> None:
    """Reject a bad dimension or a count below 1, including inside a nested ``config``."""
    nested = arguments.get("config")
    if isinstance(nested, dict):
        check_arguments(nested)
    n = arguments.get("n")
    if isinstance(n, int) and (n < MIN_DIMENSION or not is_power_of_two(n)):
        raise ToolError(f"n must be a power of two >= {MIN_DIMENSION}, got {n}")
    for key in COUNT_ARGUMENTS:
        value = arguments.get(key)
        if isinstance(value, int) and value < 1:
            raise ToolError(f"{key} must be at least 1, got {value}")


def register_middleware(mcp: FastMCP):
    class ValidationMiddleware(Middleware):
        """Validates tool inputs before execution."""
        async def on_call_tool(self, context: MiddlewareContext, call_next):
            check_arguments(_arguments(context))
            return await call_next(context)

    class LoggingMiddleware(Middleware):
        """Logs tool execution details."""
        async def on_call_tool(self, context: MiddlewareContext, call_next):
            name = _tool_name(context)
            start_time = time.perf_counter()
            logger.info("Tool %s called", name)
            try:
                result = await call_next(context)
            except Exception as e:
                logger.warning("Tool %s failed after %.2fs: %s", name, time.perf_counter() - start_time, e)
                raise
            logger.info("Tool %s completed successfully in %.2fs", name, time.perf_counter() - start_time)
            return result

    class SecurityMiddleware(Middleware):
        """Keeps report names inside the report store."""
        async def on_call_tool(self, context: MiddlewareContext, call_next):
            report_name = _arguments(context).get("report_name")
            if report_name is not None and not (isinstance(report_name, str) and is_report_name(report_name)):
                raise ToolError("report_name must use letters, digits, '-' or '_' only")
            return await call_next(context)

    # Register middleware with the server
    mcp.add_middleware(ValidationMiddleware())
    mcp.add_middleware(LoggingMiddleware())
    mcp.add_middleware(SecurityMiddleware())
