import os

from fastmcp import FastMCP
from fastmcp.utilities.logging import get_logger

from src.middleware.custom_middleware import register_middleware
from src.prompts.analysis_prompts import register_prompts
from src.resources.report_resources import register_resources
from src.tools.sensing_tools import register_tools

logger = get_logger("server")

REPORTS_DIR = os.path.join("data", "reports")


def create_server(reports_dir: str = REPORTS_DIR) -> FastMCP:
    # Ensure report directory exists
    os.makedirs(reports_dir, exist_ok=True)

    mcp = FastMCP("RandomFilterSensing")

    register_middleware(mcp)
    register_tools(mcp, reports_dir)
    register_resources(mcp, reports_dir)
    register_prompts(mcp)
    return mcp


def main():
    mcp = create_server()

    logger.info("Random-filter sensing server, version 0.1.0")
    logger.info("Report directory: %s", REPORTS_DIR)

    # Start MCP server (automatically handles stdio/http based on environment)
    mcp.run()


if __name__ == "__main__":
    main()
