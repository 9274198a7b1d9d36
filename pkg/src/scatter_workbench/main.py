"""Deployment entry point: the compiled reconstruction graph for ``langgraph.json``.

Also runnable as ``python -m scatter_workbench.main``, which forwards to the CLI.
"""
import sys

from scatter_workbench.cli import main
from scatter_workbench.WorkflowManager import WorkflowManager

graph = WorkflowManager().returnGraph()

if __name__ == "__main__":
    sys.exit(main())
