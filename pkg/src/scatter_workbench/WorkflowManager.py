import logging
from pathlib import Path

from langgraph.graph import END, StateGraph

from scatter_workbench.ArchiveManager import ArchiveManager
from scatter_workbench.errors import DatasetError
from scatter_workbench.ForwardSolver import ForwardProblem, generate_dataset
from scatter_workbench.SamplingIndicators import SINGLE_DIRECTION, add_noise, indicator, summarize, truth_metrics
from scatter_workbench.State import InputState, OutputState, PipelineState

logger = logging.getLogger(__name__)


class ReconstructionSteps:
    """Graph nodes of the reconstruction pipeline; each returns a partial state update."""

    def _archives(self, state: dict) -> ArchiveManager:
        return ArchiveManager(state.get("out_dir") or state["config"].output.dir)

    def generate_dataset(self, state: dict) -> dict:
        """Load the input archive, or solve the forward problems of the configuration."""
        config = state["config"]
        archives = self._archives(state)
        if state.get("archive_in"):
            tensor = archives.load_tensor(str(Path(state["archive_in"]).resolve()))
            return {"tensor": tensor, "archive": state["archive_in"], "steps": ["load_archive"]}
        problem = ForwardProblem(config.scatterer.build(), config.discretization.build())
        name = config.output.archive
        try:
            tensor = generate_dataset(
                problem.config,
                problem.disc,
                config.dataset.angles,
                config.dataset.wavenumbers,
                config.dataset.directions,
                threads=config.threads,
                problem=problem,
                provenance={"config_hash": config.hash},
            )
        except DatasetError:
            archives.discard(name)
            raise
        path = archives.save_tensor(tensor, name)
        return {"tensor": tensor, "archive": str(path), "steps": ["generate_dataset"]}

    def add_noise(self, state: dict) -> dict:
        config = state["config"]
        noisy = add_noise(state["tensor"], config.noise)
        stem = Path(config.output.archive).stem
        path = self._archives(state).save_tensor(noisy, f"{stem}_noisy.json")
        return {"tensor": noisy, "noisy_archive": str(path), "steps": ["add_noise"]}

    def reconstruct(self, state: dict) -> dict:
        config = state["config"]
        grid = config.grid.build()
        archives = self._archives(state)
        fields, exports = {}, {}
        for kind in config.indicators:
            direction = config.direction_index if kind in SINGLE_DIRECTION else None
            field = indicator(kind, state["tensor"], grid, direction, config.threads)
            fields[kind] = field
            exports[kind] = archives.save_field(field)
        return {"fields": fields, "exports": exports, "steps": ["reconstruct"]}

    def summarize(self, state: dict) -> dict:
        config = state["config"]
        scatterer = config.scatterer.build()
        summary = {
            "config_hash": config.hash,
            "archive": state.get("archive"),
            "noise": state["tensor"].noise,
            "indicators": {},
        }
        for kind, field in state["fields"].items():
            entry = summarize(field)
            entry.update(truth_metrics(field, scatterer.obstacle, scatterer.medium))
            summary["indicators"][kind] = entry
        self._archives(state).save_report(summary, "summary.json")
        return {"summary": summary, "steps": ["summarize"]}

    def route_noise(self, state: dict) -> str:
        noise = state["config"].noise
        if noise is None or state["tensor"].noise is not None:
            return "reconstruct"
        return "add_noise"


class WorkflowManager:
    def __init__(self):
        self.steps = ReconstructionSteps()

    def create_workflow(self) -> StateGraph:
        """Create and configure the workflow graph."""
        workflow = StateGraph(PipelineState, input=InputState, output=OutputState)

        workflow.add_node("generate_dataset", self.steps.generate_dataset)
        workflow.add_node("add_noise", self.steps.add_noise)
        workflow.add_node("reconstruct", self.steps.reconstruct)
        workflow.add_node("summarize", self.steps.summarize)

        workflow.add_conditional_edges(
            "generate_dataset",
            self.steps.route_noise,
            {"add_noise": "add_noise", "reconstruct": "reconstruct"},
        )
        workflow.add_edge("add_noise", "reconstruct")
        workflow.add_edge("reconstruct", "summarize")
        workflow.add_edge("summarize", END)
        workflow.set_entry_point("generate_dataset")

        return workflow

    def returnGraph(self):
        return self.create_workflow().compile()

    def run_pipeline(self, config, out_dir: str = None, archive_in: str = None) -> dict:
        """Run dataset -> noise -> reconstruct -> summary and return the final state."""
        app = self.returnGraph()
        result = app.invoke({"config": config, "out_dir": out_dir or config.output.dir, "archive_in": archive_in})
        logger.info("pipeline finished: %s", " -> ".join(result["steps"]))
        return result
