from typing import Annotated, Any, Dict, List, Optional
from typing_extensions import TypedDict
import operator

from scatter_workbench.ForwardSolver import FarFieldTensor
from scatter_workbench.SamplingIndicators import IndicatorField
from scatter_workbench.Settings import RunConfig


class InputState(TypedDict):
    config: RunConfig
    out_dir: str
    archive_in: Optional[str]


class OutputState(TypedDict):
    archive: str
    noisy_archive: Optional[str]
    exports: Dict[str, Dict[str, str]]
    summary: Dict[str, Any]
    steps: Annotated[List[str], operator.add]


class PipelineState(InputState, OutputState):
    tensor: FarFieldTensor
    fields: Dict[str, IndicatorField]
