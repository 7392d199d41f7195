"""End-to-end run as a LangGraph state graph."""

from src.pipeline.state import PipelineState, PolicySummary
from src.pipeline.workflow import build_pipeline, compile_pipeline, run_pipeline

__all__ = ["PipelineState", "PolicySummary", "build_pipeline", "compile_pipeline", "run_pipeline"]
