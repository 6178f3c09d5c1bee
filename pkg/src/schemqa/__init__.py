"""Agentic retrieval-augmented question answering over process-engineering
document corpora (process flow diagrams and piping & instrumentation
diagrams)."""

from .config import EngineConfig, load_config
from .engine import AskOutcome, Engine, build_engine
from .orchestrator import FinalAnswer, QueryRequest, Task, Verdict

__version__ = "0.1.0"

__all__ = [
    "AskOutcome",
    "Engine",
    "EngineConfig",
    "FinalAnswer",
    "QueryRequest",
    "Task",
    "Verdict",
    "build_engine",
    "load_config",
    "__version__",
]
