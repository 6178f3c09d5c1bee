from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from schemqa.backends import ScriptedBackend
from schemqa.config import load_config
from schemqa.corpus import Chunk, ChunkKind, load_bundle
from schemqa.engine import build_engine
from schemqa.prompts import TemplateRegistry
from schemqa.retrieval import IndexedPassage, PassageHit

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture(scope="session")
def manifest_path() -> Path:
    return FIXTURES / "bundle" / "manifest.json"


@pytest.fixture()
def bundle(manifest_path):
    return load_bundle(manifest_path)


@pytest.fixture(scope="session")
def templates() -> TemplateRegistry:
    return TemplateRegistry()


def fixture_engine_config(extra: dict | None = None):
    """The deterministic test engine config: fixture corpus + scripted backend."""
    overrides = {
        "corpus": {
            "manifest": str(FIXTURES / "bundle" / "manifest.json"),
            "window_words": 60,
            "stride_words": 30,
        },
        "backend": {
            "kind": "scripted",
            "fixtures": str(FIXTURES / "backend_fixtures.jsonl"),
            "strict": True,
        },
        "tools": {"fixtures_dir": str(FIXTURES / "tool_fixtures")},
    }
    if extra:
        for section, values in extra.items():
            overrides.setdefault(section, {}).update(values)
    return load_config(None, env={}, overrides=overrides)


@pytest.fixture()
def engine():
    return build_engine(fixture_engine_config())


def make_chunk(text: str, doc_id: str = "doc", seq: int = 0, kind: ChunkKind = ChunkKind.PFD) -> Chunk:
    words = text.split()
    return Chunk(doc_id=doc_id, seq=seq, word_start=0, word_end=len(words), text=text, kind=kind)


def make_hit(text: str, doc_id: str = "doc", seq: int = 0, sim: float = 0.0, prob: float = 0.0) -> PassageHit:
    chunk = make_chunk(text, doc_id=doc_id, seq=seq)
    return PassageHit(
        passage=IndexedPassage(chunk=chunk, embedding=np.zeros(4)), sim=sim, prob=prob
    )


def scripted(**handlers) -> ScriptedBackend:
    """Shorthand for a lenient scripted backend with per-kind handlers."""
    return ScriptedBackend(handlers=handlers)
