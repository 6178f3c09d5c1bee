"""Versioned prompt template registry.

Templates are plain-text files with ``{placeholder}`` slots, loaded from a
directory that also carries a VERSION file. Rendering with an unbound
placeholder fails loudly; the version string feeds fixture keys so
recorded sessions survive cosmetic template edits only when the version
is left unchanged.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from pathlib import Path

from .errors import TemplateError

DEFAULT_TEMPLATE_DIR = Path(__file__).parent / "templates"

# Template file stem per prompt kind.
TEMPLATE_FILES = {
    "CAN": "can.txt",
    "CAN_REVISED": "can_revised.txt",
    "SUM": "sum.txt",
    "VAL": "val.txt",
    "RANK": "rank.txt",
    "ROUTE": "route.txt",
    "REACT": "react.txt",
    "JUDGE": "judge.txt",
    "ALT_TEXT": "alt_text.txt",
}


@dataclass(frozen=True)
class PromptTemplate:
    kind: str
    template_text: str
    version: str

    def placeholders(self) -> set[str]:
        names = set()
        for _, name, _, _ in string.Formatter().parse(self.template_text):
            if name:
                names.add(name)
        return names

    def render(self, **values: str) -> str:
        missing = self.placeholders() - set(values)
        if missing:
            raise TemplateError(
                f"template {self.kind} (v{self.version}) leaves placeholders unbound: "
                + ", ".join(sorted(missing))
            )
        return self.template_text.format(**{k: str(v) for k, v in values.items()})


class TemplateRegistry:
    """All prompt templates for one engine run, loaded once."""

    def __init__(self, template_dir: str | Path | None = None) -> None:
        self.dir = Path(template_dir) if template_dir else DEFAULT_TEMPLATE_DIR
        if not self.dir.is_dir():
            raise TemplateError(f"template directory not found: {self.dir}")
        version_file = self.dir / "VERSION"
        self.version = version_file.read_text(encoding="utf-8").strip() if version_file.exists() else "1"
        self._templates: dict[str, PromptTemplate] = {}
        for kind, filename in TEMPLATE_FILES.items():
            path = self.dir / filename
            if not path.exists():
                # Per-run override dirs may carry a subset; fall back to defaults.
                path = DEFAULT_TEMPLATE_DIR / filename
            if not path.exists():
                raise TemplateError(f"missing template file for {kind}: {filename}")
            self._templates[kind] = PromptTemplate(
                kind=kind, template_text=path.read_text(encoding="utf-8"), version=self.version
            )

    def get(self, kind: str) -> PromptTemplate:
        try:
            return self._templates[kind]
        except KeyError as exc:
            raise TemplateError(f"no template registered for kind {kind!r}") from exc

    def render(self, kind: str, **values: str) -> str:
        return self.get(kind).render(**values)


def render_passages(texts: list[str]) -> str:
    """Numbered passage block shared by the candidate/summary prompts."""
    return "\n".join(f"[{i}] {text}" for i, text in enumerate(texts, start=1))


def render_choices(candidates: list[str]) -> str:
    """Candidates as '(a) ... (b) ...' in presentation order."""
    return " ".join(f"({chr(ord('a') + i)}) {text}" for i, text in enumerate(candidates))
