"""Document bundle ingestion and sliding-window chunking.

A bundle is a manifest (JSON) plus pre-extracted text files and image
entries with alternative-text descriptions. Chunking splits each document
into overlapping word windows; image alt-texts are indexed whole as
single chunks so diagrams are retrievable by content.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DuplicateId, InvalidChunkParams, MalformedManifest, MissingFile

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_WORDS = 180
DEFAULT_STRIDE_WORDS = 90


class DocumentKind(str, Enum):
    PFD = "PFD"
    PID = "PID"


class ChunkKind(str, Enum):
    PFD = "PFD"
    PID = "PID"
    IMAGE_ALT = "IMAGE_ALT"
    MEMORY = "MEMORY"  # synthetic passages built from recalled QA turns


@dataclass(frozen=True)
class ImageRecord:
    id: str
    file_ref: str
    alt_text: str


@dataclass(frozen=True)
class DocumentRecord:
    id: str
    kind: DocumentKind
    title: str
    text: str
    images: tuple[ImageRecord, ...] = ()


@dataclass(frozen=True)
class DocumentBundle:
    documents: tuple[DocumentRecord, ...]
    kind_counts: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class Chunk:
    """One retrieval unit: a word span of a document or an image alt-text."""

    doc_id: str
    seq: int
    word_start: int
    word_end: int
    text: str
    kind: ChunkKind

    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.seq)

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "seq": self.seq,
            "word_start": self.word_start,
            "word_end": self.word_end,
            "text": self.text,
            "kind": self.kind.value,
        }

    @staticmethod
    def from_record(rec: dict) -> "Chunk":
        return Chunk(
            doc_id=rec["doc_id"],
            seq=int(rec["seq"]),
            word_start=int(rec["word_start"]),
            word_end=int(rec["word_end"]),
            text=rec["text"],
            kind=ChunkKind(rec["kind"]),
        )


def load_bundle(manifest_path: str | Path) -> DocumentBundle:
    """Load a document bundle from a JSON manifest.

    The manifest schema is
    ``{"documents": [{"id", "kind": "PFD"|"PID", "title", "text_file",
    "images": [{"id", "file", "alt_text"}]}]}`` with file paths relative
    to the manifest's directory. Document order is preserved.
    """
    path = Path(manifest_path)
    if not path.exists():
        raise MissingFile(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"cannot parse manifest {path}: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("documents"), list):
        raise MalformedManifest("manifest must be an object with a 'documents' list")

    base = path.parent
    documents: list[DocumentRecord] = []
    seen_ids: set[str] = set()
    kind_counts: dict[str, int] = {}
    for entry in raw["documents"]:
        if not isinstance(entry, dict):
            raise MalformedManifest("document entries must be objects")
        try:
            doc_id = str(entry["id"])
            kind = DocumentKind(entry["kind"])
            title = str(entry.get("title", doc_id))
            text_file = str(entry["text_file"])
        except KeyError as exc:
            raise MalformedManifest(f"document entry missing key {exc}") from exc
        except ValueError as exc:
            raise MalformedManifest(f"bad document kind in {entry.get('id')!r}: {exc}") from exc
        if doc_id in seen_ids:
            raise DuplicateId(f"duplicate document id {doc_id!r}")
        seen_ids.add(doc_id)

        text_path = base / text_file
        if not text_path.exists():
            raise MissingFile(f"text file for {doc_id!r} not found: {text_path}")
        text = text_path.read_text(encoding="utf-8")

        images: list[ImageRecord] = []
        image_ids: set[str] = set()
        for img in entry.get("images", []):
            if not isinstance(img, dict):
                raise MalformedManifest(f"image entries of {doc_id!r} must be objects")
            try:
                img_id = str(img["id"])
                file_ref = str(img["file"])
            except KeyError as exc:
                raise MalformedManifest(f"image entry of {doc_id!r} missing key {exc}") from exc
            if img_id in image_ids:
                raise DuplicateId(f"duplicate image id {img_id!r} in document {doc_id!r}")
            image_ids.add(img_id)
            if not (base / file_ref).exists():
                raise MissingFile(f"image file for {doc_id!r}/{img_id!r} not found: {base / file_ref}")
            images.append(ImageRecord(id=img_id, file_ref=file_ref, alt_text=str(img.get("alt_text", ""))))

        documents.append(DocumentRecord(id=doc_id, kind=kind, title=title, text=text, images=tuple(images)))
        kind_counts[kind.value] = kind_counts.get(kind.value, 0) + 1

    return DocumentBundle(documents=tuple(documents), kind_counts=kind_counts)


def chunk_document(
    doc: DocumentRecord,
    window_words: int = DEFAULT_WINDOW_WORDS,
    stride_words: int = DEFAULT_STRIDE_WORDS,
) -> list[Chunk]:
    """Split a document's text into overlapping word-window chunks.

    Windows start at 0, stride, 2*stride, ... and span
    ``[start, min(start + window, word_count))``; emission stops with the
    first window whose end reaches the text's end, so every word index is
    covered and consecutive chunks overlap by window - stride words.
    """
    if window_words <= 0 or stride_words <= 0 or stride_words > window_words:
        raise InvalidChunkParams(
            f"need 0 < stride <= window, got window={window_words} stride={stride_words}"
        )
    words = doc.text.split()
    total = len(words)
    if total == 0:
        return []
    kind = ChunkKind(doc.kind.value)
    chunks: list[Chunk] = []
    start = 0
    seq = 0
    while True:
        end = min(start + window_words, total)
        chunks.append(
            Chunk(
                doc_id=doc.id,
                seq=seq,
                word_start=start,
                word_end=end,
                text=" ".join(words[start:end]),
                kind=kind,
            )
        )
        if end >= total:
            break
        start += stride_words
        seq += 1
    return chunks


def image_chunks(doc: DocumentRecord, seq_start: int = 0) -> list[Chunk]:
    """One IMAGE_ALT chunk per image, carrying the alt-text as chunk text.

    Images with empty alt-text have no retrieval surrogate; they are
    skipped with a warning.
    """
    chunks: list[Chunk] = []
    seq = seq_start
    for img in doc.images:
        # Whitespace-normalized so downstream single-line renderings are lossless.
        alt = " ".join(img.alt_text.split())
        if not alt:
            logger.warning("image %s/%s has empty alt_text; skipping chunk", doc.id, img.id)
            continue
        chunks.append(
            Chunk(
                doc_id=doc.id,
                seq=seq,
                word_start=0,
                word_end=len(alt.split()),
                text=alt,
                kind=ChunkKind.IMAGE_ALT,
            )
        )
        seq += 1
    return chunks


def bundle_chunks(
    bundle: DocumentBundle,
    window_words: int = DEFAULT_WINDOW_WORDS,
    stride_words: int = DEFAULT_STRIDE_WORDS,
) -> list[Chunk]:
    """Chunk every document in the bundle; image chunks follow text chunks."""
    out: list[Chunk] = []
    for doc in bundle.documents:
        text_chunks = chunk_document(doc, window_words, stride_words)
        out.extend(text_chunks)
        out.extend(image_chunks(doc, seq_start=len(text_chunks)))
    return out


def doc_kinds(bundle: DocumentBundle) -> dict[str, DocumentKind]:
    """Map of document id to its kind, for agent-scoped retrieval filters."""
    return {doc.id: doc.kind for doc in bundle.documents}


def dump_chunks(chunks: list[Chunk], path: str | Path) -> None:
    """Write chunks as newline-delimited JSON records for inspection."""
    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps(chunk.to_record(), sort_keys=True, ensure_ascii=False) + "\n")
