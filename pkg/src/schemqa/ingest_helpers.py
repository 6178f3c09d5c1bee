"""Optional ingestion helpers that need a model backend."""

from __future__ import annotations

from dataclasses import replace

from .backends import ALT_TEXT, Backend, ModelRequest
from .corpus import DocumentBundle, DocumentRecord, ImageRecord
from .prompts import TemplateRegistry


def populate_alt_texts(
    bundle: DocumentBundle, backend: Backend, templates: TemplateRegistry
) -> tuple[DocumentBundle, int]:
    """Fill empty image alt-texts via the backend; returns (bundle, filled count).

    Images that already carry alt-text are untouched, so ingestion stays
    deterministic for curated bundles.
    """
    filled = 0
    documents: list[DocumentRecord] = []
    for doc in bundle.documents:
        images: list[ImageRecord] = []
        for img in doc.images:
            if img.alt_text.strip():
                images.append(img)
                continue
            prompt = templates.render(ALT_TEXT, title=doc.title, image_id=img.id)
            request = ModelRequest(
                prompt_kind=ALT_TEXT,
                messages=(("user", prompt),),
                attachments=(img.file_ref,),
                key_fields=(doc.id, img.id, f"tv={templates.version}"),
            )
            response = backend.complete(request)
            images.append(replace(img, alt_text=response.text.strip()))
            filled += 1
        documents.append(replace(doc, images=tuple(images)))
    return DocumentBundle(documents=tuple(documents), kind_counts=dict(bundle.kind_counts)), filled
