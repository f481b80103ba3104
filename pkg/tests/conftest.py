from __future__ import annotations

import pytest
import torch
from hypothesis import settings

from personagen import (
    EmbeddingBank,
    NameEntry,
    PromptCorpus,
    StubTextEncoder,
    TrainingConfig,
    Trainer,
    encode_names,
)

settings.register_profile("suite", deadline=None, max_examples=40)
settings.load_profile("suite")

NAMES = [
    NameEntry("Aldo", "Brant", {"gender": "man"}),
    NameEntry("Bela", "Corvin", {"gender": "woman"}),
    NameEntry("Ciro", "Deller", {"gender": "man"}),
    NameEntry("Dara", "Ellin", {"gender": "woman"}),
    NameEntry("Egon", "Farr", {"gender": "man"}),
    NameEntry("Fina", "Gorse", {"gender": "woman"}),
    NameEntry("Gil", "Harrow", {"gender": "man"}),
    NameEntry("Hana", "Ives", {"gender": "woman"}),
]

TEMPLATES = [
    "a photo of {ID}",
    "{ID} smiling at the camera",
    "a portrait of {ID} in the rain",
    "{ID} walking through a busy market",
    "an oil painting of {ID}",
    "{ID} reading a book by the window",
    "a close-up of {ID} at night",
    "{ID} standing on a mountain trail",
    "a sketch of {ID} wearing a hat",
    "{ID} laughing with friends outside",
]


@pytest.fixture(scope="session")
def encoder() -> StubTextEncoder:
    return StubTextEncoder(16)


@pytest.fixture(scope="session")
def bank(encoder) -> EmbeddingBank:
    return encode_names(NAMES, encoder)


@pytest.fixture(scope="session")
def corpus() -> PromptCorpus:
    return PromptCorpus(TEMPLATES)


@pytest.fixture(scope="session")
def trained(tmp_path_factory, encoder, bank, corpus):
    """A short but real training run shared by inference / CLI tests."""
    out = tmp_path_factory.mktemp("trained")
    config = TrainingConfig(
        steps=30,
        lr=1e-4,
        z_dim=6,
        gen_hidden=24,
        disc_hidden=(16, 8),
        prompts_per_step=3,
        checkpoint_every=10,
        seed=7,
    )
    from personagen import train

    trainer = train(config, bank, corpus, encoder, out_dir=out)
    return {"out": out, "trainer": trainer, "config": config,
            "checkpoint": out / "checkpoint_final.pt"}
