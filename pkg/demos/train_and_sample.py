"""
Train a small identity GAN and sample characters from it
=========================================================

End-to-end walkthrough on the bundled assets and the stub encoder: build the
name-embedding bank, train for a few hundred steps, then sample, blend, and
render characters. Everything is seeded, so two runs produce the same bytes.
"""
from pathlib import Path

import torch
from PIL import Image

from personagen import (
    RenderRequest,
    StubDiffusionPipeline,
    TrainingConfig,
    encode_names,
    interpolate,
    load_encoder,
    load_generator,
    load_name_list,
    load_prompt_corpus,
    render,
    sample_identity,
    train,
)

ASSETS = Path(__file__).resolve().parents[1] / "src" / "personagen" / "data"
OUT = Path(__file__).resolve().parent / "out" / "train_and_sample"
OUT.mkdir(parents=True, exist_ok=True)

# The stub encoder is a tiny deterministic stand-in for a real text encoder:
# same interface, no weights to download, instant to run.
encoder = load_encoder("stub/d16")
print(f"encoder: {encoder.model_id} (dim={encoder.dim})")

# The "real" data is just the word embeddings of well-known names. Names that
# do not map to one token per part are rejected at load time.
names = load_name_list(ASSETS / "names_default.txt", encoder)
bank = encode_names(names, encoder)
print(f"bank: {bank.count} names, embedding pairs of shape 2x{bank.dim}")

corpus = load_prompt_corpus(ASSETS / "prompts_default.txt", encoder)
print(f"corpus: {len(corpus)} templates, {corpus.position_spread} distinct marker positions")

# A few hundred steps is enough for a demo at this scale. The adversarial
# loss pulls samples toward the name distribution; the consistency loss makes
# a sampled pair behave identically across prompt contexts.
config = TrainingConfig(
    steps=300,
    lr=1e-3,
    z_dim=8,
    gen_hidden=48,
    disc_hidden=(32, 16),
    prompts_per_step=4,
    checkpoint_every=100,
    seed=0,
)
trainer, records = train(config, bank, corpus, encoder, out_dir=OUT / "run")
last = records[-1]
print(f"trained {len(records)} steps; final losses: D={last.loss_d:.4f} G_adv={last.loss_g_adv:.4f} ctx={last.loss_ctx:.4f}")
print(f"checkpoint: {OUT / 'run' / 'checkpoint_final.pt'}")

# Inference never touches the trainer: a handle wraps the frozen generator.
handle = load_generator(OUT / "run" / "checkpoint_final.pt")
rng = torch.Generator().manual_seed(7)
anna = sample_identity(handle, rng=rng)
bret = sample_identity(handle, rng=rng)
print(f"sampled two identities from checkpoint {handle.checkpoint_id}")

# Latent-space blends are themselves valid identities.
mid = sample_identity(handle, latent=interpolate(anna.latent, bret.latent, 0.5))
gap_ab = float((anna.embeddings - bret.embeddings).norm())
gap_am = float((anna.embeddings - mid.embeddings).norm())
print(f"embedding distance a-b: {gap_ab:.3f}, a-midpoint: {gap_am:.3f}")

# The stub pipeline renders a deterministic toy portrait: the center block is
# a pure function of the conditioning, so one identity keeps one face.
pipeline = StubDiffusionPipeline(encoder)
for tag, identity in (("anna", anna), ("bret", bret), ("blend", mid)):
    image = render(RenderRequest(identity, "a portrait of {ID} in the rain", seed=3), pipeline)
    path = OUT / f"{tag}.png"
    Image.fromarray(image).save(path)
    print(f"wrote {path}")

print("done.")
