"""
Score a grid of generated characters
====================================

Builds an identities-by-prompts image grid with the stub pipeline, saves its
manifest, and runs the full metric suite over it with the deterministic stub
backends. A second grid rendered with different seeds serves as the FID
reference.
"""
from pathlib import Path

import torch
from PIL import Image

from personagen import (
    EvalGrid,
    RenderRequest,
    StubDiffusionPipeline,
    TrainingConfig,
    compute_report,
    encode_names,
    load_encoder,
    load_generator,
    load_name_list,
    load_prompt_corpus,
    render,
    sample_identity,
    save_grid,
    stub_backends,
    train,
)

ASSETS = Path(__file__).resolve().parents[1] / "src" / "personagen" / "data"
OUT = Path(__file__).resolve().parent / "out" / "evaluate"
OUT.mkdir(parents=True, exist_ok=True)

encoder = load_encoder("stub/d16")
bank = encode_names(load_name_list(ASSETS / "names_default.txt", encoder), encoder)
corpus = load_prompt_corpus(ASSETS / "prompts_default.txt", encoder)

config = TrainingConfig(
    steps=200,
    lr=1e-3,
    z_dim=8,
    gen_hidden=48,
    disc_hidden=(32, 16),
    prompts_per_step=4,
    checkpoint_every=200,
    seed=2,
)
trainer, _ = train(config, bank, corpus, encoder, out_dir=OUT / "run")
handle = load_generator(OUT / "run" / "checkpoint_final.pt")

# Three characters, four prompts. The anchor prompt is the plain portrait the
# face metrics compare everything else against.
rng = torch.Generator().manual_seed(9)
identities = {f"id{i}": sample_identity(handle, rng=rng) for i in range(3)}
prompts = [
    "a photo of {ID}",
    "{ID} smiling at the camera",
    "a portrait of {ID} in the rain",
    "{ID} wearing a red scarf",
]
anchor = prompts[0]

pipeline = StubDiffusionPipeline(encoder)


def build_grid(name: str, seed_base: int) -> EvalGrid:
    root = OUT / name
    root.mkdir(exist_ok=True)
    images = {}
    for tag, identity in identities.items():
        for j, prompt in enumerate(prompts):
            image = render(RenderRequest(identity, prompt, seed=seed_base + j), pipeline)
            path = root / f"{tag}_p{j}.png"
            Image.fromarray(image).save(path)
            images[(tag, prompt)] = path
    return EvalGrid(list(identities), prompts, anchor, images)


grid = build_grid("grid", seed_base=0)
save_grid(grid, OUT / "grid" / "manifest.json")
print(f"grid: {len(grid.identities)} identities x {len(grid.prompts)} prompts -> {OUT / 'grid'}")

reference = build_grid("reference", seed_base=1000)

report = compute_report(grid, stub_backends(), reference=reference)
print(report.to_json())
(OUT / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
print(f"wrote {OUT / 'report.json'}")
