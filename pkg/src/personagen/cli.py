"""Command-line entry points.

Everything here is thin plumbing over the library: parse arguments and
config files, wire the encoder/bank/corpus together, and leave the actual
work to the other modules. Defaults run on the built-in stub encoder and
stub renderer so every subcommand works on a bare CPU box.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from importlib import resources
from pathlib import Path

import click
import torch
from PIL import Image

from .bank import NoiseConfig, encode_names, load_name_list
from .context import PLACEHOLDER, load_prompt_corpus
from .corpus_gen import generate_names, generate_prompts
from .encoders import load_encoder
from .errors import PersonagenError
from .evaluation import compute_report, load_grid
from .backends import stub_backends
from .inference import (
    RenderRequest,
    interpolate,
    load_generator,
    load_identity,
    render,
    sample_identity,
    save_identity,
    story_render,
)
from .pipelines import load_pipeline
from .training import TrainingConfig, load_checkpoint, stratified_split, train

DEFAULT_ENCODER = "stub/d16"


def default_asset(name: str) -> Path:
    return Path(str(resources.files("personagen").joinpath("data", name)))


def parse_config_file(path: str | Path) -> TrainingConfig:
    """key = value lines, ``#`` comments; dotted keys reach into NoiseConfig."""
    fields = {f.name: f for f in dataclasses.fields(TrainingConfig)}
    noise_fields = {f.name: f for f in dataclasses.fields(NoiseConfig)}
    values: dict = {}
    noise: dict = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise PersonagenError(f"{path}:{line_no}: expected key = value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key.startswith("noise."):
            sub = key[len("noise."):]
            if sub not in noise_fields:
                raise PersonagenError(f"{path}:{line_no}: unknown config key {key!r}")
            noise[sub] = _coerce(raw, noise_fields[sub].type)
        elif key in fields:
            values[key] = _coerce(raw, fields[key].type)
        else:
            raise PersonagenError(f"{path}:{line_no}: unknown config key {key!r}")
    if noise:
        values["noise"] = NoiseConfig(**noise)
    try:
        return TrainingConfig(**values)
    except (TypeError, ValueError) as exc:
        raise PersonagenError(f"{path}: {exc}") from exc


def _coerce(raw: str, annotation) -> object:
    text = str(annotation)
    if "bool" in text:
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise PersonagenError(f"expected a boolean, got {raw!r}")
    if "tuple" in text or "list" in text:
        return tuple(int(p.strip()) for p in raw.split(",") if p.strip())
    if "None" in text and raw.lower() == "none":
        return None
    if "int" in text:
        return int(raw)
    if "float" in text:
        return float(raw)
    return raw


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@click.group()
def main() -> None:
    """Pseudo-identity embedding toolkit."""


@main.command(name="train")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="key=value config file")
@click.option("--names", "names_path", type=click.Path(exists=True), default=None)
@click.option("--prompts", "prompts_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--encoder", "encoder_spec", default=DEFAULT_ENCODER, show_default=True)
@click.option("--only-adv", is_flag=True, help="drop the consistency term (lambda_ctx = 0)")
@click.option("--only-con", is_flag=True, help="drop the adversarial term (lambda_adv = 0)")
@click.option("--attribute", "attribute", default=None, help="train on one partition, e.g. gender=man")
@click.option("--resume", "resume_path", type=click.Path(exists=True), default=None)
def train_cmd(config_path, names_path, prompts_path, out_dir, encoder_spec, only_adv, only_con, attribute, resume_path):
    """Train the embedding-pair generator."""
    if only_adv and only_con:
        _fail(ValueError("--only-adv and --only-con are mutually exclusive"))
    try:
        config = parse_config_file(config_path) if config_path else TrainingConfig()
        if only_adv:
            config = dataclasses.replace(config, lambda_ctx=0.0)
        if only_con:
            config = dataclasses.replace(config, lambda_adv=0.0)
        encoder = load_encoder(encoder_spec)
        names = load_name_list(names_path or default_asset("names_default.txt"), encoder)
        entries = names.entries
        if attribute:
            key, _, value = attribute.partition("=")
            if not value:
                _fail(ValueError("--attribute expects key=value, e.g. gender=man"))
            groups = stratified_split(entries, key)
            if value not in groups:
                _fail(ValueError(f"no names carry {attribute}; values: {sorted(groups)}"))
            entries = groups[value]
            click.echo(f"partition {attribute}: {len(entries)} of {len(names.entries)} names")
        bank = encode_names(entries, encoder)
        bank.name_list_hash = names.source_hash
        corpus = None
        if config.lambda_ctx != 0:
            corpus = load_prompt_corpus(prompts_path or default_asset("prompts_default.txt"), encoder)
        trainer = None
        if resume_path:
            trainer = load_checkpoint(resume_path, bank, corpus, encoder)
            click.echo(f"resuming from step {trainer.step_count}")
        trainer, records = train(config, bank, corpus, encoder, out_dir=out_dir, trainer=trainer)
        click.echo(f"trained {len(records)} step(s), checkpoint in {out_dir}")
    except PersonagenError as exc:
        _fail(exc)


@main.command(name="sample")
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None, help="seed for the latent draw")
@click.option("--latent", "latent_json", default=None, help="explicit latent as a JSON array")
def sample_cmd(checkpoint_path, out_path, seed, latent_json):
    """Sample a new identity from a trained checkpoint."""
    try:
        handle = load_generator(checkpoint_path)
        latent = None
        if latent_json is not None:
            latent = torch.tensor(json.loads(latent_json), dtype=torch.float32)
        rng = torch.Generator().manual_seed(seed) if seed is not None else None
        identity = sample_identity(handle, latent=latent, rng=rng)
        save_identity(identity, out_path)
        click.echo(f"identity written to {out_path} (base model {identity.base_model_id})")
    except (PersonagenError, ValueError) as exc:
        _fail(exc)


@main.command(name="render")
@click.option("--identity", "identity_path", type=click.Path(exists=True), required=True)
@click.option("--prompt", required=True, help=f"text containing {PLACEHOLDER} once")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--pipeline", "pipeline_spec", default=None, help="renderer id; defaults to the identity's base model")
@click.option("--guidance", type=float, default=8.5, show_default=True)
@click.option("--steps", type=int, default=50, show_default=True)
@click.option("--size", type=int, default=None)
def render_cmd(identity_path, prompt, seed, out_path, pipeline_spec, guidance, steps, size):
    """Render one prompt with a saved identity."""
    try:
        identity = load_identity(identity_path)
        pipeline = load_pipeline(pipeline_spec or identity.base_model_id)
        request = RenderRequest(identity, prompt, seed=seed, guidance=guidance, steps=steps, size=size)
        image = render(request, pipeline)
        Image.fromarray(image).save(out_path)
        click.echo(f"image written to {out_path}")
    except PersonagenError as exc:
        _fail(exc)


@main.command(name="interpolate")
@click.option("--a", "a_path", type=click.Path(exists=True), required=True)
@click.option("--b", "b_path", type=click.Path(exists=True), required=True)
@click.option("--steps", "k", type=int, default=5, show_default=True, help="number of blend points incl. endpoints")
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True), required=True)
@click.option("--out-dir", "out_dir", type=click.Path(), required=True)
def interpolate_cmd(a_path, b_path, k, checkpoint_path, out_dir):
    """Write identities along the line between two saved latents."""
    if k < 2:
        _fail(ValueError("--steps must be >= 2 to include both endpoints"))
    try:
        handle = load_generator(checkpoint_path)
        id_a = load_identity(a_path, expect_base_model=handle.base_model_id)
        id_b = load_identity(b_path, expect_base_model=handle.base_model_id)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i in range(k):
            t = i / (k - 1)
            z = interpolate(id_a.latent, id_b.latent, t)
            identity = sample_identity(handle, latent=z)
            path = out / f"blend_{i:02d}_t{t:.2f}.pt"
            save_identity(identity, path)
            click.echo(f"t={t:.2f} -> {path}")
    except PersonagenError as exc:
        _fail(exc)


@main.command(name="story")
@click.option("--identity", "identity_path", type=click.Path(exists=True), required=True)
@click.option("--script", "script_path", type=click.Path(exists=True), required=True, help="one scene prompt per line")
@click.option("--out-dir", "out_dir", type=click.Path(), required=True)
@click.option("--pipeline", "pipeline_spec", default=None)
@click.option("--seed", type=int, default=0, show_default=True, help="base seed; scene i uses seed + i")
@click.option("--guidance", type=float, default=8.5, show_default=True)
@click.option("--steps", type=int, default=50, show_default=True)
def story_cmd(identity_path, script_path, out_dir, pipeline_spec, seed, guidance, steps):
    """Render an ordered scene list with one identity."""
    try:
        identity = load_identity(identity_path)
        pipeline = load_pipeline(pipeline_spec or identity.base_model_id)
        prompts = [
            line.strip()
            for line in Path(script_path).read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.strip().startswith("#")
        ]
        seeds = [seed + i for i in range(len(prompts))]
        images = story_render(identity, prompts, pipeline, seeds=seeds, guidance=guidance, steps=steps)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for i, (prompt, scene_seed, image) in enumerate(zip(prompts, seeds, images)):
            name = f"scene_{i:02d}.png"
            Image.fromarray(image).save(out / name)
            rows.append({"index": i, "prompt": prompt, "seed": scene_seed, "image": name})
        (out / "story.json").write_text(json.dumps(rows, indent=2), encoding="utf-8")
        click.echo(f"{len(images)} scene(s) written to {out_dir}")
    except PersonagenError as exc:
        _fail(exc)


@main.command(name="evaluate")
@click.option("--grid", "grid_path", type=click.Path(exists=True), required=True, help="grid manifest JSON")
@click.option("--report", "report_path", type=click.Path(), required=True)
@click.option("--reference", "reference_path", type=click.Path(exists=True), default=None, help="reference grid for FID")
@click.option("--backend-seed", type=int, default=0, show_default=True)
def evaluate_cmd(grid_path, report_path, reference_path, backend_seed):
    """Score a rendered image grid and write the report JSON."""
    try:
        grid = load_grid(grid_path)
        reference = load_grid(reference_path) if reference_path else None
        report = compute_report(grid, stub_backends(backend_seed), reference=reference)
        Path(report_path).write_text(report.to_json() + "\n", encoding="utf-8")
        click.echo(report.to_json())
    except PersonagenError as exc:
        _fail(exc)


@main.command(name="serve")
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True), required=True)
@click.option("--data-dir", "data_dir", type=click.Path(), required=True)
@click.option("--pipeline", "pipeline_spec", default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8823, show_default=True)
@click.option("--static", "static_dir", type=click.Path(exists=True), default=None, help="built web client to serve at /")
def serve_cmd(checkpoint_path, data_dir, pipeline_spec, host, port, static_dir):
    """Run the studio HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        app = create_app(checkpoint_path, data_dir, pipeline_spec=pipeline_spec, static_dir=static_dir)
    except PersonagenError as exc:
        _fail(exc)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command(name="gen-prompts")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--count", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def gen_prompts_cmd(out_path, count, seed):
    """Regenerate a prompt corpus file."""
    lines = generate_prompts(count, seed)
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"{count} template(s) written to {out_path}")


@main.command(name="gen-names")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--men", type=int, default=226, show_default=True)
@click.option("--women", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def gen_names_cmd(out_path, men, women, seed):
    """Regenerate a synthetic name list file."""
    lines = generate_names(men, women, seed)
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"{men + women} name(s) written to {out_path}")


if __name__ == "__main__":
    main()
