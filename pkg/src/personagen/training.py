"""Alternating adversarial training with the contextual-consistency objective.

One step is: draw a real pair (noise-augmented), draw a latent, generate an
aligned fake pair, update the discriminator, then update the generator on the
weighted sum of the adversarial term and the consistency term measured across
a fresh prompt subset. Strict 1:1 alternation, batch size 1.

Every random draw comes from one torch.Generator in a fixed per-step order
(real index, augmentation noise, latent, prompt subset), and checkpoints
carry that generator's state, so a resumed run continues bit-identically.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch

from .bank import EmbeddingBank, EmbeddingStats, NameEntry, NoiseConfig, augment_real, compute_stats
from .context import PromptCorpus, context_consistency_loss, embed_prompt_with_identity
from .encoders import TextEncoder
from .errors import CheckpointError, NameListError, TrainingError
from .gan import DiscriminatorNet, GeneratorNet, adversarial_losses, generator_forward, init_mlp

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class TrainingConfig:
    steps: int = 10_000
    batch_size: int = 1
    lr: float = 5e-5
    beta1: float = 0.5
    beta2: float = 0.999
    lambda_adv: float = 1.0
    lambda_ctx: float = 1.0
    prompts_per_step: int = 8
    z_dim: int = 64
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0
    saturating_g_loss: bool = False
    checkpoint_every: int = 1000
    gen_hidden: int | None = None
    disc_hidden: tuple[int, int] = (512, 256)

    def __post_init__(self):
        if isinstance(self.noise, dict):
            self.noise = NoiseConfig(**self.noise)
        self.disc_hidden = tuple(self.disc_hidden)
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.batch_size != 1:
            raise ValueError("only batch size 1 is supported")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        for lam, tag in ((self.lambda_adv, "lambda_adv"), (self.lambda_ctx, "lambda_ctx")):
            if not math.isfinite(lam) or lam < 0:
                raise ValueError(f"{tag} must be finite and >= 0")
        if self.prompts_per_step < 2:
            raise ValueError("prompts_per_step must be >= 2")
        if self.z_dim < 1:
            raise ValueError("z_dim must be >= 1")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")


@dataclass
class TrainingLogRecord:
    step: int
    loss_d: float
    loss_g_adv: float
    loss_ctx: float
    d_real: float
    d_fake: float
    wall_time: float

    def payload(self) -> tuple:
        """Deterministic fields: everything except wall-clock."""
        return (self.step, self.loss_d, self.loss_g_adv, self.loss_ctx, self.d_real, self.d_fake)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "TrainingLogRecord":
        return cls(**json.loads(line))


class Trainer:
    """Owns the mutable state of one training run."""

    def __init__(
        self,
        config: TrainingConfig,
        bank: EmbeddingBank,
        corpus: PromptCorpus | None,
        encoder: TextEncoder,
        *,
        stats: EmbeddingStats | None = None,
    ):
        if bank.model_id != encoder.model_id:
            raise TrainingError(
                f"bank was built for {bank.model_id}, encoder is {encoder.model_id}"
            )
        if config.lambda_ctx != 0:
            if corpus is None:
                raise TrainingError("lambda_ctx != 0 requires a prompt corpus")
            if len(corpus) < config.prompts_per_step:
                raise TrainingError(
                    f"corpus has {len(corpus)} templates, need >= {config.prompts_per_step}"
                )
        self.config = config
        self.bank = bank
        self.corpus = corpus
        self.encoder = encoder
        self.stats = stats if stats is not None else compute_stats(bank)
        self.rng = torch.Generator().manual_seed(config.seed)
        self.gen = GeneratorNet(config.z_dim, bank.dim, config.gen_hidden)
        self.disc = DiscriminatorNet(bank.dim, config.disc_hidden)
        init_mlp(self.gen, self.rng)
        init_mlp(self.disc, self.rng)
        betas = (config.beta1, config.beta2)
        self.opt_g = torch.optim.Adam(self.gen.parameters(), lr=config.lr, betas=betas)
        self.opt_d = torch.optim.Adam(self.disc.parameters(), lr=config.lr, betas=betas)
        self.step_count = 0

    def training_step(self) -> TrainingLogRecord:
        t0 = time.perf_counter()
        cfg = self.config

        idx = int(torch.randint(self.bank.count, (1,), generator=self.rng))
        real = augment_real(self.bank.pair(idx), cfg.noise, self.rng)
        z = torch.randn(cfg.z_dim, generator=self.rng)
        fake = generator_forward(self.gen, self.stats, z)

        d_real = self.disc(real)
        loss_d, _ = adversarial_losses(d_real, self.disc(fake.detach()), saturating=cfg.saturating_g_loss)
        if cfg.lambda_adv != 0:
            self.opt_d.zero_grad()
            (cfg.lambda_adv * loss_d).backward()
            self.opt_d.step()

        d_fake = self.disc(fake)
        _, loss_g_adv = adversarial_losses(d_real.detach(), d_fake, saturating=cfg.saturating_g_loss)
        if cfg.lambda_ctx != 0:
            picks = torch.randperm(len(self.corpus), generator=self.rng)[: cfg.prompts_per_step]
            pairs = torch.stack(
                [embed_prompt_with_identity(self.encoder, self.corpus[int(i)], fake) for i in picks]
            )
            loss_ctx = context_consistency_loss(pairs)
        else:
            loss_ctx = fake.new_zeros(())
        self.opt_g.zero_grad()
        (cfg.lambda_adv * loss_g_adv + cfg.lambda_ctx * loss_ctx).backward()
        self.opt_g.step()

        self.step_count += 1
        record = TrainingLogRecord(
            step=self.step_count,
            loss_d=float(loss_d.detach()),
            loss_g_adv=float(loss_g_adv.detach()),
            loss_ctx=float(loss_ctx.detach()),
            d_real=float(d_real.detach()),
            d_fake=float(d_fake.detach()),
            wall_time=time.perf_counter() - t0,
        )
        if not all(math.isfinite(v) for v in record.payload()[1:]):
            raise TrainingError(f"non-finite loss at step {record.step}", record=record)
        return record


def train(
    config: TrainingConfig,
    bank: EmbeddingBank,
    corpus: PromptCorpus | None,
    encoder: TextEncoder,
    *,
    out_dir: str | Path | None = None,
    trainer: Trainer | None = None,
    log_name: str = "train_log.jsonl",
) -> tuple[Trainer, list[TrainingLogRecord]]:
    """Run (or continue) a training loop up to ``config.steps`` steps.

    With ``out_dir`` set, writes a JSONL log, periodic checkpoints, and a
    final ``checkpoint_final.pt``. ``steps=0`` saves the initialized state
    unchanged. Returns the trainer and the records of the steps run here.
    """
    if trainer is None:
        trainer = Trainer(config, bank, corpus, encoder, stats=None)
    records: list[TrainingLogRecord] = []
    out = Path(out_dir) if out_dir is not None else None
    log_file = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log_file = (out / log_name).open("a", encoding="utf-8")
    try:
        while trainer.step_count < config.steps:
            record = trainer.training_step()
            records.append(record)
            if log_file is not None:
                log_file.write(record.to_json() + "\n")
            if out is not None and trainer.step_count % config.checkpoint_every == 0:
                save_checkpoint(trainer, out / f"checkpoint_step{trainer.step_count}.pt")
        if out is not None:
            save_checkpoint(trainer, out / "checkpoint_final.pt")
    finally:
        if log_file is not None:
            log_file.close()
    return trainer, records


def save_checkpoint(trainer: Trainer, path: str | Path) -> None:
    """Serialize the complete resumable state (nets, optimizers, RNG stream)."""
    cfg = asdict(trainer.config)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": "gan-checkpoint",
        "step": trainer.step_count,
        "dim": trainer.bank.dim,
        "bank_count": trainer.bank.count,
        "base_model_id": trainer.encoder.model_id,
        "name_list_hash": trainer.bank.name_list_hash,
        "config": cfg,
        "generator": trainer.gen.state_dict(),
        "discriminator": trainer.disc.state_dict(),
        "opt_g": trainer.opt_g.state_dict(),
        "opt_d": trainer.opt_d.state_dict(),
        "stats_mean": trainer.stats.mean,
        "stats_std": trainer.stats.std,
        "rng_state": trainer.rng.get_state(),
        "activation": "leaky_relu:0.2",
        "init": "fan_in_normal",
    }
    torch.save(payload, Path(path))


def read_checkpoint(path: str | Path) -> dict:
    payload = torch.load(Path(path), weights_only=True)
    if not isinstance(payload, dict) or payload.get("kind") != "gan-checkpoint":
        raise CheckpointError(f"{path}: not a training checkpoint")
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format {payload.get('format_version')}")
    return payload


def load_checkpoint(
    path: str | Path,
    bank: EmbeddingBank,
    corpus: PromptCorpus | None,
    encoder: TextEncoder,
) -> Trainer:
    """Rebuild a Trainer ready to continue exactly where the file left off."""
    payload = read_checkpoint(path)
    if payload["base_model_id"] != encoder.model_id:
        raise CheckpointError(
            f"{path}: checkpoint is bound to {payload['base_model_id']}, encoder is {encoder.model_id}"
        )
    if payload["name_list_hash"] and bank.name_list_hash and payload["name_list_hash"] != bank.name_list_hash:
        raise CheckpointError(f"{path}: checkpoint was trained on a different name list")
    if payload["dim"] != bank.dim:
        raise CheckpointError(f"{path}: embedding width {payload['dim']} != bank width {bank.dim}")
    if payload.get("bank_count", bank.count) != bank.count:
        raise CheckpointError(
            f"{path}: checkpoint saw {payload['bank_count']} bank entries, this bank has {bank.count}"
            " (stratified partition mismatch?)"
        )
    config = TrainingConfig(**payload["config"])
    stats = EmbeddingStats(payload["stats_mean"], payload["stats_std"])
    trainer = Trainer(config, bank, corpus, encoder, stats=stats)
    trainer.gen.load_state_dict(payload["generator"])
    trainer.disc.load_state_dict(payload["discriminator"])
    trainer.opt_g.load_state_dict(payload["opt_g"])
    trainer.opt_d.load_state_dict(payload["opt_d"])
    trainer.rng.set_state(payload["rng_state"])
    trainer.step_count = int(payload["step"])
    return trainer


def stratified_split(entries: list[NameEntry], attribute: str) -> dict[str, list[NameEntry]]:
    """Partition entries by an attribute value; every entry must carry the tag."""
    missing = [e.text() for e in entries if attribute not in e.attributes]
    if missing:
        shown = ", ".join(missing[:5])
        raise NameListError(
            f"{len(missing)} name(s) missing attribute {attribute!r} (e.g. {shown})"
        )
    parts: dict[str, list[NameEntry]] = {}
    for entry in entries:
        parts.setdefault(entry.attributes[attribute], []).append(entry)
    return parts
