import json

import pytest
import torch
from click.testing import CliRunner

from personagen import load_identity
from personagen.cli import main, parse_config_file

from .conftest import NAMES, TEMPLATES

CONFIG = """\
# tiny run for the test-suite
steps = 6
lr = 1e-4
z_dim = 5
gen_hidden = 20
disc_hidden = 12, 8
prompts_per_step = 3
checkpoint_every = 3
seed = 3
noise.scale = 0.005
"""


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "config.txt").write_text(CONFIG)
    (d / "names.txt").write_text(
        "\n".join(f"{e.first} {e.last} gender={e.attributes['gender']}" for e in NAMES) + "\n"
    )
    (d / "prompts.txt").write_text("\n".join(TEMPLATES) + "\n")
    return d


@pytest.fixture(scope="module")
def cli_trained(runner, workdir):
    out = workdir / "run"
    result = runner.invoke(
        main,
        ["train", "--config", str(workdir / "config.txt"),
         "--names", str(workdir / "names.txt"),
         "--prompts", str(workdir / "prompts.txt"),
         "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    return out


def test_parse_config_file_full(workdir):
    cfg = parse_config_file(workdir / "config.txt")
    assert cfg.steps == 6
    assert cfg.lr == pytest.approx(1e-4)
    assert cfg.disc_hidden == (12, 8)
    assert cfg.gen_hidden == 20
    assert cfg.noise.scale == pytest.approx(5e-3)


def test_parse_config_rejects_unknown_key(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("stepz = 5\n")
    with pytest.raises(Exception) as err:
        parse_config_file(f)
    assert "stepz" in str(err.value) and ":1" in str(err.value)


def test_train_writes_artifacts(cli_trained):
    assert (cli_trained / "checkpoint_final.pt").exists()
    assert (cli_trained / "checkpoint_step3.pt").exists()
    log = (cli_trained / "train_log.jsonl").read_text().splitlines()
    assert len(log) == 6


def test_train_flag_exclusivity(runner, workdir):
    result = runner.invoke(
        main,
        ["train", "--only-adv", "--only-con", "--out", str(workdir / "x")],
    )
    assert result.exit_code != 0
    assert "mutually exclusive" in result.output


def test_train_attribute_partition_and_resume_guard(runner, workdir, tmp_path_factory):
    out = tmp_path_factory.mktemp("partition")
    result = runner.invoke(
        main,
        ["train", "--config", str(workdir / "config.txt"),
         "--names", str(workdir / "names.txt"),
         "--prompts", str(workdir / "prompts.txt"),
         "--attribute", "gender=woman",
         "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert "partition gender=woman: 4 of 8 names" in result.output

    # resuming that partition checkpoint with the full bank must fail
    result = runner.invoke(
        main,
        ["train", "--config", str(workdir / "config.txt"),
         "--names", str(workdir / "names.txt"),
         "--prompts", str(workdir / "prompts.txt"),
         "--resume", str(out / "checkpoint_final.pt"),
         "--out", str(out)],
    )
    assert result.exit_code != 0
    assert "bank" in result.output


def test_train_unknown_attribute_value(runner, workdir, tmp_path_factory):
    out = tmp_path_factory.mktemp("badattr")
    result = runner.invoke(
        main,
        ["train", "--config", str(workdir / "config.txt"),
         "--names", str(workdir / "names.txt"),
         "--attribute", "gender=unknown",
         "--out", str(out)],
    )
    assert result.exit_code != 0
    assert "gender=unknown" in result.output


def test_sample_seeded_and_explicit_latent(runner, workdir, cli_trained):
    a, b = workdir / "a.pt", workdir / "b.pt"
    for path in (a, b):
        result = runner.invoke(
            main,
            ["sample", "--checkpoint", str(cli_trained / "checkpoint_final.pt"),
             "--out", str(path), "--seed", "11"],
        )
        assert result.exit_code == 0, result.output
    ia, ib = load_identity(a), load_identity(b)
    assert torch.equal(ia.latent, ib.latent)

    explicit = workdir / "explicit.pt"
    latent = json.dumps([0.1] * 5)
    result = runner.invoke(
        main,
        ["sample", "--checkpoint", str(cli_trained / "checkpoint_final.pt"),
         "--out", str(explicit), "--latent", latent],
    )
    assert result.exit_code == 0, result.output
    assert torch.allclose(load_identity(explicit).latent, torch.full((5,), 0.1))


def test_sample_rejects_bad_latent(runner, workdir, cli_trained):
    result = runner.invoke(
        main,
        ["sample", "--checkpoint", str(cli_trained / "checkpoint_final.pt"),
         "--out", str(workdir / "bad.pt"), "--latent", "[1, 2]"],
    )
    assert result.exit_code != 0
    assert "shape" in result.output


def test_render_writes_png(runner, workdir, cli_trained):
    ident = workdir / "a.pt"
    out = workdir / "render.png"
    result = runner.invoke(
        main,
        ["render", "--identity", str(ident),
         "--prompt", "a photo of {ID} in the rain",
         "--seed", "5", "--steps", "2", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    from PIL import Image

    with Image.open(out) as img:
        assert img.size == (64, 64)


def test_render_requires_placeholder(runner, workdir):
    result = runner.invoke(
        main,
        ["render", "--identity", str(workdir / "a.pt"),
         "--prompt", "no marker", "--out", str(workdir / "x.png")],
    )
    assert result.exit_code != 0
    assert "{ID}" in result.output


def test_interpolate_writes_blend_series(runner, workdir, cli_trained):
    out = workdir / "blends"
    result = runner.invoke(
        main,
        ["interpolate", "--a", str(workdir / "a.pt"), "--b", str(workdir / "explicit.pt"),
         "--steps", "3", "--checkpoint", str(cli_trained / "checkpoint_final.pt"),
         "--out-dir", str(out)],
    )
    assert result.exit_code == 0, result.output
    files = sorted(p.name for p in out.glob("*.pt"))
    assert files == ["blend_00_t0.00.pt", "blend_01_t0.50.pt", "blend_02_t1.00.pt"]
    ia = load_identity(workdir / "a.pt")
    i0 = load_identity(out / "blend_00_t0.00.pt")
    assert torch.equal(i0.latent, ia.latent)
    mid = load_identity(out / "blend_01_t0.50.pt")
    ib = load_identity(workdir / "explicit.pt")
    assert torch.allclose(mid.latent, 0.5 * ia.latent + 0.5 * ib.latent)


def test_story_writes_scenes_and_manifest(runner, workdir):
    script = workdir / "script.txt"
    script.write_text("{ID} wakes up at dawn\n\n# a comment\n{ID} walks to the river\n")
    out = workdir / "story"
    result = runner.invoke(
        main,
        ["story", "--identity", str(workdir / "a.pt"), "--script", str(script),
         "--out-dir", str(out), "--seed", "40", "--steps", "2"],
    )
    assert result.exit_code == 0, result.output
    manifest = json.loads((out / "story.json").read_text())
    assert [row["index"] for row in manifest] == [0, 1]
    assert [row["seed"] for row in manifest] == [40, 41]
    assert all((out / row["image"]).exists() for row in manifest)


def test_evaluate_writes_report(runner, workdir, tmp_path_factory):
    import numpy as np
    from PIL import Image as PILImage

    from personagen import EvalGrid, save_grid

    grid_dir = tmp_path_factory.mktemp("grid")
    prompts = ["a photo of {ID}", "{ID} smiling"]
    images = {}
    rng = np.random.default_rng(0)
    for identity in ("a", "b"):
        base = rng.integers(0, 256, size=(64, 64, 3)).astype("uint8")
        for i, prompt in enumerate(prompts):
            img = base.copy()
            img[:8, :8] = i  # vary the frame, keep the face
            p = grid_dir / f"{identity}_{i}.png"
            PILImage.fromarray(img).save(p)
            images[(identity, prompt)] = p
    save_grid(EvalGrid(["a", "b"], prompts, prompts[0], images), grid_dir / "grid.json")

    report_path = grid_dir / "report.json"
    result = runner.invoke(
        main,
        ["evaluate", "--grid", str(grid_dir / "grid.json"), "--report", str(report_path)],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(report_path.read_text())
    assert report["identity_consistency"] == pytest.approx(1.0, abs=1e-6)
    assert report["image_quality_fid"] is None


def test_gen_prompts_and_names_round_trip(runner, workdir):
    out_p = workdir / "gen_prompts.txt"
    result = runner.invoke(main, ["gen-prompts", "--out", str(out_p), "--count", "40"])
    assert result.exit_code == 0, result.output
    from personagen import StubTextEncoder, load_name_list, load_prompt_corpus

    enc = StubTextEncoder(16)
    corpus = load_prompt_corpus(out_p, enc)
    assert len(corpus) == 40

    out_n = workdir / "gen_names.txt"
    result = runner.invoke(
        main, ["gen-names", "--out", str(out_n), "--men", "12", "--women", "6"]
    )
    assert result.exit_code == 0, result.output
    names = load_name_list(out_n, enc)
    assert len(names.entries) == 18 and not names.rejected
    genders = [e.attributes["gender"] for e in names.entries]
    assert genders.count("man") == 12 and genders.count("woman") == 6


def test_default_assets_exist_and_load(encoder):
    from personagen import load_name_list, load_prompt_corpus
    from personagen.cli import default_asset

    names = load_name_list(default_asset("names_default.txt"), encoder)
    assert len(names.entries) == 326 and not names.rejected
    corpus = load_prompt_corpus(default_asset("prompts_default.txt"), encoder)
    assert len(corpus) == 1000
    assert corpus.position_spread >= 3
