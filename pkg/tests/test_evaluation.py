import json

import numpy as np
import pytest
from PIL import Image

from personagen import (
    EvalError,
    EvalGrid,
    compute_report,
    editability,
    face_diversity,
    fid_from_features,
    identity_consistency,
    identity_diversity,
    image_quality_fid,
    load_grid,
    save_grid,
    stub_backends,
    subject_consistency,
    trusted_face_diversity,
)
from personagen.evaluation import MAX_PAIRS_PER_GROUP, _select_pairs

ANCHOR = "a photo of {ID}"
PROMPTS = [ANCHOR, "{ID} smiling", "{ID} in a forest", "{ID} at night"]


def write_image(path, arr):
    Image.fromarray(arr.astype(np.uint8)).save(path)


def varied_image(seed, face_seed=None):
    """64x64 with a textured center block (face) and a seeded frame."""
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 256, size=(64, 64, 3))
    face_rng = np.random.default_rng(seed if face_seed is None else face_seed)
    img[16:48, 16:48] = face_rng.integers(0, 256, size=(32, 32, 3))
    return img


def build_grid(tmp_path, identities, prompts, maker, name="grid"):
    base = tmp_path / name
    base.mkdir(exist_ok=True)
    images = {}
    for gi, identity in enumerate(identities):
        for pi, prompt in enumerate(prompts):
            p = base / f"{gi}_{pi}.png"
            write_image(p, maker(gi, pi))
            images[(identity, prompt)] = p
    return EvalGrid(list(identities), list(prompts), prompts[0], images)


@pytest.fixture
def dup_grid(tmp_path):
    """Every cell of an identity is the same image: perfect consistency."""
    return build_grid(
        tmp_path, ["a", "b"], PROMPTS, lambda gi, pi: varied_image(1000 + gi), name="dup"
    )


@pytest.fixture
def mixed_grid(tmp_path):
    """Nearly the same face per identity, different frames per prompt."""

    def maker(gi, pi):
        img = varied_image(10 * gi + pi, face_seed=5000 + gi)
        # small per-prompt brightness wobble inside the face region: the
        # crops stay the same person but are no longer byte-identical
        face = img[16:48, 16:48].astype(np.int64)
        img[16:48, 16:48] = np.clip(face + 4 * pi, 0, 255)
        return img

    return build_grid(tmp_path, ["a", "b"], PROMPTS, maker, name="mixed")


def test_grid_validation(tmp_path):
    img = tmp_path / "x.png"
    write_image(img, varied_image(0))
    with pytest.raises(EvalError):
        EvalGrid(["a"], PROMPTS, "not in prompts", {("a", p): img for p in PROMPTS})
    partial = {("a", p): img for p in PROMPTS[:-1]}
    with pytest.raises(EvalError):
        EvalGrid(["a"], PROMPTS, ANCHOR, partial)


def test_grid_manifest_round_trip(tmp_path, dup_grid):
    manifest = tmp_path / "grid.json"
    save_grid(dup_grid, manifest)
    back = load_grid(manifest)
    assert back.identities == dup_grid.identities
    assert back.prompts == dup_grid.prompts
    assert back.anchor_prompt == ANCHOR
    # paths re-resolve relative to the manifest
    assert all(p.is_file() for p in back.images.values())
    data = json.loads(manifest.read_text())
    assert set(data) == {"identities", "prompts", "anchor_prompt", "images"}


def test_load_grid_missing_file(tmp_path, dup_grid):
    manifest = tmp_path / "grid.json"
    save_grid(dup_grid, manifest)
    next(iter(dup_grid.images.values())).unlink()
    with pytest.raises(EvalError):
        load_grid(manifest)


def test_duplicated_grid_fixture_values(dup_grid):
    """Identical renders: consistency is perfect, diversity is zero."""
    b = stub_backends()
    assert identity_consistency(dup_grid, b.face).value == pytest.approx(1.0, abs=1e-9)
    assert face_diversity(dup_grid, b.face, b.perceptual).value == pytest.approx(0.0, abs=1e-12)
    assert trusted_face_diversity(dup_grid, b.face, b.perceptual).value == pytest.approx(0.0, abs=1e-12)
    assert subject_consistency(dup_grid, b.image_text).value == pytest.approx(1.0, abs=1e-9)


def test_fid_of_grid_against_itself(dup_grid):
    b = stub_backends()
    assert image_quality_fid(dup_grid, dup_grid, b.features).value < 1e-3


def test_mixed_grid_orders_sensibly(dup_grid, mixed_grid):
    b = stub_backends()
    dup_div = face_diversity(dup_grid, b.face, b.perceptual).value
    mix_div = face_diversity(mixed_grid, b.face, b.perceptual).value
    assert mix_div > dup_div
    # same-face trusted diversity stays positive on varied frames
    assert trusted_face_diversity(mixed_grid, b.face, b.perceptual).value > 0


def test_editability_prefers_matching_text(tmp_path):
    b = stub_backends()
    grid = build_grid(tmp_path, ["a"], PROMPTS, lambda gi, pi: varied_image(pi))
    val = editability(grid, b.image_text)
    assert -1.0 <= val.value <= 1.0
    assert val.samples == len(PROMPTS)


def test_identity_diversity_separates_identities(mixed_grid):
    b = stub_backends()
    val = identity_diversity(mixed_grid, b.face)
    assert 0.0 < val.value <= 2.0


def test_identity_diversity_needs_two(tmp_path):
    grid = build_grid(tmp_path, ["solo"], PROMPTS, lambda gi, pi: varied_image(pi))
    with pytest.raises(EvalError):
        identity_diversity(grid, stub_backends().face)


def test_exclusion_budget_enforced(tmp_path):
    """More than 20% blank centers (no face) aborts face metrics."""
    def maker(gi, pi):
        img = varied_image(gi * 10 + pi)
        if pi > 0:  # 3 of 4 cells per identity have no detectable face
            img[16:48, 16:48] = 128
        return img

    grid = build_grid(tmp_path, ["a", "b"], PROMPTS, maker)
    with pytest.raises(EvalError) as err:
        identity_consistency(grid, stub_backends().face)
    assert "budget" in str(err.value)


def test_exclusion_under_budget_is_tolerated(tmp_path):
    def maker(gi, pi):
        img = varied_image(gi * 10 + pi, face_seed=7000 + gi)
        if gi == 0 and pi == 3:  # 1 of 8 cells excluded: 12.5% < 20%
            img[16:48, 16:48] = 128
        return img

    grid = build_grid(tmp_path, ["a", "b"], PROMPTS, maker)
    val = identity_consistency(grid, stub_backends().face)
    assert 0 < val.samples < 2 * len(_select_pairs(4, 0)) + 1


def test_select_pairs_exhaustive_below_cap():
    pairs = _select_pairs(10, 0)
    assert len(pairs) == 45
    assert pairs == sorted(set(pairs))


def test_select_pairs_subsamples_above_cap():
    n = 50  # C(50,2) = 1225 > 1000
    a = _select_pairs(n, 0)
    b = _select_pairs(n, 0)
    c = _select_pairs(n, 1)
    assert len(a) == MAX_PAIRS_PER_GROUP
    assert a == b  # seeded: same group index, same subsample
    assert a != c  # different group index, different subsample
    assert len(set(a)) == len(a)
    assert all(0 <= i < j < n for i, j in a)


def test_fid_symmetry_and_identity():
    rng = np.random.default_rng(0)
    fa = rng.normal(size=(40, 6))
    fb = rng.normal(loc=0.5, size=(40, 6))
    assert fid_from_features(fa, fa) == pytest.approx(0.0, abs=1e-8)
    ab, ba = fid_from_features(fa, fb), fid_from_features(fb, fa)
    assert ab == pytest.approx(ba, rel=1e-6)
    assert ab > 0
    with pytest.raises(EvalError):
        fid_from_features(fa, rng.normal(size=(40, 7)))
    with pytest.raises(EvalError):
        fid_from_features(fa[:1], fb)


def test_fid_grows_with_mean_shift():
    rng = np.random.default_rng(1)
    base = rng.normal(size=(60, 5))
    near = base + 0.1
    far = base + 2.0
    assert fid_from_features(base, near) < fid_from_features(base, far)


def test_compute_report_full_surface(mixed_grid, dup_grid):
    report = compute_report(mixed_grid, stub_backends(), reference=dup_grid)
    data = json.loads(report.to_json())
    for key in (
        "subject_consistency",
        "identity_consistency",
        "editability",
        "face_diversity",
        "trusted_face_diversity",
        "identity_diversity",
        "image_quality_fid",
    ):
        assert key in data and data[key] is not None
        assert data[f"{key}_samples"] is not None
    assert report.samples["subject_consistency"] == 2 * (len(PROMPTS) - 1)


def test_compute_report_without_reference(mixed_grid):
    report = compute_report(mixed_grid, stub_backends())
    assert report.image_quality_fid is None
    data = json.loads(report.to_json())
    assert data["image_quality_fid"] is None
