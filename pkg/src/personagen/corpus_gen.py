"""Deterministic generators for the built-in name list and prompt corpus.

The files under ``personagen/data`` are frozen outputs of these generators
(seed 0) so results stay reproducible without redistributing anyone's
curated lists. Regeneration rules, should you want a corpus of your own:

* every template carries the identity marker ``{ID}`` exactly once;
* templates cover five categories: expressions, decorations, actions,
  attributes and backgrounds;
* the marker position should vary across templates (start, middle, end),
  since downstream consistency training averages over marker contexts;
* keep templates short enough for the encoder context window.

Names are synthetic two-part inventions. Each part must survive the
single-token rule of the target tokenizer, so parts are kept short and
purely alphabetic.
"""
from __future__ import annotations

import random

CATEGORIES = ("expressions", "decorations", "actions", "attributes", "backgrounds")

_FIRST_A = [
    "bel", "cor", "dar", "el", "fen", "gal", "hal", "ilk", "jor", "kel",
    "lor", "mar", "nor", "or", "pel", "quin", "ral", "sal", "tor", "ul",
    "ver", "wen", "xan", "yor", "zel",
]
_FIRST_B = ["an", "dric", "en", "ian", "ik", "io", "is", "mon", "on", "ric", "us", "vin"]
_FIRST_B_ALT = ["a", "adine", "ala", "ea", "elle", "ia", "ina", "ira", "issa", "ona", "ora", "yn"]
_LAST_A = [
    "ash", "birch", "crane", "dray", "elm", "fair", "gild", "haw", "iron", "jasper",
    "keld", "lark", "marsh", "north", "oak", "pryor", "quill", "reed", "stone", "thorn",
    "under", "vale", "west", "yarrow", "zeph",
]
_LAST_B = ["borne", "brook", "by", "cott", "don", "field", "ford", "gate", "ham", "ley", "mere", "wick"]


def _namecase(s: str) -> str:
    return s[:1].upper() + s[1:]


def generate_names(men: int = 226, women: int = 100, seed: int = 0) -> list[str]:
    """Invent ``men + women`` unique "First Last gender=..." lines."""
    rng = random.Random(seed)
    lines: list[str] = []
    seen: set[str] = set()
    for count, value, endings in ((men, "man", _FIRST_B), (women, "woman", _FIRST_B_ALT)):
        made = 0
        while made < count:
            first = rng.choice(_FIRST_A) + rng.choice(endings)
            last = rng.choice(_LAST_A) + rng.choice(_LAST_B)
            if len(first) > 10 or len(last) > 10:
                continue
            full = f"{_namecase(first)} {_namecase(last)}"
            if full in seen:
                continue
            seen.add(full)
            lines.append(f"{full} gender={value}")
            made += 1
    return lines


_MOODS = [
    "smiling warmly", "laughing out loud", "frowning in deep thought", "looking surprised",
    "grinning mischievously", "weeping quietly", "yawning at dawn", "glancing sideways",
    "staring defiantly", "smirking slightly", "beaming with pride", "scowling at the rain",
]
_GARB = [
    "a crimson velvet cloak", "a battered leather jacket", "a wide straw hat", "round brass goggles",
    "a knitted woolen scarf", "a silver chest plate", "an embroidered silk robe", "a paint stained apron",
    "a long duffel coat", "a feathered carnival mask", "heavy mountain boots", "a checked flannel shirt",
]
_ACTS = [
    "riding a bicycle downhill", "playing a violin", "repairing a pocket watch", "kneading bread dough",
    "climbing a rope ladder", "sketching in a notebook", "juggling three oranges", "rowing a small boat",
    "planting tomato seedlings", "flying a box kite", "stacking firewood", "brewing a pot of tea",
]
_TRAITS = [
    "as an elderly person with silver hair", "as a young apprentice", "with a thick curly beard",
    "with long braided hair", "with bright freckles", "with a weathered face", "with striking pale eyes",
    "as a tall figure", "with short cropped hair", "with a gentle expression", "with a crooked nose",
    "with ink stained fingers",
]
_PLACES = [
    "in a neon lit alley", "on a windswept beach", "inside a grand library", "at a mountain summit",
    "in a sunflower field", "under a railway bridge", "in a busy night market", "beside a frozen lake",
    "in an old observatory", "on a cobblestone square", "inside a greenhouse", "at a harbor at dusk",
]
_STYLES = [
    "a photo of", "a studio portrait of", "an oil painting of", "a charcoal sketch of",
    "a watercolor of", "a film still of", "a polaroid of", "a woodcut print of",
]
_LIGHTS = [
    "in soft morning light", "under harsh noon sun", "by candlelight", "in blue evening haze",
    "under stage spotlights", "in golden hour glow",
]


def _category_lines(category: str, rng: random.Random, count: int) -> list[str]:
    # Three sentence shapes per category so the marker lands at the start,
    # middle, or end of the token stream.
    pools: dict[str, tuple[list[str], ...]] = {
        "expressions": (_MOODS, _LIGHTS),
        "decorations": (_GARB, _LIGHTS),
        "actions": (_ACTS, _PLACES),
        "attributes": (_TRAITS, _LIGHTS),
        "backgrounds": (_PLACES, _LIGHTS),
    }
    a_pool, b_pool = pools[category]
    lines: list[str] = []
    seen: set[str] = set()
    while len(lines) < count:
        a, b = rng.choice(a_pool), rng.choice(b_pool)
        style = rng.choice(_STYLES)
        shape = rng.randrange(3)
        if category == "decorations":
            variants = (
                f"{{ID}} wearing {a} {b}",
                f"{style} {{ID}} wearing {a} {b}",
                f"{b}, {a} worn by {{ID}}",
            )
        elif category == "actions":
            variants = (
                f"{{ID}} {a} {b}",
                f"{style} {{ID}} {a} {b}",
                f"{b}, with {{ID}} {a}",
            )
        else:
            variants = (
                f"{{ID}} {a} {b}",
                f"{style} {{ID}} {a} {b}",
                f"{a} {b}, {style} {{ID}}",
            )
        line = variants[shape]
        if line in seen:
            continue
        seen.add(line)
        lines.append(line)
    return lines


def generate_prompts(count: int = 1000, seed: int = 0) -> list[str]:
    """Build ``count`` templates, evenly split across the five categories.

    Output lines include ``# category:`` headers understood by the corpus
    loader. Collisions across categories are impossible because each
    category uses distinct sentence stock.
    """
    rng = random.Random(seed)
    per = [count // len(CATEGORIES)] * len(CATEGORIES)
    for i in range(count - sum(per)):
        per[i] += 1
    lines: list[str] = []
    for category, n in zip(CATEGORIES, per):
        lines.append(f"# category: {category}")
        lines.extend(_category_lines(category, rng, n))
    return lines
