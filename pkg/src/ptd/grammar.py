"""Descriptor grammar: category tables, prompt enumeration, and stable ranks.

Prompts are built by filling one word from each of five categories into a
render template.  Empty-string entries stand for an omitted slot; rendering
collapses them so the output never contains doubled or trailing spaces.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator

from .errors import ConfigError, WordLookupError

# Default category word lists.  Order is canonical: enumeration order and
# prompt ids both derive from list positions.
DEFAULT_TEXTURES = [
    "banded", "blotchy", "braided", "bubbly", "bumpy", "checkered",
    "cobwebbed", "cracked", "crosshatched", "crystalline", "dotted",
    "fibrous", "flecked", "freckled", "frilly", "gauzy", "grid", "grooved",
    "honeycombed", "interlaced", "knitted", "lacelike", "lined", "marbled",
    "matted", "meshed", "paisley", "perforated", "pitted", "pleated",
    "polka-dotted", "porous", "potholed", "scaly", "smeared", "spiraled",
    "sprinkled", "stained", "stratified", "striped", "studded", "swirly",
    "veined", "waffled", "woven", "wrinkled", "zigzagged", "flaky",
    "chapped", "hairy", "leathery", "feathered", "spiky", "fluffy",
    "ribbed", "wavy",
]
DEFAULT_ARTISTIC = ["", "impressionist", "photorealistic", "minimal"]
DEFAULT_SPATIAL = ["", "randomized", "symmetrical"]
DEFAULT_ENHANCER = [
    "", "gradient", "vivid", "muted", "iridescent", "neon", "faded",
    "watercolor", "earthy",
]
DEFAULT_COLOR = [
    "", "red", "green", "blue", "yellow", "black-and-white", "pastel",
    "neutral",
]
DEFAULT_TEMPLATE = "{artistic} {spatial} {enhancer} {color} {texture} texture"

CATEGORY_NAMES = ("texture", "artistic", "spatial", "enhancer", "color")

# Categories where an empty slot is allowed.  Texture words are mandatory.
_EMPTY_ALLOWED = {"artistic", "spatial", "enhancer", "color"}


@dataclass(frozen=True)
class DescriptorTable:
    """The five category word lists plus the render templates."""

    textures: tuple[str, ...] = tuple(DEFAULT_TEXTURES)
    artistic: tuple[str, ...] = tuple(DEFAULT_ARTISTIC)
    spatial: tuple[str, ...] = tuple(DEFAULT_SPATIAL)
    enhancer: tuple[str, ...] = tuple(DEFAULT_ENHANCER)
    color: tuple[str, ...] = tuple(DEFAULT_COLOR)
    templates: tuple[str, ...] = (DEFAULT_TEMPLATE,)

    def __post_init__(self):
        for name, words in self.categories().items():
            if len(words) == 0:
                raise ConfigError(f"category {name!r} is empty")
            if len(set(words)) != len(words):
                raise ConfigError(f"category {name!r} contains duplicates")
            if "" in words and name not in _EMPTY_ALLOWED:
                raise ConfigError(
                    f"category {name!r} does not permit an empty entry")
        if len(self.templates) == 0:
            raise ConfigError("category 'templates' is empty")
        if len(set(self.templates)) != len(self.templates):
            raise ConfigError("category 'templates' contains duplicates")

    def categories(self) -> dict[str, tuple[str, ...]]:
        return {
            "texture": self.textures,
            "artistic": self.artistic,
            "spatial": self.spatial,
            "enhancer": self.enhancer,
            "color": self.color,
        }

    @property
    def total_count(self) -> int:
        return (len(self.textures) * len(self.artistic) * len(self.spatial)
                * len(self.enhancer) * len(self.color) * len(self.templates))

    @classmethod
    def from_dict(cls, data: dict) -> "DescriptorTable":
        kwargs = {}
        for key in ("textures", "artistic", "spatial", "enhancer", "color",
                    "templates"):
            if key in data:
                value = data[key]
                if not isinstance(value, list) or not all(
                        isinstance(w, str) for w in value):
                    raise ConfigError(f"table entry {key!r} must be a list "
                                      "of strings")
                kwargs[key] = tuple(value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "DescriptorTable":
        """Load a table from a JSON or TOML config file."""
        text = open(path, "rb").read()
        if str(path).endswith(".toml"):
            import tomllib
            return cls.from_dict(tomllib.loads(text.decode("utf-8")))
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PromptRecord:
    """One fully expanded prompt."""

    prompt_id: int
    texture_class: str
    artistic: str
    spatial: str
    enhancer: str
    color: str
    template_id: int
    text: str

    def slots(self) -> dict[str, str]:
        return {
            "texture": self.texture_class,
            "artistic": self.artistic,
            "spatial": self.spatial,
            "enhancer": self.enhancer,
            "color": self.color,
        }

    def words(self) -> list[str]:
        """Non-empty descriptor words in slot order."""
        return [w for w in (self.texture_class, self.artistic, self.spatial,
                            self.enhancer, self.color) if w]

    def to_json(self) -> str:
        return json.dumps({
            "prompt_id": self.prompt_id,
            "slots": self.slots(),
            "template_id": self.template_id,
            "text": self.text,
        }, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "PromptRecord":
        obj = json.loads(line)
        s = obj["slots"]
        return cls(prompt_id=obj["prompt_id"], texture_class=s["texture"],
                   artistic=s["artistic"], spatial=s["spatial"],
                   enhancer=s["enhancer"], color=s["color"],
                   template_id=obj["template_id"], text=obj["text"])


def render(template: str, texture: str, artistic: str, spatial: str,
           enhancer: str, color: str) -> str:
    """Fill a template and collapse whitespace left by empty slots."""
    raw = template.format(texture=texture, artistic=artistic,
                          spatial=spatial, enhancer=enhancer, color=color)
    return " ".join(raw.split())


def enumerate_prompts(table: DescriptorTable) -> Iterator[PromptRecord]:
    """Yield every prompt in canonical order with sequential ids.

    Order is the cartesian product with texture varying slowest and
    template fastest; each category iterates in its list order.
    """
    prompt_id = 0
    for texture, artistic, spatial, enhancer, color, t_id in (
            itertools.product(table.textures, table.artistic, table.spatial,
                              table.enhancer, table.color,
                              range(len(table.templates)))):
        text = render(table.templates[t_id], texture, artistic, spatial,
                      enhancer, color)
        yield PromptRecord(prompt_id, texture, artistic, spatial, enhancer,
                           color, t_id, text)
        prompt_id += 1


def rank_of(texture: str, artistic: str, spatial: str, enhancer: str,
            color: str, template_id: int, table: DescriptorTable) -> int:
    """Mixed-radix rank of a descriptor tuple; inverse of enumeration order."""
    digits = []
    radices = []
    for word, (name, words) in zip(
            (texture, artistic, spatial, enhancer, color),
            table.categories().items()):
        try:
            digits.append(words.index(word))
        except ValueError:
            raise WordLookupError(word, name) from None
        radices.append(len(words))
    if not 0 <= template_id < len(table.templates):
        raise WordLookupError(str(template_id), "templates")
    digits.append(template_id)
    radices.append(len(table.templates))

    rank = 0
    for digit, radix in zip(digits, radices):
        rank = rank * radix + digit
    return rank


def duplicate_texts(records) -> dict[str, list[int]]:
    """Map of rendered text -> prompt ids, restricted to collisions."""
    seen: dict[str, list[int]] = {}
    for rec in records:
        seen.setdefault(rec.text, []).append(rec.prompt_id)
    return {text: ids for text, ids in seen.items() if len(ids) > 1}


def write_prompt_manifest(records, path) -> int:
    """Write prompts as JSON lines; returns the record count."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")
            n += 1
    return n


def read_prompt_manifest(path) -> list[PromptRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return [PromptRecord.from_json(line) for line in fh if line.strip()]
