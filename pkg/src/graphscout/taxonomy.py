"""Indicator category taxonomy.

The taxonomy is configuration, not code: deployments ship their own
category lists. The default configuration carries 15 neutral placeholder
names so every component has a working taxonomy out of the box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_CATEGORY_COUNT = 15


class TaxonomyError(Exception):
    """Invalid taxonomy configuration."""


@dataclass(frozen=True)
class IndicatorTaxonomy:
    """Ordered list of indicator category names, optionally grouped.

    Attributes:
        categories: ordered, distinct category names.
        parent: optional category -> group-name map for display grouping.
    """

    categories: tuple[str, ...]
    parent: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.categories:
            raise TaxonomyError("taxonomy must define at least one category")
        if len(set(self.categories)) != len(self.categories):
            raise TaxonomyError("taxonomy categories must be distinct")
        for cat in self.parent:
            if cat not in self.categories:
                raise TaxonomyError(f"parent map references unknown category {cat!r}")

    def __contains__(self, category: object) -> bool:
        return category in self.categories

    def __len__(self) -> int:
        return len(self.categories)

    def index(self, category: str) -> int:
        return self.categories.index(category)

    @classmethod
    def default(cls) -> "IndicatorTaxonomy":
        """Placeholder taxonomy with the default category count (C1..C15)."""
        return cls(tuple(f"C{i}" for i in range(1, DEFAULT_CATEGORY_COUNT + 1)))

    @classmethod
    def from_file(cls, path: str | Path) -> "IndicatorTaxonomy":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict) or "categories" not in raw:
            raise TaxonomyError(f"{path}: expected an object with a 'categories' list")
        return cls(tuple(raw["categories"]), dict(raw.get("parent", {})))

    def to_file(self, path: str | Path) -> None:
        doc: dict = {"categories": list(self.categories)}
        if self.parent:
            doc["parent"] = dict(self.parent)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
