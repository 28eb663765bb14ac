"""Placement policies for the bed search."""

from __future__ import annotations

from dataclasses import dataclass

BASELINE = "baseline"
BY_ACCEPTANCE = "by-acceptance"
CONCURRENT_PROXIMITY = "concurrent-proximity"
CONCURRENT_ACCEPTANCE = "concurrent-acceptance"

POLICY_KINDS = (BASELINE, BY_ACCEPTANCE, CONCURRENT_PROXIMITY, CONCURRENT_ACCEPTANCE)


@dataclass(frozen=True)
class PlacementPolicy:
    """How referral requests are ordered and batched.

    ``baseline`` walks units nearest-first one request at a time,
    ``by-acceptance`` walks them most-likely-to-accept first, and the two
    ``concurrent-*`` kinds send ``m`` requests per round using the same
    two orderings.
    """

    kind: str = BASELINE
    m: int = 1

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICY_KINDS}")
        if isinstance(self.m, bool) or not isinstance(self.m, int) or self.m < 1:
            raise ValueError(f"policy round size m must be an integer >= 1, got {self.m!r}")
        if not self.concurrent and self.m != 1:
            # sequential policies are round size 1 by definition
            object.__setattr__(self, "m", 1)

    @property
    def concurrent(self) -> bool:
        return self.kind in (CONCURRENT_PROXIMITY, CONCURRENT_ACCEPTANCE)

    @property
    def by_acceptance(self) -> bool:
        return self.kind in (BY_ACCEPTANCE, CONCURRENT_ACCEPTANCE)

    @property
    def round_size(self) -> int:
        return self.m if self.concurrent else 1

    @property
    def label(self) -> str:
        if self.concurrent:
            return f"{self.kind}-m{self.m}"
        return self.kind

    @classmethod
    def parse(cls, text: str, m: int | None = None) -> "PlacementPolicy":
        """Parse ``"baseline"``, ``"concurrent-proximity:3"`` or a label like
        ``"concurrent-acceptance-m2"``."""
        text = text.strip()
        if ":" in text:
            kind, _, m_text = text.partition(":")
            return cls(kind.strip(), int(m_text))
        for kind in (CONCURRENT_PROXIMITY, CONCURRENT_ACCEPTANCE):
            if text.startswith(kind + "-m"):
                return cls(kind, int(text[len(kind) + 2:]))
        return cls(text, 1 if m is None else m)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "m": self.m}
