"""Hierarchical content names."""

from __future__ import annotations

from dataclasses import dataclass


class EmptyNameError(ValueError):
    """Raised when a name has no components."""


class InvalidComponentError(ValueError):
    """Raised when a component is empty or contains '/'."""


@dataclass(frozen=True)
class Name:
    """An ordered sequence of non-empty UTF-8 components."""

    components: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise EmptyNameError("name needs at least one component")
        for c in self.components:
            if not isinstance(c, str) or not c:
                raise InvalidComponentError(f"empty component in {self.components!r}")
            if "/" in c:
                raise InvalidComponentError(f"component {c!r} contains '/'")
        object.__setattr__(self, "_rendered", "/" + "/".join(self.components))

    def render(self) -> str:
        return self._rendered

    def __str__(self) -> str:
        return self.render()

    def __len__(self) -> int:
        return len(self.components)

    def child(self, component: str) -> "Name":
        return Name(self.components + (component,))

    def parent(self) -> "Name":
        return Name(self.components[:-1])

    def is_prefix_of(self, other: "Name") -> bool:
        """True when self's components lead other's (equality included)."""
        n = len(self.components)
        return n <= len(other.components) and other.components[:n] == self.components

    def is_strict_prefix_of(self, other: "Name") -> bool:
        return len(self.components) < len(other.components) and self.is_prefix_of(other)


def parse_name(text: str) -> Name:
    """Parse a slash-separated name; leading/trailing slashes are tolerated."""
    if not isinstance(text, str):
        raise InvalidComponentError("name must be a string")
    trimmed = text.strip("/")
    if not trimmed:
        raise EmptyNameError(f"no components in {text!r}")
    parts = trimmed.split("/")
    # interior empty strings ("/a//b") are component errors, not emptiness
    return Name(tuple(parts))
