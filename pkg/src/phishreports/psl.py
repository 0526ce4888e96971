"""Registrable-domain extraction against a bundled public-suffix snapshot.

The snapshot carries ICANN-style suffixes only. Keeping provider domains like
duckdns.org out of the suffix set means hosts under dynamic-DNS services
resolve to a registrable domain that screening lists can match directly.
"""
from __future__ import annotations

from functools import lru_cache
from importlib import resources
from typing import Iterable


class PublicSuffixList:
    """Longest-match suffix rules with ``*.`` wildcard and ``!`` exception syntax."""

    def __init__(self, rules: Iterable[str]):
        self._exact: set[str] = set()
        self._wildcard: set[str] = set()
        self._exception: set[str] = set()
        for line in rules:
            rule = line.strip().lower()
            if not rule or rule.startswith("//"):
                continue
            if rule.startswith("!"):
                self._exception.add(rule[1:])
            elif rule.startswith("*."):
                self._wildcard.add(rule[2:])
            else:
                self._exact.add(rule)

    @classmethod
    def bundled(cls) -> "PublicSuffixList":
        return _bundled()

    def public_suffix(self, host: str) -> str:
        labels = host.lower().rstrip(".").split(".")
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            parent = ".".join(labels[i + 1 :])
            if candidate in self._exception:
                return parent
            if candidate in self._exact:
                return candidate
            if parent and parent in self._wildcard:
                return candidate
        return labels[-1]

    def registrable_domain(self, host: str) -> str:
        """Suffix plus one label; the host itself when it already is a suffix."""
        host = host.lower().rstrip(".")
        suffix = self.public_suffix(host)
        if host == suffix:
            return host
        labels = host.split(".")
        n_suffix = suffix.count(".") + 1
        return ".".join(labels[-(n_suffix + 1) :])


def load_suffix_file(path: str) -> PublicSuffixList:
    with open(path, encoding="utf-8") as fh:
        return PublicSuffixList(fh)


@lru_cache(maxsize=1)
def _bundled() -> PublicSuffixList:
    text = resources.files("phishreports").joinpath("data/public_suffixes.txt").read_text("utf-8")
    return PublicSuffixList(text.splitlines())
