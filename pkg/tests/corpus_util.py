"""Helpers for loading the example corpus and its run headers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from sessft.parser import parse_module, parse_value
from sessft.syntax import FunId, Module

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"

_FIELD = re.compile(r"(\w+)=(.*?)(?=\s+\w+=|$)")


@dataclass(frozen=True)
class Entry:
    path: Path
    source: str
    headers: dict[str, str]

    @property
    def name(self) -> str:
        return self.path.stem

    def module(self) -> Module:
        return parse_module(self.source)

    def run_config(self) -> tuple[FunId, tuple, FunId, tuple]:
        run = self.headers["run"]
        fields = dict(_FIELD.findall(run))

        def args(key: str) -> tuple:
            raw = fields.get(key, "").strip()
            return tuple(parse_value(a) for a in raw.split(";") if a.strip()) if raw else ()

        return (
            FunId.parse(fields["server"]),
            args("server_args"),
            FunId.parse(fields["client"]),
            args("client_args"),
        )


def load(kind: str) -> list[Entry]:
    out = []
    for path in sorted((CORPUS / kind).glob("*.exst")):
        src = path.read_text()
        headers = dict(re.findall(r"^#\s*(\w+):\s*(.*)$", src, flags=re.M))
        out.append(Entry(path, src, headers))
    return out
