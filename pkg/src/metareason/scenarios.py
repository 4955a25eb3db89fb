"""Bundled example library and scripted scenarios."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import CorpusIndex, build_index, load_corpus
from .decompositions import ExampleLibrary, load_library


def data_path(*parts: str) -> Path:
    return Path(str(resources.files("metareason.data").joinpath(*parts)))


def bundled_library_path() -> Path:
    return data_path("library", "court_examples.dex")


def bundled_library() -> ExampleLibrary:
    return load_library(bundled_library_path().read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Scenario:
    name: str
    directory: Path

    def path(self, name: str) -> Path:
        return self.directory / name

    def mock(self, scaffold: str = "recursive") -> Path:
        return self.path(f"{scaffold}.mock")


VOLLEYBALL = Scenario("volleyball", data_path("scenarios", "volleyball"))
PHANTOM = Scenario("phantom", data_path("scenarios", "phantom"))
SCENARIOS = {s.name: s for s in (VOLLEYBALL, PHANTOM)}

VOLLEYBALL_NAMESPACE = "sequential reasoning"


def volleyball_task() -> str:
    return VOLLEYBALL.path("task.txt").read_text(encoding="utf-8").strip()


def volleyball_index() -> CorpusIndex:
    return build_index(load_corpus(VOLLEYBALL.path("corpus.jsonl")))


def phantom_world():
    from .harness.world import load_world

    return load_world(PHANTOM.path("world.jsonl"))


def phantom_questions():
    from .harness.world import load_questions

    return load_questions(PHANTOM.path("questions.jsonl"))


def phantom_index() -> CorpusIndex:
    from .harness.world import render_articles

    return build_index(render_articles(phantom_world()))
