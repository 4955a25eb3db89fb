"""Synthetic family-and-friends universes, their articles, and multi-hop questions.

Schema version 1 has seven stored roles (mother, father, son, daughter, wife,
husband, friend), two derived roles (daughter-in-law = wife of a son,
son-in-law = husband of a daughter) and three attributes (date_of_birth,
occupation, hobby).

Hop semantics: the frontier starts at the anchor's matches and each hop maps it
to the union of the role's targets. A chain never returns its own starting
person: each anchor match is followed separately and dropped from every
frontier reached from it.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..corpus import Document

SCHEMA_VERSION = 1
ROLES = ("mother", "father", "son", "daughter", "wife", "husband", "friend")
DERIVED_ROLES = {"daughter-in-law": ("son", "wife"), "son-in-law": ("daughter", "husband")}
ATTRIBUTES = ("date_of_birth", "occupation", "hobby")
ANSWER_TYPES = ("set", "attribute", "numeric")
COUNT_HOP = "count"

_INVERSE = {"mother": "child", "father": "child", "wife": "husband", "husband": "wife", "friend": "friend"}
_DATE_RE = re.compile(r"^\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])$")

FEMALE_NAMES = (
    "Alycia", "Christina", "Lissa", "Bobbie", "Marisol", "Delphine", "Ines", "Yolanda", "Tamsin",
    "Odette", "Renata", "Sunniva", "Kaia", "Lorna", "Mireille", "Petra", "Annika", "Celeste",
    "Greta", "Hedda", "Jolene", "Liesel", "Noor", "Rosalind", "Saskia", "Thea", "Vida", "Wren",
)
MALE_NAMES = (
    "Earle", "Christoper", "Reggie", "Ansel", "Bertram", "Cosmo", "Dorian", "Emmett", "Florian",
    "Gideon", "Horatio", "Ivo", "Jasper", "Linus", "Magnus", "Niall", "Osric", "Percival",
    "Quill", "Rufus", "Silas", "Tobias", "Ulric", "Viggo", "Wendell", "Yannick", "Zeno",
)
SURNAMES = (
    "Coe", "Luu", "Arden", "Brisco", "Calloway", "Dunmore", "Ellery", "Fairweather", "Galloway",
    "Hartigan", "Ingram", "Jessup", "Kestrel", "Lindqvist", "Marchbanks", "Northcott", "Ormsby",
    "Pellew", "Quarrie", "Ravenhill", "Stroud", "Thackeray", "Underhill", "Vantongeren", "Whitlock",
)
OCCUPATIONS = (
    "petroleum engineer", "cartographer", "beekeeper", "glassblower", "actuary", "ferry pilot",
    "locksmith", "archivist", "sound engineer", "orchard manager", "translator", "surveyor",
    "pastry chef", "radiologist", "stonemason", "harbor master",
)
HOBBIES = (
    "birdwatching", "fencing", "origami", "rock climbing", "chess", "pottery", "kite flying",
    "stargazing", "woodcarving", "geocaching", "calligraphy", "sailing", "beekeeping", "juggling",
)


class InfeasibleChain(ValueError):
    pass


@dataclass(frozen=True)
class WorldSpec:
    size: int = 50
    seed: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("world size must be >= 2")
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {self.schema_version}")


@dataclass(frozen=True)
class Person:
    name: str
    relations: dict[str, tuple[str, ...]]
    attributes: dict[str, str]

    def targets(self, role: str) -> tuple[str, ...]:
        return self.relations.get(role, ())


@dataclass(frozen=True)
class WorldGraph:
    persons: tuple[Person, ...]
    spec: WorldSpec | None = None
    by_name: dict[str, Person] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "by_name", {p.name: p for p in self.persons})

    def __getitem__(self, name: str) -> Person:
        return self.by_name[name]

    def __len__(self) -> int:
        return len(self.persons)


def validate_world(world: WorldGraph) -> list[str]:
    """All invariant violations; empty for a valid world."""
    problems = []
    names = [p.name for p in world.persons]
    if len(set(names)) != len(names):
        problems.append("duplicate person names")
    dobs = [p.attributes.get("date_of_birth") for p in world.persons]
    if len(set(dobs)) != len(dobs):
        problems.append("duplicate dates of birth")
    for p in world.persons:
        for key in ATTRIBUTES:
            if not p.attributes.get(key):
                problems.append(f"{p.name}: missing {key}")
        if not _DATE_RE.match(p.attributes.get("date_of_birth", "")):
            problems.append(f"{p.name}: malformed date of birth")
        for role, targets in p.relations.items():
            if role not in ROLES:
                problems.append(f"{p.name}: unknown role {role}")
                continue
            if len(set(targets)) != len(targets):
                problems.append(f"{p.name}: repeated {role}")
            for t in targets:
                other = world.by_name.get(t)
                if other is None:
                    problems.append(f"{p.name}: {role} {t} does not exist")
                    continue
                if t == p.name:
                    problems.append(f"{p.name}: is their own {role}")
                inverse = _INVERSE.get(role)
                if inverse == "child":
                    if p.name not in other.targets("son") + other.targets("daughter"):
                        problems.append(f"{p.name}: {role} {t} does not list them as a child")
                elif inverse and p.name not in other.targets(inverse):
                    problems.append(f"{p.name}: {role} {t} is not mutual")
        for role in ("son", "daughter"):
            for c in p.targets(role):
                child = world.by_name.get(c)
                if child and p.name not in child.targets("mother") + child.targets("father"):
                    problems.append(f"{p.name}: child {c} does not list them as a parent")
        if len(p.targets("mother")) > 1 or len(p.targets("father")) > 1:
            problems.append(f"{p.name}: more than one mother or father")
        if len(p.targets("wife")) + len(p.targets("husband")) > 1:
            problems.append(f"{p.name}: more than one spouse")
    return problems


# -- generation -------------------------------------------------------------


class _Builder:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.order: list[str] = []
        self.sex: dict[str, str] = {}
        self.rel: dict[str, dict[str, list[str]]] = {}
        self.year: dict[str, int] = {}

    def new_person(self, sex: str, surname: str, year: int) -> str:
        pool = FEMALE_NAMES if sex == "F" else MALE_NAMES
        for _ in range(200):
            name = f"{self.rng.choice(pool)} {surname}"
            if name not in self.rel:
                break
        else:
            surname = self.rng.choice(SURNAMES)
            n = 2
            while (name := f"{self.rng.choice(pool)} {surname}-{n}") in self.rel:
                n += 1
        self.order.append(name)
        self.sex[name] = sex
        self.rel[name] = {r: [] for r in ROLES}
        self.year[name] = year
        return name

    def link(self, a: str, role: str, b: str) -> None:
        if b not in self.rel[a][role]:
            self.rel[a][role].append(b)


def generate_world(spec: WorldSpec) -> WorldGraph:
    rng = random.Random(f"world:{spec.schema_version}:{spec.size}:{spec.seed}")
    b = _Builder(rng)
    couples: list[tuple[str, str]] = []

    def marry(husband: str, wife: str) -> None:
        b.link(husband, "wife", wife)
        b.link(wife, "husband", husband)
        couples.append((husband, wife))

    while len(b.order) < spec.size:
        if not couples:
            surname = rng.choice(SURNAMES)
            year = rng.randint(900, 930)
            h = b.new_person("M", surname, year)
            if len(b.order) < spec.size:
                w = b.new_person("F", surname, year + rng.randint(-3, 3))
                marry(h, w)
            continue
        h, w = couples.pop(0)
        surname = h.split(" ", 1)[1]
        for _ in range(rng.randint(1, 3)):
            if len(b.order) >= spec.size:
                break
            sex = rng.choice("MF")
            child = b.new_person(sex, surname, b.year[h] + rng.randint(22, 36))
            b.link(child, "mother", w)
            b.link(child, "father", h)
            role = "son" if sex == "M" else "daughter"
            b.link(h, role, child)
            b.link(w, role, child)
            if len(b.order) < spec.size and rng.random() < 0.7:
                if sex == "M":
                    spouse = b.new_person("F", surname, b.year[child] + rng.randint(-4, 4))
                    marry(child, spouse)
                else:
                    spouse = b.new_person("M", rng.choice(SURNAMES), b.year[child] + rng.randint(-4, 4))
                    marry(spouse, child)

    names = list(b.order)
    friend_edges = max(1, round(len(names) * 0.6)) if len(names) >= 2 else 0
    for _ in range(friend_edges):
        x, y = rng.sample(names, 2)
        b.link(x, "friend", y)
        b.link(y, "friend", x)

    used_dates: set[str] = set()
    persons = []
    for name in names:
        while True:
            date = f"{b.year[name]:04d}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
            if date not in used_dates:
                used_dates.add(date)
                break
            b.year[name] += 1
        attributes = {
            "date_of_birth": date,
            "occupation": rng.choice(OCCUPATIONS),
            "hobby": rng.choice(HOBBIES),
        }
        relations = {r: tuple(v) for r, v in b.rel[name].items() if v}
        persons.append(Person(name, relations, attributes))
    return WorldGraph(tuple(persons), spec)


def make_world(persons: Iterable[Person], spec: WorldSpec | None = None) -> WorldGraph:
    return WorldGraph(tuple(persons), spec)


# -- articles ---------------------------------------------------------------


def attribute_words(key: str) -> str:
    return key.replace("_", " ")


def render_article(person: Person) -> str:
    lines = [f"# {person.name}", "## Family"]
    for role in ROLES:
        for target in person.targets(role):
            lines.append(f"The {role} of {person.name} is {target}.")
    lines.append("## Attributes")
    for key in ATTRIBUTES:
        if key in person.attributes:
            lines.append(f"The {attribute_words(key)} of {person.name} is {person.attributes[key]}.")
    return "\n".join(lines)


def render_articles(world: WorldGraph) -> list[Document]:
    return [Document(f"p{i:04d}", p.name, render_article(p)) for i, p in enumerate(world.persons)]


# -- chains -----------------------------------------------------------------


@dataclass(frozen=True)
class Anchor:
    kind: str  # "name" or "attribute"
    value: str
    key: str = ""

    def __post_init__(self):
        if self.kind not in ("name", "attribute"):
            raise ValueError(f"unknown anchor kind {self.kind!r}")
        if self.kind == "attribute" and self.key not in ATTRIBUTES:
            raise ValueError(f"unknown attribute {self.key!r}")

    @classmethod
    def name(cls, value: str) -> "Anchor":
        return cls("name", value)

    @classmethod
    def attribute(cls, key: str, value: str) -> "Anchor":
        return cls("attribute", value, key)

    def matches(self, world: WorldGraph) -> list[str]:
        if self.kind == "name":
            return [self.value] if self.value in world.by_name else []
        return [p.name for p in world.persons if p.attributes.get(self.key) == self.value]

    def phrase(self) -> str:
        if self.kind == "name":
            return self.value
        return f"the person whose {attribute_words(self.key)} is {self.value}"


@dataclass(frozen=True)
class Chain:
    """Anchor plus hops. Hops are roles, derived roles, then optionally one
    ``attr:<key>`` or ``count`` terminal hop."""

    anchor: Anchor
    hops: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "hops", tuple(self.hops))
        if not 1 <= len(self.hops) <= 5:
            raise ValueError("a chain has 1 to 5 hops")
        for i, hop in enumerate(self.hops):
            terminal = hop == COUNT_HOP or hop.startswith("attr:")
            if terminal and i != len(self.hops) - 1:
                raise ValueError(f"{hop} may only be the last hop")
            if hop.startswith("attr:") and hop[5:] not in ATTRIBUTES:
                raise ValueError(f"unknown attribute hop {hop!r}")
            if not terminal and hop not in ROLES and hop not in DERIVED_ROLES:
                raise ValueError(f"unknown hop {hop!r}")
        if self.hops[-1] == COUNT_HOP and len(self.hops) < 2:
            raise ValueError("a count hop needs a relation hop before it")

    @property
    def answer_type(self) -> str:
        last = self.hops[-1]
        if last == COUNT_HOP:
            return "numeric"
        return "attribute" if last.startswith("attr:") else "set"

    @property
    def relation_hops(self) -> tuple[str, ...]:
        return self.hops[:-1] if self.answer_type != "set" else self.hops


def _apply_role(world: WorldGraph, frontier: set[str], role: str) -> set[str]:
    steps = DERIVED_ROLES.get(role, (role,))
    for step in steps:
        frontier = {t for name in frontier for t in world.by_name[name].targets(step)}
    return frontier


def final_frontier(world: WorldGraph, chain: Chain) -> set[str]:
    result: set[str] = set()
    for origin in chain.anchor.matches(world):
        frontier = {origin}
        for hop in chain.relation_hops:
            frontier = _apply_role(world, frontier, hop) - {origin}
        result |= frontier
    return result


def oracle_answer(world: WorldGraph, chain: Chain) -> set[str]:
    frontier = final_frontier(world, chain)
    last = chain.hops[-1]
    if last == COUNT_HOP:
        return {str(len(frontier))}
    if last.startswith("attr:"):
        key = last[5:]
        return {world.by_name[n].attributes[key] for n in frontier}
    return frontier


# -- questions --------------------------------------------------------------


@dataclass(frozen=True)
class QuestionSpec:
    id: str
    chain: Chain
    surface: str
    gold: frozenset[str]

    @property
    def answer_type(self) -> str:
        return self.chain.answer_type

    @property
    def anchor(self) -> Anchor:
        return self.chain.anchor


def _role_phrases(hops: Sequence[str]) -> list[str]:
    """Merge son→wife and daughter→husband into the in-law words."""
    out: list[str] = []
    i = 0
    while i < len(hops):
        pair = tuple(hops[i : i + 2])
        merged = next((name for name, steps in DERIVED_ROLES.items() if steps == pair), None)
        if merged:
            out.append(merged)
            i += 2
        else:
            out.append(hops[i])
            i += 1
    return out


def surface_text(chain: Chain) -> str:
    subject = chain.anchor.phrase()
    for role in _role_phrases(chain.relation_hops):
        subject = f"the {role} of {subject}"
    last = chain.hops[-1]
    if last == COUNT_HOP:
        return f"How many people are {subject}?"
    if last.startswith("attr:"):
        return f"What is the {attribute_words(last[5:])} of {subject}?"
    return f"Who is {subject}?"


def make_question(world: WorldGraph, chain: Chain, qid: str = "q000") -> QuestionSpec:
    gold = oracle_answer(world, chain)
    if not gold or (chain.answer_type == "numeric" and gold == {"0"}):
        raise InfeasibleChain(f"chain {chain.hops} from {chain.anchor.phrase()} has no answer")
    if chain.answer_type == "attribute" and len(final_frontier(world, chain)) != 1:
        raise InfeasibleChain("attribute questions need exactly one person at the end of the chain")
    return QuestionSpec(qid, chain, surface_text(chain), frozenset(gold))


_HOP_CHOICES = ROLES + tuple(DERIVED_ROLES)


def generate_questions(
    world: WorldGraph, count: int, seed: int = 1, max_hops: int = 4, max_attempts: int = 50
) -> list[QuestionSpec]:
    """Sample feasible questions; chains that stay infeasible after ``max_attempts`` are skipped."""
    if not 1 <= max_hops <= 5:
        raise ValueError("max_hops must be in [1, 5]")
    rng = random.Random(f"questions:{seed}:{count}:{max_hops}")
    names = [p.name for p in world.persons]
    questions: list[QuestionSpec] = []
    for i in range(count):
        for _ in range(max_attempts):
            origin = rng.choice(names)
            anchor = (Anchor.name(origin) if rng.random() < 0.5
                      else Anchor.attribute("date_of_birth", world.by_name[origin].attributes["date_of_birth"]))
            n = rng.randint(1, max_hops)
            kind = rng.choices(ANSWER_TYPES, weights=(3, 2, 1))[0]
            if kind == "numeric" and n < 2:
                kind = "set"
            rel_count = n if kind == "set" else n - 1
            hops: list[str] = []
            current = origin
            for _ in range(rel_count):
                options = [r for r in _HOP_CHOICES if _apply_role(world, {current}, r) - {origin}]
                if not options:
                    break
                role = rng.choice(options)
                hops.append(role)
                current = rng.choice(sorted(_apply_role(world, {current}, role) - {origin}))
            if len(hops) < rel_count:
                continue
            if kind == "attribute":
                hops.append("attr:" + rng.choice(ATTRIBUTES))
            elif kind == "numeric":
                hops.append(COUNT_HOP)
            try:
                questions.append(make_question(world, Chain(anchor, tuple(hops)), f"q{i:03d}"))
                break
            except (InfeasibleChain, ValueError):
                continue
    return questions


# -- records ------------------------------------------------------------------


def world_to_records(world: WorldGraph) -> list[dict]:
    spec = world.spec
    head = {"kind": "world", "schema_version": SCHEMA_VERSION}
    if spec is not None:
        head.update(size=spec.size, seed=spec.seed)
    rows = [head]
    for p in world.persons:
        rows.append({"kind": "person", "name": p.name, "relations": {r: list(t) for r, t in p.relations.items()},
                     "attributes": dict(p.attributes)})
    return rows


def world_from_records(records: Iterable[dict]) -> WorldGraph:
    spec = None
    persons = []
    for r in records:
        if r.get("kind") == "world":
            if "size" in r:
                spec = WorldSpec(r["size"], r["seed"], r.get("schema_version", SCHEMA_VERSION))
        elif r.get("kind") == "person":
            persons.append(Person(r["name"], {k: tuple(v) for k, v in r["relations"].items()}, dict(r["attributes"])))
        else:
            raise ValueError(f"unknown world record {r!r}")
    return WorldGraph(tuple(persons), spec)


def question_to_record(q: QuestionSpec) -> dict:
    a = q.chain.anchor
    return {
        "id": q.id,
        "anchor": {"kind": a.kind, "value": a.value, **({"key": a.key} if a.key else {})},
        "hops": list(q.chain.hops),
        "surface": q.surface,
        "gold": sorted(q.gold),
        "answer_type": q.answer_type,
    }


def question_from_record(r: dict) -> QuestionSpec:
    a = r["anchor"]
    chain = Chain(Anchor(a["kind"], a["value"], a.get("key", "")), tuple(r["hops"]))
    return QuestionSpec(r["id"], chain, r["surface"], frozenset(r["gold"]))


def write_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if line.strip():
            try:
                rows.append(json.loads(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return rows


def save_world(world: WorldGraph, path: str | Path) -> None:
    write_jsonl(world_to_records(world), path)


def load_world(path: str | Path) -> WorldGraph:
    return world_from_records(read_jsonl(path))


def save_questions(questions: Iterable[QuestionSpec], path: str | Path) -> None:
    write_jsonl((question_to_record(q) for q in questions), path)


def load_questions(path: str | Path) -> list[QuestionSpec]:
    return [question_from_record(r) for r in read_jsonl(path)]
