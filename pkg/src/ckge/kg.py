"""Knowledge-graph snapshots, vocabulary, and per-step deltas.

Triples are stored as ``(n, 3)`` int64 arrays with columns ``(head,
relation, tail)``. Names only live in :class:`Vocabulary`.

A dataset on disk is laid out as ``<root>/<i>/{train,valid,test}.txt`` with
one ``head<TAB>relation<TAB>tail`` line per triple. Each snapshot's train
file holds only the triples added at that step.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedLine, MissingFile

SPLITS = ("train", "valid", "test")


def empty_triples():
    return np.zeros((0, 3), dtype=np.int64)


def parse_triple_line(line):
    """Split one TSV line into ``(head, relation, tail)`` names.

    Only the line terminator is stripped; names are compared byte-exactly
    so surrounding spaces are part of the name.
    """
    line = line.rstrip("\r\n")
    if not line.strip():
        raise MalformedLine(line)
    parts = line.split("\t")
    if len(parts) != 3:
        raise MalformedLine(line)
    return parts[0], parts[1], parts[2]


class Vocabulary:
    """Append-only name <-> id maps for entities and relations."""

    def __init__(self):
        self.entities: list[str] = []
        self.relations: list[str] = []
        self._ent: dict[str, int] = {}
        self._rel: dict[str, int] = {}

    @property
    def n_entities(self):
        return len(self.entities)

    @property
    def n_relations(self):
        return len(self.relations)

    def entity_id(self, name, add=True):
        idx = self._ent.get(name)
        if idx is None:
            if not add:
                raise KeyError(name)
            idx = len(self.entities)
            self._ent[name] = idx
            self.entities.append(name)
        return idx

    def relation_id(self, name, add=True):
        idx = self._rel.get(name)
        if idx is None:
            if not add:
                raise KeyError(name)
            idx = len(self.relations)
            self._rel[name] = idx
            self.relations.append(name)
        return idx

    def encode(self, h, r, t):
        return self.entity_id(h), self.relation_id(r), self.entity_id(t)

    def decode(self, triple):
        h, r, t = (int(x) for x in triple)
        return self.entities[h], self.relations[r], self.entities[t]

    @classmethod
    def from_names(cls, entities, relations):
        vocab = cls()
        for name in entities:
            vocab.entity_id(name)
        for name in relations:
            vocab.relation_id(name)
        return vocab

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.entities == other.entities and self.relations == other.relations


@dataclass(frozen=True)
class Snapshot:
    """One time step of an evolving KG.

    ``entities`` and ``relations`` are the sorted ids that occur in the
    train split, i.e. the elements that receive embeddings at this step.
    """

    index: int
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    entities: np.ndarray = field(default=None)
    relations: np.ndarray = field(default=None)

    def __post_init__(self):
        for name in SPLITS:
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 3)
            object.__setattr__(self, name, arr)
        if self.entities is None:
            ents = np.unique(np.concatenate([self.train[:, 0], self.train[:, 2]]))
            object.__setattr__(self, "entities", ents.astype(np.int64))
        if self.relations is None:
            object.__setattr__(self, "relations", np.unique(self.train[:, 1]).astype(np.int64))

    def split(self, name):
        return getattr(self, name)


@dataclass(frozen=True)
class Delta:
    """Triples, entities and relations introduced at one step."""

    triples: np.ndarray
    entities: np.ndarray
    relations: np.ndarray


def _read_split(path, vocab):
    if not os.path.isfile(path):
        raise MissingFile(path)
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                h, r, t = parse_triple_line(line)
            except MalformedLine:
                raise MalformedLine(line.rstrip("\r\n"), lineno=lineno, path=path) from None
            rows.append(vocab.encode(h, r, t))
    if not rows:
        return empty_triples()
    return np.array(rows, dtype=np.int64)


def load_snapshot_dir(path, vocab, index):
    """Load ``train.txt``, ``valid.txt`` and ``test.txt`` from ``path``.

    New names are appended to ``vocab`` in first-seen order, reading train
    before valid before test. Duplicate lines are kept.
    """
    splits = {}
    for name in SPLITS:
        splits[name] = _read_split(os.path.join(path, f"{name}.txt"), vocab)
    return Snapshot(index=index, **splits)


def snapshot_dirs(root):
    """Numbered snapshot directories under ``root`` in order 0..n-1."""
    if not os.path.isdir(root):
        raise MissingFile(root)
    found = sorted(int(d) for d in os.listdir(root)
                   if d.isdigit() and os.path.isdir(os.path.join(root, d)))
    if found != list(range(len(found))):
        raise MissingFile(f"{root}: snapshot directories must be numbered 0..n-1, found {found}")
    return [os.path.join(root, str(i)) for i in found]


def load_sequence(root, vocab=None):
    vocab = Vocabulary() if vocab is None else vocab
    snaps = [load_snapshot_dir(p, vocab, i) for i, p in enumerate(snapshot_dirs(root))]
    return vocab, snaps


def write_snapshot_dir(snapshot, vocab, path):
    os.makedirs(path, exist_ok=True)
    for name in SPLITS:
        with open(os.path.join(path, f"{name}.txt"), "w", encoding="utf-8", newline="") as fh:
            for triple in snapshot.split(name):
                fh.write("\t".join(vocab.decode(triple)) + "\n")


def write_sequence(snapshots, vocab, root):
    for snap in snapshots:
        write_snapshot_dir(snap, vocab, os.path.join(root, str(snap.index)))


def compute_delta(prev_entities, prev_relations, snapshot):
    """New triples, entities and relations of ``snapshot`` relative to the prior seen sets."""
    prev_e = np.fromiter(prev_entities, dtype=np.int64)
    prev_r = np.fromiter(prev_relations, dtype=np.int64)
    return Delta(
        triples=snapshot.train,
        entities=np.setdiff1d(snapshot.entities, prev_e).astype(np.int64),
        relations=np.setdiff1d(snapshot.relations, prev_r).astype(np.int64),
    )


class EvolvingKG:
    """Cumulative state over a sequence of ingested snapshots."""

    def __init__(self, vocab=None):
        self.vocab = Vocabulary() if vocab is None else vocab
        self.snapshots: list[Snapshot] = []
        self.deltas: list[Delta] = []
        self.seen_entities: set[int] = set()
        self.seen_relations: set[int] = set()
        self._train: list[np.ndarray] = []

    def ingest(self, snapshot):
        delta = compute_delta(self.seen_entities, self.seen_relations, snapshot)
        self.seen_entities.update(int(x) for x in snapshot.entities)
        self.seen_relations.update(int(x) for x in snapshot.relations)
        self.snapshots.append(snapshot)
        self.deltas.append(delta)
        self._train.append(snapshot.train)
        return delta

    def cumulative_train(self):
        if not self._train:
            return empty_triples()
        return np.concatenate(self._train, axis=0)

    def known_triples(self):
        """Every train/valid/test triple ingested so far (filtered-ranking set)."""
        parts = [s.split(n) for s in self.snapshots for n in SPLITS]
        if not parts:
            return empty_triples()
        return np.concatenate(parts, axis=0)

    def element_counts(self):
        """Cumulative ``(|E|, |R|, |T|)`` over the train splits ingested so far."""
        n_triples = sum(len(t) for t in self._train)
        return len(self.seen_entities), len(self.seen_relations), n_triples


def element_counts(kg):
    return kg.element_counts()
