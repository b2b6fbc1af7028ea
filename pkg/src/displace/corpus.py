"""Paper metadata, the immutable citation graph, ingest and eligibility filters.

Papers get dense integer ids in ingest order. Both edge directions are kept
as CSR arrays (``offsets``/``indices``) so that reference lists and citer
lists are contiguous slices.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import MalformedInputError, UnknownIdError

logger = logging.getLogger(__name__)

DOC_TYPES = ("journal-article", "book", "conference", "other")
_DOC_CODE = {name: code for code, name in enumerate(DOC_TYPES)}

PLAUSIBLE_YEARS = (1000, 2100)


@dataclass(frozen=True)
class PaperRecord:
    """Metadata of one paper.

    ``fields`` holds integer field-label ids; ``authors`` is ``None`` when no
    author data is available (distinct from an empty author list).
    """

    id: str
    year: int
    doc_type: str = "journal-article"
    fields: tuple[int, ...] = ()
    authors: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.doc_type not in _DOC_CODE:
            raise ValueError(f"unknown doc_type {self.doc_type!r}")
        flds = tuple(int(f) for f in self.fields)
        if len(set(flds)) != len(flds):
            raise ValueError(f"paper {self.id!r}: duplicate field labels")
        if any(f < 0 for f in flds):
            raise ValueError(f"paper {self.id!r}: negative field label")
        object.__setattr__(self, "fields", flds)
        if self.authors is not None:
            object.__setattr__(self, "authors", tuple(self.authors))


@dataclass(frozen=True)
class CorpusFilter:
    """Eligibility rules.

    ``journal_only`` and ``year_range`` decide which papers enter the graph.
    ``min_references`` and ``min_citations`` decide which papers may be a
    focal paper; they are evaluated on raw in-corpus degrees.
    """

    journal_only: bool = True
    min_references: int = 1
    min_citations: int = 1
    year_range: tuple[int, int] | None = None

    def __post_init__(self):
        if self.min_references < 0 or self.min_citations < 0:
            raise ValueError("min_references and min_citations must be >= 0")
        if self.year_range is not None:
            lo, hi = self.year_range
            if lo > hi:
                raise ValueError(f"year_range lower bound {lo} exceeds upper bound {hi}")

    def admits(self, record: PaperRecord) -> bool:
        if self.journal_only and record.doc_type != "journal-article":
            return False
        if self.year_range is not None:
            lo, hi = self.year_range
            if not lo <= record.year <= hi:
                return False
        return True

    def focal_mask(self, graph: "CitationGraph") -> np.ndarray:
        """Boolean mask of papers allowed to act as focal papers."""
        return (graph.reference_counts >= self.min_references) & (
            graph.citation_counts >= self.min_citations
        )


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _csr(n, rows, cols):
    """Offsets and sorted column indices for the (row, col) pairs."""
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
    return offsets, cols


class CitationGraph:
    """Immutable bidirectional citation adjacency over dense paper ids.

    ``references(i)`` are the papers ``i`` cites, ``citers(i)`` the papers
    citing ``i``. Both are sorted ascending. Instances expose no mutators and
    their arrays are read-only, so a graph can be shared between threads.
    """

    def __init__(
        self,
        ids: Sequence[str],
        years,
        doc_types,
        field_offsets,
        field_values,
        authors: Sequence[tuple[str, ...] | None],
        out_offsets,
        out_targets,
    ):
        n = len(ids)
        self._ids = tuple(str(i) for i in ids)
        if len(set(self._ids)) != n:
            raise ValueError("paper ids must be unique")
        self._years = _frozen(years, np.int32)
        self._doc_types = _frozen(doc_types, np.uint8)
        self._field_offsets = _frozen(field_offsets, np.int64)
        self._field_values = _frozen(field_values, np.int32)
        self._authors = tuple(None if a is None else tuple(a) for a in authors)
        self._out_offsets = _frozen(out_offsets, np.int64)
        self._out_targets = _frozen(out_targets, np.int32)
        for name, arr, length in (
            ("years", self._years, n),
            ("doc_types", self._doc_types, n),
            ("field_offsets", self._field_offsets, n + 1),
            ("out_offsets", self._out_offsets, n + 1),
        ):
            if len(arr) != length:
                raise ValueError(f"{name} has length {len(arr)}, expected {length}")
        if len(self._authors) != n:
            raise ValueError("authors must have one entry per paper")

        rows = np.repeat(np.arange(n, dtype=np.int32), np.diff(self._out_offsets))
        cols = self._out_targets
        if len(cols) and (cols.min() < 0 or cols.max() >= n):
            raise ValueError("edge target out of range")
        if np.any(rows == cols):
            raise ValueError("self-citations are not allowed")
        if len(cols):
            key = rows.astype(np.int64) * n + cols
            if np.any(np.diff(key) <= 0):
                raise ValueError("out edges must be sorted per paper and free of duplicates")
        in_offsets, in_sources = _csr(n, cols, rows)
        self._in_offsets = _frozen(in_offsets, np.int64)
        self._in_sources = _frozen(in_sources, np.int32)
        self._index = {pid: i for i, pid in enumerate(self._ids)}

    # -- construction -----------------------------------------------------

    @classmethod
    def from_records(
        cls,
        records: Sequence[PaperRecord],
        edges: Iterable[tuple[str, str]] = (),
    ) -> "CitationGraph":
        """Build a graph from records and ``(citing_id, cited_id)`` pairs.

        Duplicate edges are merged. Self-citations and unknown ids raise.
        """
        index = {}
        for i, rec in enumerate(records):
            if rec.id in index:
                raise ValueError(f"duplicate paper id {rec.id!r}")
            index[rec.id] = i
        src, dst = [], []
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-citation {a!r} -> {b!r}")
            try:
                src.append(index[a])
                dst.append(index[b])
            except KeyError as exc:
                raise UnknownIdError(f"edge {a!r} -> {b!r} references unknown id {exc.args[0]!r}") from None
        return cls.from_arrays(records, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64))

    @classmethod
    def from_arrays(cls, records: Sequence[PaperRecord], citing, cited) -> "CitationGraph":
        """Build from records and parallel arrays of internal ids (deduplicated)."""
        n = len(records)
        citing = np.asarray(citing, dtype=np.int64)
        cited = np.asarray(cited, dtype=np.int64)
        if len(citing):
            key = np.unique(citing * max(n, 1) + cited)
            citing, cited = key // max(n, 1), key % max(n, 1)
        out_offsets, out_targets = _csr(n, citing, cited)
        field_offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum([len(r.fields) for r in records], out=field_offsets[1:])
        field_values = np.fromiter(
            (f for r in records for f in r.fields), dtype=np.int32, count=int(field_offsets[-1])
        )
        return cls(
            ids=[r.id for r in records],
            years=np.array([r.year for r in records], dtype=np.int32),
            doc_types=np.array([_DOC_CODE[r.doc_type] for r in records], dtype=np.uint8),
            field_offsets=field_offsets,
            field_values=field_values,
            authors=[r.authors for r in records],
            out_offsets=out_offsets,
            out_targets=out_targets,
        )

    # -- accessors --------------------------------------------------------

    @property
    def n_papers(self) -> int:
        return len(self._ids)

    def __len__(self):
        return len(self._ids)

    @property
    def n_edges(self) -> int:
        return len(self._out_targets)

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def years(self) -> np.ndarray:
        return self._years

    @property
    def doc_type_codes(self) -> np.ndarray:
        return self._doc_types

    @property
    def out_offsets(self) -> np.ndarray:
        return self._out_offsets

    @property
    def out_targets(self) -> np.ndarray:
        return self._out_targets

    @property
    def in_offsets(self) -> np.ndarray:
        return self._in_offsets

    @property
    def in_sources(self) -> np.ndarray:
        return self._in_sources

    @property
    def field_offsets(self) -> np.ndarray:
        return self._field_offsets

    @property
    def field_values(self) -> np.ndarray:
        return self._field_values

    @property
    def author_lists(self) -> tuple[tuple[str, ...] | None, ...]:
        return self._authors

    def index_of(self, paper_id: str) -> int:
        try:
            return self._index[paper_id]
        except KeyError:
            raise UnknownIdError(f"unknown paper id {paper_id!r}") from None

    def references(self, i: int) -> np.ndarray:
        return self._out_targets[self._out_offsets[i] : self._out_offsets[i + 1]]

    def citers(self, i: int) -> np.ndarray:
        return self._in_sources[self._in_offsets[i] : self._in_offsets[i + 1]]

    def fields(self, i: int) -> np.ndarray:
        return self._field_values[self._field_offsets[i] : self._field_offsets[i + 1]]

    def authors(self, i: int) -> tuple[str, ...] | None:
        return self._authors[i]

    def paper(self, i: int) -> PaperRecord:
        return PaperRecord(
            id=self._ids[i],
            year=int(self._years[i]),
            doc_type=DOC_TYPES[self._doc_types[i]],
            fields=tuple(int(f) for f in self.fields(i)),
            authors=self._authors[i],
        )

    def records(self) -> Iterator[PaperRecord]:
        for i in range(self.n_papers):
            yield self.paper(i)

    def edges(self) -> Iterator[tuple[int, int]]:
        """Yield ``(citing, cited)`` internal id pairs in CSR order."""
        for i in range(self.n_papers):
            for j in self.references(i):
                yield i, int(j)

    @cached_property
    def citation_counts(self) -> np.ndarray:
        return _frozen(np.diff(self._in_offsets), np.int64)

    @cached_property
    def reference_counts(self) -> np.ndarray:
        return _frozen(np.diff(self._out_offsets), np.int64)

    @cached_property
    def citation_rank(self) -> np.ndarray:
        """Position of each paper when ordered by citations (desc), year, id.

        The smallest rank among a paper's references identifies its
        most-cited reference. Ties fall to the earlier year, then the
        lexicographically smaller external id, so the choice does not depend
        on internal numbering.
        """
        id_rank = np.argsort(np.argsort(np.array(self._ids, dtype=object), kind="stable"), kind="stable")
        order = np.lexsort((id_rank, self._years, -self.citation_counts))
        rank = np.empty(self.n_papers, dtype=np.int64)
        rank[order] = np.arange(self.n_papers)
        return _frozen(rank, np.int64)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Sparse ``citing x cited`` 0/1 matrix."""
        n = self.n_papers
        data = np.ones(self.n_edges, dtype=np.int64)
        return sp.csr_matrix((data, self._out_targets, self._out_offsets), shape=(n, n))

    @cached_property
    def author_matrix(self) -> sp.csr_matrix:
        """Sparse ``paper x author`` incidence over exact author strings."""
        vocab: dict[str, int] = {}
        rows, cols = [], []
        for i, names in enumerate(self._authors):
            if not names:
                continue
            for name in set(names):
                rows.append(i)
                cols.append(vocab.setdefault(name, len(vocab)))
        data = np.ones(len(rows), dtype=np.int64)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_papers, max(len(vocab), 1)))

    @cached_property
    def has_authors(self) -> np.ndarray:
        return _frozen([bool(a) for a in self._authors], bool)

    # -- comparison -------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, CitationGraph):
            return NotImplemented
        return (
            self._ids == other._ids
            and self._authors == other._authors
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in (
                    "_years",
                    "_doc_types",
                    "_field_offsets",
                    "_field_values",
                    "_out_offsets",
                    "_out_targets",
                )
            )
        )

    __hash__ = None

    def __repr__(self):
        return f"CitationGraph(n_papers={self.n_papers}, n_edges={self.n_edges})"


# -- ingest ---------------------------------------------------------------


@dataclass
class IngestStats:
    """Counters reported by :func:`ingest`."""

    papers_read: int = 0
    papers_kept: int = 0
    rejected_implausible_year: int = 0
    rejected_doc_type: int = 0
    rejected_year_range: int = 0
    edges_read: int = 0
    edges_kept: int = 0
    duplicate_edges: int = 0
    self_loops: int = 0
    unknown_id_edges: int = 0
    filtered_edges: int = 0
    warnings: list[str] = field(default_factory=list)

    def as_dict(self):
        d = dict(self.__dict__)
        d.pop("warnings")
        return d


def parse_paper_line(line: str, lineno: int | None = None, source=None) -> PaperRecord:
    """Parse one ``papers.jsonl`` line into a :class:`PaperRecord`."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedInputError(f"invalid JSON ({exc.msg})", lineno, source) from None
    if not isinstance(obj, dict):
        raise MalformedInputError("record is not a JSON object", lineno, source)
    try:
        pid = obj["id"]
        year = obj["year"]
    except KeyError as exc:
        raise MalformedInputError(f"missing key {exc.args[0]!r}", lineno, source) from None
    if not isinstance(pid, str) or not pid:
        raise MalformedInputError("'id' must be a nonempty string", lineno, source)
    if isinstance(year, bool) or not isinstance(year, int):
        raise MalformedInputError("'year' must be an integer", lineno, source)
    fields = obj.get("fields", [])
    authors = obj.get("authors")
    if not isinstance(fields, list) or not all(isinstance(f, int) and not isinstance(f, bool) for f in fields):
        raise MalformedInputError("'fields' must be a list of integers", lineno, source)
    if authors is not None and (
        not isinstance(authors, list) or not all(isinstance(a, str) for a in authors)
    ):
        raise MalformedInputError("'authors' must be a list of strings", lineno, source)
    try:
        return PaperRecord(
            id=pid,
            year=year,
            doc_type=obj.get("doc_type", "journal-article"),
            fields=tuple(fields),
            authors=None if authors is None else tuple(authors),
        )
    except ValueError as exc:
        raise MalformedInputError(str(exc), lineno, source) from None


def _lines(source):
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def ingest(
    papers_source,
    edges_source,
    filter: CorpusFilter | None = None,
    strict: bool = False,
    plausible_years: tuple[int, int] = PLAUSIBLE_YEARS,
) -> tuple[CitationGraph, IngestStats]:
    """Read papers and edges, apply the membership filter and build the graph.

    ``papers_source`` and ``edges_source`` are paths or iterables of lines
    (``papers.jsonl`` records and ``citing<TAB>cited`` pairs). Records with
    an implausible year are rejected and counted. Edges touching a paper
    that was filtered out are dropped. Edges with an id absent from the
    papers file are skipped and counted, or raise in ``strict`` mode.
    """
    filter = filter or CorpusFilter()
    stats = IngestStats()
    src_name = str(papers_source) if isinstance(papers_source, (str, Path)) else None
    kept: list[PaperRecord] = []
    seen: set[str] = set()
    lo, hi = plausible_years
    for lineno, line in enumerate(_lines(papers_source), start=1):
        if not line.strip():
            continue
        rec = parse_paper_line(line, lineno, src_name)
        stats.papers_read += 1
        if rec.id in seen:
            raise MalformedInputError(f"duplicate paper id {rec.id!r}", lineno, src_name)
        seen.add(rec.id)
        if not lo <= rec.year <= hi:
            stats.rejected_implausible_year += 1
            continue
        if filter.journal_only and rec.doc_type != "journal-article":
            stats.rejected_doc_type += 1
            continue
        if not filter.admits(rec):
            stats.rejected_year_range += 1
            continue
        kept.append(rec)
    index = {rec.id: i for i, rec in enumerate(kept)}

    edge_name = str(edges_source) if isinstance(edges_source, (str, Path)) else None
    src, dst = [], []
    for lineno, line in enumerate(_lines(edges_source), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise MalformedInputError("expected 'citing_id<TAB>cited_id'", lineno, edge_name)
        a, b = parts
        stats.edges_read += 1
        if a == b:
            stats.self_loops += 1
            continue
        ia, ib = index.get(a), index.get(b)
        if ia is None or ib is None:
            if a in seen and b in seen:
                stats.filtered_edges += 1
                continue
            if strict:
                missing = a if a not in seen else b
                raise UnknownIdError(f"{edge_name or 'edges'}:{lineno}: unknown paper id {missing!r}")
            stats.unknown_id_edges += 1
            continue
        src.append(ia)
        dst.append(ib)

    n = len(kept)
    key = np.array(src, dtype=np.int64) * max(n, 1) + np.array(dst, dtype=np.int64)
    uniq = np.unique(key)
    stats.duplicate_edges = len(key) - len(uniq)
    graph = CitationGraph.from_arrays(kept, uniq // max(n, 1), uniq % max(n, 1))
    stats.papers_kept = graph.n_papers
    stats.edges_kept = graph.n_edges
    if stats.unknown_id_edges:
        stats.warnings.append(f"skipped {stats.unknown_id_edges} edges with unknown ids")
    if stats.self_loops:
        stats.warnings.append(f"rejected {stats.self_loops} self-citations")
    for w in stats.warnings:
        logger.warning(w)
    return graph, stats


def write_papers_jsonl(records: Iterable[PaperRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {"id": r.id, "year": r.year, "doc_type": r.doc_type, "fields": list(r.fields)}
            if r.authors is not None:
                obj["authors"] = list(r.authors)
            fh.write(json.dumps(obj) + "\n")


def write_edges_tsv(graph: CitationGraph, path) -> None:
    ids = graph.ids
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in graph.edges():
            fh.write(f"{ids[a]}\t{ids[b]}\n")
