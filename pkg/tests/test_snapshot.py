import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from displace.corpus import CitationGraph
from displace.displacement import batch_reports
from displace.errors import IncompatibleSnapshotError, SnapshotIntegrityError
from displace.snapshot import FORMAT_VERSION, graph_from_bytes, load_snapshot, save_snapshot, snapshot_bytes
from displace.synth import random_citation_graph


def test_header_layout(g1):
    data = snapshot_bytes(g1)
    assert data[:4] == b"DISP"
    assert data[4] == FORMAT_VERSION == 1


def test_round_trip_identical_reports(g1, tmp_path):
    path = tmp_path / "g1.snap"
    save_snapshot(g1, path)
    again = load_snapshot(path)
    assert again == g1
    assert again.ids == g1.ids
    assert list(batch_reports(again)) == list(batch_reports(g1))


def test_empty_graph_round_trip():
    empty = CitationGraph.from_records([], [])
    again = graph_from_bytes(snapshot_bytes(empty))
    assert again == empty and again.n_papers == 0


def test_bytes_are_deterministic(g1):
    assert snapshot_bytes(g1) == snapshot_bytes(graph_from_bytes(snapshot_bytes(g1)))


def test_corrupted_trailing_bytes(g1):
    data = bytearray(snapshot_bytes(g1))
    data[-1] ^= 0xFF
    with pytest.raises(SnapshotIntegrityError):
        graph_from_bytes(bytes(data))


@pytest.mark.parametrize("cut", [1, 8, 20])
def test_truncated_file(g1, cut):
    with pytest.raises(SnapshotIntegrityError):
        graph_from_bytes(snapshot_bytes(g1)[:-cut])


def test_flipped_payload_byte(g1):
    data = bytearray(snapshot_bytes(g1))
    data[30] ^= 0x01
    with pytest.raises(SnapshotIntegrityError):
        graph_from_bytes(bytes(data))


def test_bad_magic_and_version(g1):
    data = snapshot_bytes(g1)
    with pytest.raises(IncompatibleSnapshotError):
        graph_from_bytes(b"NOPE" + data[4:])
    with pytest.raises(IncompatibleSnapshotError):
        graph_from_bytes(data[:4] + bytes([2]) + data[5:])


def test_unicode_ids_and_authors():
    from displace.corpus import PaperRecord

    recs = [
        PaperRecord("é-1", 2000, authors=("Gödel, K.",)),
        PaperRecord("日本", 2001, fields=(3, 1), authors=()),
        PaperRecord("x", 2002),
    ]
    g = CitationGraph.from_records(recs, [("日本", "é-1"), ("x", "é-1")])
    again = graph_from_bytes(snapshot_bytes(g))
    assert again == g
    assert again.authors(1) == () and again.authors(2) is None


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 80))
def test_round_trip_property(seed, n):
    g = random_citation_graph(np.random.default_rng(seed), n)
    again = graph_from_bytes(snapshot_bytes(g))
    assert again == g
    assert [list(again.citers(i)) for i in range(n)] == [list(g.citers(i)) for i in range(n)]
