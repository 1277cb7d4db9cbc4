import json

import pytest

from ausokit.combinators import materialize
from ausokit.constructions import (
    ConstructionError,
    build_reset,
    realize_level,
    realize_range,
    rule_state,
    starting_vertex,
    tie_list,
)
from ausokit.cube_core import Direction
from ausokit.pivot_engine import run_to_sink
from ausokit.verifier import check_acyclic, check_uso_exhaustive


def _d(bundle, k, positive, size=4):
    return Direction(bundle * size + k - 1, positive)


def test_tie_list_cunningham_level0():
    want = [_d(0, 1, True), _d(0, 2, False), _d(0, 3, True), _d(0, 1, False),
            _d(0, 4, True), _d(0, 3, False), _d(0, 2, True), _d(0, 4, False)]
    assert tie_list("cunningham", 0) == want


def test_tie_list_zadeh():
    t0 = tie_list("zadeh", 0)
    want = [_d(0, 1, True, 6), _d(0, 2, False, 6), _d(0, 3, True, 6),
            _d(0, 1, False, 6), _d(0, 4, True, 6), _d(0, 3, False, 6),
            _d(0, 5, True, 6), _d(0, 4, False, 6), _d(0, 6, True, 6),
            _d(0, 5, False, 6), _d(0, 2, True, 6), _d(0, 6, False, 6)]
    assert t0 == want
    t1 = tie_list("zadeh", 1)
    assert len(t1) == 24
    assert t1[:12] == t0
    assert all(d.coord >= 6 for d in t1[12:])


def test_tie_list_rejects_johnson():
    with pytest.raises(ConstructionError):
        tie_list("johnson", 1)


def test_starting_vertices():
    assert starting_vertex("johnson", 0) == 0
    assert starting_vertex("johnson", 4) == 0
    assert starting_vertex("cunningham", 1) == (1 << 1) | (1 << 5)
    assert starting_vertex("zadeh", 0) == 1 << 1


def test_build_reset_r1_matches_transcription(johnson_frames):
    _, r1 = johnson_frames["r1"]
    built = build_reset(1)
    assert materialize(built.oracle).table == r1.table


def test_build_reset_r2_walk_and_structure():
    r2 = build_reset(2)
    assert r2.oracle.dimension == 8
    v = 0b1001 | (0b1001 << 4)  # {c_0^1, c_0^4, c_1^1, c_1^4}
    used = []
    while v:
        out = r2.oracle.evaluate(v)
        assert bin(out).count("1") == 1
        used.append(out.bit_length() - 1)
        v ^= out
    assert used == [0, 3, 4, 7]  # -c_0^1, -c_0^4, -c_1^1, -c_1^4
    table = materialize(r2.oracle)
    assert check_uso_exhaustive(table).passed
    assert check_acyclic(table).passed


def test_realize_base_cases(built_levels):
    assert built_levels["cunningham"][0][0].path_length == 5
    assert built_levels["johnson"][0][0].path_length == 6
    assert built_levels["zadeh"][0][0].path_length == 20


def test_johnson_level1_projection_and_growth(built_levels):
    level0, trace0 = built_levels["johnson"][0]
    level1, trace1 = built_levels["johnson"][1]
    assert level1.dimension == 8
    assert len(trace1) > 2 * len(trace0)
    inner = [s.direction for s in trace1.steps if s.direction.coord < 4]
    assert inner[:len(trace0)] == trace0.directions()
    assert inner[-len(trace0):] == trace0.directions()


def test_zadeh_level1_imbalanced_set(built_levels):
    from ausokit.pivot_engine import balance_of
    level1, trace1 = built_levels["zadeh"][1]
    assert level1.dimension == 12
    state = rule_state("zadeh", 1)
    for step in trace1.steps:
        state.usage[step.direction] += 1
    im = {Direction(j * 6 + k, False) for j in (0, 1) for k in (2, 3, 4, 5)}
    for d in state.tie_list:
        assert balance_of(state, d) == (1 if d in im else 0)


def test_replay_fixpoint(built_levels):
    for family, chain in built_levels.items():
        for level, trace in chain[:3]:
            again = run_to_sink(level.oracle, level.start, family,
                                rule_state(family, level.level),
                                bundle_size=level.bundle_size)
            assert again.directions() == trace.directions()
            assert again.end == trace.end == level.expected_sink


def test_level_cache_roundtrip(tmp_path):
    first = realize_range("cunningham", 2, cache_dir=tmp_path)
    files = sorted(p.name for p in tmp_path.glob("*.json"))
    assert files == [f"cunningham_level{i}.json" for i in range(3)]
    payload = json.loads((tmp_path / "cunningham_level1.json").read_text())
    assert payload["path_length"] == first[1][0].path_length
    assert set(payload["frame_files"]) == {"f1", "f2", "f3"}
    assert all(len(h) == 64 for h in payload["frame_files"].values())
    before = {p.name: p.read_bytes() for p in tmp_path.glob("*.json")}
    second = realize_range("cunningham", 2, cache_dir=tmp_path)
    after = {p.name: p.read_bytes() for p in tmp_path.glob("*.json")}
    assert before == after  # rerun over existing caches is a no-op
    for (a, ta), (b, tb) in zip(first, second):
        assert ta.directions() == tb.directions()
        assert a.assignments == b.assignments


def test_cached_level_serves_same_oracle(tmp_path):
    built, _ = realize_level("zadeh", 1, cache_dir=tmp_path)
    reloaded, _ = realize_level("zadeh", 1, cache_dir=tmp_path)
    for v in range(0, 1 << 12, 17):
        assert built.oracle.evaluate(v) == reloaded.oracle.evaluate(v)


def test_assignments_use_known_frames(built_levels):
    for family, chain in built_levels.items():
        for level, _ in chain[1:]:
            assert level.assignments
            assert set(level.assignments.values()) <= {"f1", "f2", "f3"}


def test_unknown_family_rejected():
    with pytest.raises(ConstructionError):
        realize_level("dantzig", 0)
