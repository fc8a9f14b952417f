import json

import pytest
from hypothesis import given, strategies as st

from omnichain.core import (
    JOINT,
    Answer,
    AudioStream,
    CallRecord,
    ImageSet,
    MediaPart,
    MessageComposition,
    ModalityKind,
    Pathway,
    PlanDirective,
    Provenance,
    Query,
    Rationale,
    Stage,
    Streams,
    TaskCategory,
    TextPart,
    TopologyFormat,
    Trace,
    VideoStream,
    dumps,
    validate_directive,
)

A, V, I = ModalityKind.AUDIO, ModalityKind.VIDEO, ModalityKind.IMAGES


def test_validate_ok():
    d = PlanDirective(TaskCategory.CROSS_MODAL, Pathway.ANALYTICAL, (A, V), TopologyFormat.SEQUENTIAL)
    assert validate_directive(d, {A, V}) == []


def test_validate_interleaved_needs_both():
    d = PlanDirective(TaskCategory.TEMPORAL_CENTRIC, Pathway.INTUITIVE, (A,), TopologyFormat.INTERLEAVED)
    assert validate_directive(d, {A, V}) == ["Interleaved requires Audio and Video"]


def test_validate_unavailable():
    d = PlanDirective(TaskCategory.VISUAL_CENTRIC, Pathway.INTUITIVE, (I,), TopologyFormat.PARALLEL)
    assert validate_directive(d, {A, V}) == ["Images not available"]


def test_validate_reports_every_violation():
    d = PlanDirective(TaskCategory.TEMPORAL_CENTRIC, Pathway.INTUITIVE, (I, I), TopologyFormat.INTERLEAVED)
    v = validate_directive(d, {A})
    assert "modality order must not repeat a modality" in v
    assert "Interleaved requires Audio and Video" in v
    assert "Interleaved supports only Audio and Video" in v
    assert "Images not available" in v
    assert validate_directive(d.with_(order=()), {A})[0] == "modality order must be nonempty"


def test_stream_invariants():
    with pytest.raises(ValueError):
        AudioStream("a", 0.0, "x")
    with pytest.raises(ValueError):
        VideoStream.from_timestamps("v", 4.0, [1.0, 1.0])
    with pytest.raises(ValueError):
        VideoStream.from_timestamps("v", 4.0, [5.0])
    with pytest.raises(ValueError):
        Query("q", "   ")
    with pytest.raises(ValueError):
        Query("q", "x?", ("a", "a"))


def test_streams_available_ignores_empty_image_set():
    s = Streams(images=ImageSet("i", ()))
    assert s.available() == frozenset()


def test_directive_wire_field_names():
    d = PlanDirective(TaskCategory.TEMPORAL_CENTRIC, Pathway.INTUITIVE, (A, V), TopologyFormat.INTERLEAVED)
    assert d.to_dict() == {
        "task": "temporal",
        "pathway": "intuitive",
        "modalities": ["audio", "video"],
        "format": "interleaved",
        "provenance": "planner",
    }


def test_call_record_wire_field_names():
    rec = CallRecord(Stage.DECIDE, ("text:abc",), 0.1, 0.01, 5)
    d = rec.to_dict()
    assert {"stage", "prefill_s", "gen_s_per_tok", "tokens"} <= set(d)
    assert d["stage"] == "decide" and d["tokens"] == 5
    with pytest.raises(ValueError):
        CallRecord(Stage.DECIDE, (), -1.0, 0.0, 1)


# ---------------------------------------------------------------- round trips

kinds = st.sampled_from(list(ModalityKind))
names = st.text(min_size=1, max_size=8)
durations = st.floats(min_value=0.001, max_value=1e4, allow_nan=False)


@st.composite
def videos(draw):
    dur = draw(durations)
    ts = draw(st.lists(st.floats(min_value=0, max_value=dur, allow_nan=False), max_size=10, unique=True))
    return VideoStream.from_timestamps(draw(names), dur, sorted(ts))


directives = st.builds(
    PlanDirective,
    st.sampled_from(list(TaskCategory)),
    st.sampled_from(list(Pathway)),
    st.lists(kinds, max_size=4).map(tuple),
    st.sampled_from(list(TopologyFormat)),
    st.sampled_from(list(Provenance)),
)

parts = st.one_of(
    st.builds(TextPart, st.text()),
    st.builds(lambda k, s, a, b: MediaPart(k, s, min(a, b), max(a, b), ref="r"), kinds, names, durations, durations),
    st.builds(lambda s, fr: MediaPart(I, s, frames=tuple(fr)), names, st.lists(names, max_size=3)),
)

records = st.builds(
    CallRecord,
    st.sampled_from(list(Stage)),
    st.lists(st.text(max_size=10), max_size=4).map(tuple),
    st.one_of(st.none(), st.floats(min_value=0, max_value=10)),
    st.floats(min_value=0, max_value=10),
    st.integers(min_value=0, max_value=1000),
    st.none(),
    st.text(max_size=20),
)
rationales = st.builds(
    Rationale, st.lists(st.tuples(st.one_of(kinds, st.just(JOINT)), st.text(max_size=20)), max_size=3).map(tuple)
)


@given(st.builds(Query, names, st.text(min_size=1).filter(str.strip), st.none() | st.lists(names, unique=True, max_size=4).map(tuple), st.none() | names))
def test_query_roundtrip(q):
    assert Query.from_dict(json.loads(dumps(q))) == q


@given(videos())
def test_video_roundtrip(v):
    assert VideoStream.from_dict(json.loads(dumps(v))) == v


@given(directives)
def test_directive_roundtrip(d):
    assert PlanDirective.from_dict(json.loads(dumps(d))) == d


@given(st.sampled_from(list(Stage)), st.text(min_size=1), st.lists(parts, min_size=1, max_size=4))
def test_composition_roundtrip(stage, prompt, ps):
    c = MessageComposition(stage, prompt, tuple(ps))
    back = MessageComposition.from_dict(json.loads(dumps(c)))
    assert back == c
    assert back.fingerprint() == c.fingerprint()


@given(records)
def test_call_record_roundtrip(rec):
    assert CallRecord.from_dict(json.loads(dumps(rec))) == rec


@given(rationales)
def test_rationale_roundtrip(r):
    assert Rationale.from_dict(json.loads(dumps(r))) == r


@given(names, st.none() | directives, st.lists(records, max_size=3), st.none() | st.builds(Answer, st.text(), st.none() | names), st.none() | rationales, st.floats(min_value=0, max_value=100), st.none() | st.text())
def test_trace_roundtrip(qid, d, calls, ans, rat, wall, err):
    t = Trace(qid, d, tuple(calls), ans, rat, wall, err, "backend" if err else None)
    assert Trace.from_dict(json.loads(dumps(t))) == t


def test_streams_roundtrip(av_streams):
    s = Streams(av_streams.audio, av_streams.video, ImageSet("i", ("a.jpg",)))
    assert Streams.from_dict(json.loads(dumps(s))) == s


def test_dumps_is_canonical():
    assert dumps({"b": 1, "a": 2}) == '{"a":2,"b":1}'
