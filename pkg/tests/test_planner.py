import pytest
from hypothesis import given, strategies as st

from omnichain.backend import MockBackend, MockRule, TransportError
from omnichain.core import (
    ModalityKind,
    Pathway,
    PlanDirective,
    Provenance,
    Query,
    Stage,
    Streams,
    TaskCategory,
    TopologyFormat,
    validate_directive,
)
from omnichain.planner import (
    PlannerPolicy,
    PlanParseError,
    PolicyMode,
    build_plan_prompt,
    canonical_format,
    fallback_directive,
    parse_plan,
    plan,
    validate_and_repair,
)

A, V, I = ModalityKind.AUDIO, ModalityKind.VIDEO, ModalityKind.IMAGES
T = TaskCategory
F = TopologyFormat
LENIENT = PlannerPolicy(PolicyMode.LENIENT, True)
STRICT = PlannerPolicy(PolicyMode.STRICT)
Q = Query("q", "Is the drum louder than the guitar?", ("Yes", "No"))


def test_plan_prompt_is_text_only():
    c = build_plan_prompt(Q, {A, V})
    assert c.stage is Stage.PLAN
    assert c.media_parts() == []


def test_plan_prompt_schema_completeness():
    system = build_plan_prompt(Q, {A, V}).role_prompt
    for word in ('"audio"', '"visual"', '"temporal"', '"cross"', '"parallel"', '"sequential"', '"interleaved"'):
        assert word in system
    assert '"intuitive"' in system and '"analytical"' in system


def test_plan_prompt_lists_only_available():
    req = build_plan_prompt(Q, {A, V}).text()
    assert "Available modalities: audio, video" in req
    assert "images" not in req
    assert "Available modalities: audio, video, images" in build_plan_prompt(Q, {A, V, I}).text()
    assert Q.text in req


def test_parse_canonical():
    d = parse_plan('{"task":"temporal","pathway":"intuitive","modalities":["audio","video"],"format":"interleaved"}')
    assert d == PlanDirective(T.TEMPORAL_CENTRIC, Pathway.INTUITIVE, (A, V), F.INTERLEAVED, Provenance.PLANNER)


def test_parse_tolerates_prose_and_case():
    d = parse_plan('Sure! Here is my plan: {"task":"Audio","pathway":"ANALYTICAL","modalities":["audio"],"format":"Parallel"} hope it helps')
    assert d == PlanDirective(T.AUDIO_CENTRIC, Pathway.ANALYTICAL, (A,), F.PARALLEL)


def test_parse_aliases():
    d = parse_plan('{"task":"Cross-modal","pathway":"intuitive","modalities":["Video","audio"],"format":"sequential"}')
    assert d.task is T.CROSS_MODAL and d.order == (V, A)


def test_parse_first_object_wins():
    d = parse_plan('x {"task":"audio","pathway":"intuitive","modalities":["audio"],"format":"parallel"} '
                   '{"task":"visual","pathway":"intuitive","modalities":["video"],"format":"parallel"}')
    assert d.task is T.AUDIO_CENTRIC


@pytest.mark.parametrize(
    "text",
    [
        '{"task":"musical"}',
        '{"task":"musical","pathway":"intuitive","modalities":["audio"],"format":"parallel"}',
        '{"task":"audio","pathway":"intuitive","modalities":["smell"],"format":"parallel"}',
        '{"task":"audio","pathway":"intuitive","modalities":["audio"],"format":"braided"}',
        '{"task":"audio","pathway":"intuitive","modalities":["audio"]}',
        '{"task":"audio","pathway":"intuitive","modalities":["audio"],"format":',
        "I don't know",
        "",
        "[1, 2, 3]",
    ],
)
def test_parse_errors(text):
    with pytest.raises(PlanParseError):
        parse_plan(text)


def test_canonical_format():
    assert canonical_format(T.TEMPORAL_CENTRIC) is F.INTERLEAVED
    assert canonical_format(T.AUDIO_CENTRIC) is F.PARALLEL
    assert canonical_format(T.VISUAL_CENTRIC) is F.PARALLEL
    assert canonical_format(T.CROSS_MODAL) is F.SEQUENTIAL


def test_fallback():
    assert fallback_directive({A, V}) == PlanDirective(T.CROSS_MODAL, Pathway.INTUITIVE, (A, V), F.SEQUENTIAL, Provenance.FALLBACK)
    assert fallback_directive({V, I}).order == (V,)
    assert fallback_directive({I}).order == (I,)
    with pytest.raises(ValueError):
        fallback_directive(set())


def test_repair_unrepairable_interleave_falls_back():
    d = PlanDirective(T.TEMPORAL_CENTRIC, Pathway.INTUITIVE, (A,), F.INTERLEAVED)
    assert validate_and_repair(d, {A, V}, LENIENT) == fallback_directive({A, V})


def test_repair_format_by_task():
    d = PlanDirective(T.AUDIO_CENTRIC, Pathway.INTUITIVE, (A, V), F.SEQUENTIAL)
    got = validate_and_repair(d, {A, V}, LENIENT)
    assert got == d.with_(format=F.PARALLEL, provenance=Provenance.REPAIRED)


def test_repair_flag_off_keeps_format():
    d = PlanDirective(T.AUDIO_CENTRIC, Pathway.INTUITIVE, (A, V), F.SEQUENTIAL)
    assert validate_and_repair(d, {A, V}, PlannerPolicy(PolicyMode.LENIENT, False)) == d


def test_repair_drops_unavailable():
    d = PlanDirective(T.CROSS_MODAL, Pathway.ANALYTICAL, (I, A), F.SEQUENTIAL)
    got = validate_and_repair(d, {A, V}, LENIENT)
    assert got.order == (A,) and got.provenance is Provenance.REPAIRED


def test_strict_valid_unchanged_and_invalid_falls_back():
    d = PlanDirective(T.AUDIO_CENTRIC, Pathway.INTUITIVE, (A, V), F.SEQUENTIAL)
    assert validate_and_repair(d, {A, V}, STRICT) == d
    bad = d.with_(order=(I,))
    assert validate_and_repair(bad, {A, V}, STRICT) == fallback_directive({A, V})


directives = st.builds(
    PlanDirective,
    st.sampled_from(list(T)),
    st.sampled_from(list(Pathway)),
    st.lists(st.sampled_from([A, V, I]), max_size=4).map(tuple),
    st.sampled_from(list(F)),
)
availability = st.sets(st.sampled_from([A, V, I]), min_size=1)
policies = st.sampled_from([LENIENT, STRICT, PlannerPolicy(PolicyMode.LENIENT, False)])


@given(directives, availability, policies)
def test_repair_idempotent_and_valid(d, avail, policy):
    once = validate_and_repair(d, avail, policy)
    assert validate_and_repair(once, avail, policy) == once
    assert validate_directive(once, avail) == []


@given(availability)
def test_fallback_fixpoint(avail):
    assert validate_directive(fallback_directive(avail), avail) == []


def _client(text):
    return MockBackend([MockRule(text, stage=Stage.PLAN), MockRule("unused")])


def test_plan_scripted_temporal(av_streams):
    c = _client('{"task":"temporal","pathway":"intuitive","modalities":["audio","video"],"format":"interleaved"}')
    d = plan(Q, av_streams, c, LENIENT)
    assert (d.task, d.format) == (T.TEMPORAL_CENTRIC, F.INTERLEAVED)
    ((fp, stage),) = c.call_log()
    assert stage is Stage.PLAN and all(x.startswith("text:") for x in fp)


def test_plan_unparseable_falls_back(av_streams):
    assert plan(Q, av_streams, _client("I don't know"), LENIENT) == fallback_directive({A, V})


def test_plan_unavailable_modality_is_dropped(av_streams):
    c = _client('{"task":"cross","pathway":"intuitive","modalities":["images","video"],"format":"sequential"}')
    d = plan(Q, av_streams, c, LENIENT)
    assert d.order == (V,) and d.provenance is Provenance.REPAIRED


def test_plan_propagates_transport_errors(av_streams):
    class Broken(MockBackend):
        def _generate(self, c, p):
            raise TransportError("down")

    with pytest.raises(TransportError):
        plan(Q, av_streams, Broken.echo(), LENIENT)


def test_plan_needs_streams():
    with pytest.raises(ValueError):
        plan(Q, Streams(), _client("x"), LENIENT)
