"""Final arbitration and answer-to-option resolution."""

from __future__ import annotations

import re
from typing import NamedTuple, Sequence

from omnichain import prompts, topology
from omnichain.backend import Backend, DecodingParams, GenerateResult
from omnichain.core import (
    Answer,
    MessageComposition,
    Pathway,
    PlanDirective,
    Query,
    Rationale,
    Stage,
    Streams,
    TextPart,
    TopologyFormat,
)


class DecideCall(NamedTuple):
    answer: Answer
    composition: MessageComposition
    result: GenerateResult


# ---------------------------------------------------------------- choice extraction

_PUNCT = re.compile(r"[^\w\s]|_", re.UNICODE)


def normalize(text: str) -> str:
    return " ".join(_PUNCT.sub(" ", text.casefold()).split())


_LETTER_PATTERNS = (
    re.compile(r"\(\s*([A-Za-z]|\d{1,2})\s*\)"),
    re.compile(r"(?i:answer|option|choice)\s*(?:is|:)?\s*\(?\s*([A-Z]|\d{1,2})\b"),
    re.compile(r"^\s*([A-Z]|\d{1,2})\s*[.):]"),
)


def _index_of(token: str, n: int) -> int | None:
    if token.isdigit():
        i = int(token) - 1
    elif len(token) == 1 and token.isalpha():
        i = ord(token.upper()) - ord("A")
    else:
        return None
    return i if 0 <= i < n else None


def _contains_run(hay: list[str], needle: list[str]) -> bool:
    m = len(needle)
    return m > 0 and any(hay[i : i + m] == needle for i in range(len(hay) - m + 1))


def extract_choice(raw: str, options: Sequence[str]) -> str | None:
    """Resolve free text to one of ``options``; None means Unresolved.

    Matchers run in priority order: exact text, option letter/number, then a
    unique whole-word substring.  Ties on exact text go to the first option.
    """
    if not options:
        raise ValueError("extract_choice needs at least one option")
    norm = normalize(raw)
    norm_opts = [normalize(o) for o in options]

    for opt, n in zip(options, norm_opts):
        if norm and norm == n:
            return opt

    tokens = norm.split()
    if len(tokens) == 1:
        i = _index_of(raw.strip().strip(".()").strip(), len(options))
        if i is not None:
            return options[i]
    for pat in _LETTER_PATTERNS:
        m = pat.search(raw)
        if m:
            i = _index_of(m.group(1), len(options))
            if i is not None:
                return options[i]

    hits = [i for i, n in enumerate(norm_opts) if _contains_run(tokens, n.split())]
    # An option that only matched as part of a longer matching option does not count.
    hits = [
        i
        for i in hits
        if not any(j != i and _contains_run(norm_opts[j].split(), norm_opts[i].split()) and norm_opts[j] != norm_opts[i] for j in hits)
    ]
    if len({norm_opts[i] for i in hits}) == 1:
        return options[hits[0]]
    return None


# ---------------------------------------------------------------- decisions


def _resolve(text: str, q: Query) -> Answer:
    raw = text.strip()
    return Answer(raw, extract_choice(raw, q.options) if q.options else None)


def intuitive_composition(
    d: PlanDirective, streams: Streams, q: Query, *, k: int = topology.DEFAULT_K, template: str = "open"
) -> MessageComposition:
    text = prompts.render_query(q, template)
    kw = dict(prompt=prompts.decide_prompt(template), stage=Stage.DECIDE)
    if d.format is TopologyFormat.INTERLEAVED:
        return topology.build_interleaved(streams, text, k, **kw)
    if d.format is TopologyFormat.PARALLEL:
        return topology.build_blocks(d.order, streams, text, **kw)
    return topology.build_sequential(d.order, streams, text, **kw)


def analytical_composition(r: Rationale, q: Query, *, template: str = "open") -> MessageComposition:
    if not r:
        raise ValueError("analytical decision needs a nonempty rationale")
    return MessageComposition(
        Stage.DECIDE,
        prompts.decide_prompt(template),
        (TextPart(r.render()), TextPart(prompts.render_query(q, template))),
    )


def run_intuitive(
    d: PlanDirective,
    streams: Streams,
    q: Query,
    client: Backend,
    *,
    k: int = topology.DEFAULT_K,
    template: str = "open",
    params: DecodingParams | None = None,
) -> DecideCall:
    if d.pathway is not Pathway.INTUITIVE:
        raise ValueError("intuitive decision needs an intuitive directive")
    comp = intuitive_composition(d, streams, q, k=k, template=template)
    result = client.generate(comp, params)
    return DecideCall(_resolve(result.text, q), comp, result)


def run_analytical(
    r: Rationale, q: Query, client: Backend, *, template: str = "open", params: DecodingParams | None = None
) -> DecideCall:
    comp = analytical_composition(r, q, template=template)
    result = client.generate(comp, params)
    return DecideCall(_resolve(result.text, q), comp, result)


def decide_intuitive(d: PlanDirective, streams: Streams, q: Query, client: Backend, **kw) -> Answer:
    return run_intuitive(d, streams, q, client, **kw).answer


def decide_analytical(r: Rationale, q: Query, client: Backend, **kw) -> Answer:
    return run_analytical(r, q, client, **kw).answer
