"""Evidence extraction along the planned topology.

Sequential and interleaved plans issue one call whose output is kept as a
single joint segment.  Parallel plans issue one isolated call per modality;
branches may run concurrently but their segments are always assembled in
plan order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

from omnichain import prompts, topology
from omnichain.backend import Backend, DecodingParams, GenerateResult
from omnichain.core import (
    JOINT,
    MessageComposition,
    Pathway,
    PlanDirective,
    Query,
    Rationale,
    Stage,
    Streams,
    TopologyFormat,
)


class ReasonCall(NamedTuple):
    composition: MessageComposition
    result: GenerateResult


def reason_compositions(
    d: PlanDirective, streams: Streams, q: Query, k: int = topology.DEFAULT_K
) -> list[MessageComposition]:
    text = prompts.render_query(q, "open")
    kw = dict(prompt=prompts.reason_prompt(), stage=Stage.REASON)
    if d.format is TopologyFormat.PARALLEL:
        return topology.build_parallel(d.order, streams, text, **kw)
    if d.format is TopologyFormat.INTERLEAVED:
        return [topology.build_interleaved(streams, text, k, **kw)]
    return [topology.build_sequential(d.order, streams, text, **kw)]


def run_reasoning(
    d: PlanDirective,
    streams: Streams,
    q: Query,
    client: Backend,
    *,
    k: int = topology.DEFAULT_K,
    params: DecodingParams | None = None,
    max_in_flight: int | None = None,
) -> tuple[Rationale, list[ReasonCall]]:
    if d.pathway is not Pathway.ANALYTICAL:
        raise ValueError("reasoning runs only on the analytical pathway")
    comps = reason_compositions(d, streams, q, k)
    if len(comps) == 1:
        results = [client.generate(comps[0], params)]
    else:
        workers = max(1, min(max_in_flight or len(comps), len(comps)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map() yields in submission order and re-raises the first branch failure.
            results = list(pool.map(lambda c: client.generate(c, params), comps))
    calls = [ReasonCall(c, r) for c, r in zip(comps, results)]
    if d.format is TopologyFormat.PARALLEL:
        rationale = Rationale(tuple((kind, r.text.strip()) for kind, r in zip(d.order, results)))
    else:
        rationale = Rationale(((JOINT, results[0].text.strip()),))
    return rationale, calls


def reason(
    d: PlanDirective,
    streams: Streams,
    q: Query,
    client: Backend,
    *,
    k: int = topology.DEFAULT_K,
    params: DecodingParams | None = None,
    max_in_flight: int | None = None,
) -> Rationale:
    return run_reasoning(d, streams, q, client, k=k, params=params, max_in_flight=max_in_flight)[0]
