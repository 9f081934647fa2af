"""Pooling revealed and stated preference data for joint estimation."""

from __future__ import annotations

from dataclasses import replace

from .alternatives import Mode
from .data import Dataset, DataValidationError
from .model import SOCIODEMOGRAPHIC, ModelSpec

MU_SP_UNIDENTIFIED = "mu_sp unidentified: no SP observations"


def pool_rp_sp(rp: Dataset, sp: Dataset) -> Dataset:
    """Merge an RP dataset and an SP dataset into one joint dataset.

    Persons appearing in both must have identical profiles. When the person
    set grows, the integration index is re-centred over the union. An empty
    SP side yields the RP data with a flag noting that the SP scale cannot
    be identified.
    """
    problems = []
    problems += [f"observation {o.obs_id}: expected RP, got {o.source}" for o in rp.observations if o.source != "RP"]
    problems += [f"observation {o.obs_id}: expected SP, got {o.source}" for o in sp.observations if o.source != "SP"]
    for o in sp.observations:
        attr = o.attributes.get(Mode.EMOBILITY)
        if o.chosen is Mode.EMOBILITY and (attr is None or not attr.available):
            problems.append(f"observation {o.obs_id}: e-mobility chosen but unavailable")
    persons = {p.person_id: p for p in rp.persons}
    for p in sp.persons:
        q = persons.get(p.person_id)
        if q is not None and replace(q, integration_centred=0.0) != replace(p, integration_centred=0.0):
            problems.append(f"person {p.person_id}: profiles differ between RP and SP")
    ids = {o.obs_id for o in rp.observations}
    problems += [f"observation {o.obs_id}: id used in both RP and SP" for o in sp.observations if o.obs_id in ids]
    if problems:
        raise DataValidationError(problems)
    merged = dict(persons)
    for p in sp.persons:
        merged.setdefault(p.person_id, p)
    flags = tuple(dict.fromkeys(rp.flags + sp.flags))
    if not sp.observations:
        flags += (MU_SP_UNIDENTIFIED,)
    out = Dataset(tuple(merged.values()), rp.observations + sp.observations, flags)
    if len(merged) != len(persons):
        out = out.recentred()
    return out


def rp_sp_ratio(ds: Dataset) -> float:
    """Number of RP observations per SP observation (inf without SP)."""
    n_sp = sum(o.source == "SP" for o in ds.observations)
    n_rp = ds.n_obs - n_sp
    return n_rp / n_sp if n_sp else float("inf")


def balanced_subsample(joint: Dataset) -> Dataset:
    """Keep every SP observation and only the RP trips that triggered an SP scenario."""
    rp = [o for o in joint.observations if o.source == "RP"]
    if not any(o.sp_trigger for o in rp):
        raise ValueError("no RP observations carry an SP linkage flag")
    kept = [o for o in joint.observations if o.source == "SP" or o.sp_trigger]
    return joint.with_observations(kept)


def estimate_balanced(joint: Dataset, spec: ModelSpec, reference, **kwargs):
    """Re-estimate on the balanced subsample with sociodemographic terms held at ``reference``.

    ``reference`` is the full-sample :class:`~modechoice.estimation.EstimationResult`;
    its estimates are used as start values for all parameters.
    """
    from .estimation import estimate

    if not spec.joint:
        raise ValueError("balanced subsample protocol needs a joint spec")
    frozen = [n for n in SOCIODEMOGRAPHIC if n in spec.parameters]
    return estimate(balanced_subsample(joint), spec, start=reference.estimates, frozen=frozen, **kwargs)
