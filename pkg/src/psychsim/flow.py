"""Patient lifecycle on top of the event kernel.

ED arrivals are generated per ED as a weekly piecewise-constant Poisson
process, get an age group and a rejection draw ``alpha``, then search for a
bed. A unit accepts a referral iff ``alpha < accept_prob``; a free bed at
the patient's own facility is always taken first. Patients with no
acceptor wait on their age group's free-bed signal and search again when
it fires. Direct (non-ED) admissions queue FIFO at their unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .engine import BedResource, EventCalendar, SignalHub, Tracer, replication_streams
from .metrics import OccupancySeries, PatientRecord
from .policy import PlacementPolicy
from .scenario import AGE_GROUPS, DAYS, AgeGroup, DistributionSpec, IpUnit, ScenarioConfig

HOURS_PER_DAY = 24.0


# ---------------------------------------------------------------------------
# arrivals and attributes


def thinned_arrivals(daily_rates, horizon_hours: float, generator: np.random.Generator) -> np.ndarray:
    """Arrival times (hours) of a Poisson process whose rate on day ``d`` is
    ``daily_rates[d % 7] / 24`` per hour, by thinning a homogeneous process
    run at the peak rate."""
    rates = np.asarray(daily_rates, dtype=float)
    peak = rates.max(initial=0.0) / HOURS_PER_DAY
    if peak <= 0.0 or horizon_hours <= 0.0:
        return np.empty(0)
    n = generator.poisson(peak * horizon_hours)
    times = np.sort(generator.uniform(0.0, horizon_hours, n))
    day = (times // HOURS_PER_DAY).astype(np.int64) % len(rates)
    keep = generator.random(n) * peak < rates[day] / HOURS_PER_DAY
    return times[keep]


def ed_rate_profile(ed, rate_multiplier: float = 1.0) -> list:
    return [ed.daily_rates[d] * rate_multiplier for d in DAYS]


def generate_ed_arrivals(ed, rng, horizon_hours: float, rate_multiplier: float = 1.0) -> np.ndarray:
    return thinned_arrivals(ed_rate_profile(ed, rate_multiplier), horizon_hours, rng.generator)


def generate_non_ed_arrivals(unit: IpUnit, rng, horizon_hours: float) -> np.ndarray:
    return thinned_arrivals([unit.non_ed_rate] * 7, horizon_hours, rng.generator)


def draw_alpha(tri, size: int, generator: np.random.Generator) -> np.ndarray:
    a, c, b = tri
    if b <= a:
        return np.full(size, float(a))
    return np.clip(generator.triangular(a, c, b, size), 0.0, 1.0)


def draw_age_groups(age_mix, size: int, generator: np.random.Generator) -> list:
    groups = [g for g in AGE_GROUPS if age_mix.get(g, 0.0) > 0.0]
    probs = np.array([age_mix[g] for g in groups])
    idx = generator.choice(len(groups), size=size, p=probs / probs.sum())
    return [groups[i] for i in idx]


def assign_attributes(patient: "Patient", dists: DistributionSpec, rng) -> "Patient":
    """Single-patient attribute draw (age group from the mix, alpha from the
    triangular law clamped to [0, 1])."""
    patient.age_group = draw_age_groups(dists.age_mix, 1, rng.generator)[0]
    patient.alpha = float(draw_alpha(dists.alpha_triangular, 1, rng.generator)[0])
    return patient


def los_scale(unit: IpUnit, dists: DistributionSpec, los_multiplier: float = 1.0) -> float:
    return unit.mean_los_hours / dists.reference_mean_los * los_multiplier


def sample_los(unit: IpUnit, dists: DistributionSpec, rng, los_multiplier: float = 1.0) -> float:
    """Empirical LoS draw rescaled to the unit's mean stay."""
    s = dists.los_samples[int(rng.generator.integers(len(dists.los_samples)))]
    return s * los_scale(unit, dists, los_multiplier)


# ---------------------------------------------------------------------------
# referral resolution


def resolve_referrals(alpha: float, gammas, sample_review, round_size: int = 1):
    """Walk an ordered candidate list in rounds of ``round_size`` requests.

    ``sample_review(i)`` returns the review time of candidate ``i``. A round
    where nobody accepts costs its longest review; an accepting round costs
    the shortest review among the accepting candidates, and that candidate
    is the acceptor (list order breaks exact ties).

    Returns ``(acceptor_index or None, hours, requests_sent)``.
    """
    n = len(gammas)
    hours = 0.0
    sent = 0
    i = 0
    while i < n:
        j = min(i + round_size, n)
        best = None
        best_t = math.inf
        longest = 0.0
        for k in range(i, j):
            t = sample_review(k)
            if t > longest:
                longest = t
            if alpha < gammas[k] and t < best_t:
                best, best_t = k, t
        sent += j - i
        if best is not None:
            return best, hours + best_t, sent
        hours += longest
        i = j
    return None, hours, sent


@dataclass
class Patient:
    patient_id: int
    replication: int
    origin_ed: str | None
    origin_facility: str
    age_group: AgeGroup = AgeGroup.ADULT
    alpha: float = 0.0
    disposition_time: float = 0.0
    raw_los: float = 0.0
    placement_time: float | None = None
    coordination_hours: float = 0.0
    travel_hours: float = 0.0
    distance_miles: float = 0.0
    destination_unit: str | None = None
    destination_facility: str | None = None
    los_hours: float = 0.0
    requests_sent: int = 0
    total_requests: int = 0
    searches: int = 0
    transferred: bool = False


@dataclass
class UnitState:
    unit: IpUnit
    bed: BedResource
    occupancy: OccupancySeries
    los_ratio: float

    @property
    def unit_id(self):
        return self.unit.unit_id


@dataclass(frozen=True)
class Placed:
    unit: UnitState
    coordination_hours: float
    requests_sent: int
    token: int
    internal: bool


@dataclass(frozen=True)
class NoAcceptor:
    coordination_hours: float
    requests_sent: int


def candidate_order(units, taus, policy: PlacementPolicy) -> list:
    """Sort external candidate units for one origin: by drive time, or by
    acceptance probability (descending) for the acceptance-ordered
    policies. Remaining ties go to drive time, then unit id."""
    if policy.by_acceptance:
        key = lambda us: (-us.unit.accept_prob, taus[us.unit_id], us.unit_id)
    else:
        key = lambda us: (taus[us.unit_id], us.unit_id)
    return sorted(units, key=key)


@dataclass
class RegionState:
    """Live unit registry plus per-(ED, age group) candidate orderings."""

    cfg: ScenarioConfig
    policy: PlacementPolicy
    units: dict
    ordered: dict = field(default_factory=dict)
    origin_units: dict = field(default_factory=dict)

    def build_orderings(self) -> None:
        travel = self.cfg.travel.drive_hours
        ed_fac = self.cfg.facility_of_ed()
        for ed_id, fac_id in ed_fac.items():
            taus = {uid: travel[(ed_id, uid)] for uid in self.units}
            for g in AGE_GROUPS:
                licensed = [us for us in self.units.values() if g in us.unit.licensed_ages]
                own = sorted((us for us in licensed if us.unit.facility_id == fac_id), key=lambda us: us.unit_id)
                other = [us for us in licensed if us.unit.facility_id != fac_id]
                self.origin_units[(ed_id, g)] = own
                self.ordered[(ed_id, g)] = candidate_order(other, taus, self.policy)

    def candidates(self, ed_id: str, group: AgeGroup) -> list:
        """Units treating ``group`` with a free bed right now, in policy order."""
        return [us for us in self.ordered[(ed_id, group)] if us.bed.available() > 0]

    def free_origin_unit(self, ed_id: str, group: AgeGroup):
        for us in self.origin_units[(ed_id, group)]:
            if us.bed.available() > 0:
                return us
        return None


def find_placement(p: Patient, policy: PlacementPolicy, state: RegionState, sample_review):
    """One bed search from the current availability snapshot.

    ``sample_review(unit_state)`` draws a review time. On success the bed
    is reserved immediately and a ``Placed`` is returned; otherwise
    ``NoAcceptor`` with the time spent on rejected rounds.
    """
    own = state.free_origin_unit(p.origin_ed, p.age_group)
    if own is not None:
        token = own.bed.reserve()
        return Placed(own, sample_review(own), 1, token, True)
    cands = state.candidates(p.origin_ed, p.age_group)
    gammas = [us.unit.accept_prob for us in cands]
    idx, hours, sent = resolve_referrals(p.alpha, gammas, lambda k: sample_review(cands[k]), policy.round_size)
    if idx is None:
        return NoAcceptor(hours, sent)
    chosen = cands[idx]
    return Placed(chosen, hours, sent, chosen.bed.reserve(), False)


# ---------------------------------------------------------------------------
# one replication


@dataclass
class ReplicationResult:
    replication: int
    records: list
    occupancy: dict
    unit_stats: dict
    non_ed_admissions: int
    non_ed_queued_at_end: int
    warmup_hours: float
    horizon_hours: float
    trace: Tracer | None = None


class Replication:
    """Runs one independent replication of a scenario."""

    def __init__(self, cfg: ScenarioConfig, replication: int, seed: int | None = None,
                 crn_seed: int | None = None, trace: bool = False):
        self.cfg = cfg
        self.index = replication
        self.seed = cfg.seed if seed is None else seed
        self.streams = replication_streams(self.seed, replication, crn_seed)
        self.cal = EventCalendar()
        self.hub = SignalHub(AGE_GROUPS)
        self.tracer = Tracer() if trace else None
        self.horizon = cfg.horizon_days * HOURS_PER_DAY
        self.warmup = cfg.warmup_days * HOURS_PER_DAY
        self.records: list = []
        self.pending: dict = {}
        self.non_ed_admissions = 0
        self._review = self.streams["review"]

        units = {}
        for u in sorted(cfg.units, key=lambda u: u.unit_id):
            occ = OccupancySeries(u.unit_id, u.bed_count, self.warmup)
            bed = BedResource(u.bed_count, u.unit_id)
            bed.on_change = partial(self._occupancy_changed, occ)
            bed.on_handoff = partial(self._direct_admitted, u.unit_id)
            units[u.unit_id] = UnitState(u, bed, occ, los_scale(u, cfg.dists, cfg.los_multiplier))
        self.units = units
        self.state = RegionState(cfg, cfg.policy, units)
        self.state.build_orderings()
        self.travel = cfg.travel
        self.los_pool = np.asarray(cfg.dists.los_samples, dtype=float)

    # -- plumbing -------------------------------------------------------
    def _trace(self, event_type, entity_id, detail=""):
        if self.tracer is not None:
            self.tracer(self.cal.now, event_type, entity_id, detail)

    def _occupancy_changed(self, occ: OccupancySeries, level: int):
        occ.update(self.cal.now, level)

    def _sample_review(self, us: UnitState) -> float:
        return self._review.exponential(us.unit.mean_review_hours)

    # -- arrivals -------------------------------------------------------
    def _schedule_arrivals(self):
        cfg = self.cfg
        arr = self.streams["arrivals"]
        attr = self.streams["attributes"].generator
        los = self.streams["los"].generator
        pid = 0
        for fac, ed in sorted(cfg.eds, key=lambda fe: fe[1].ed_id):
            times = generate_ed_arrivals(ed, arr, self.horizon, cfg.rate_multiplier)
            n = len(times)
            groups = draw_age_groups(cfg.dists.age_mix, n, attr)
            alphas = draw_alpha(cfg.dists.alpha_triangular, n, attr)
            raw = self.los_pool[los.integers(len(self.los_pool), size=n)]
            for t, g, a, s in zip(times.tolist(), groups, alphas.tolist(), raw.tolist()):
                p = Patient(pid, self.index, ed.ed_id, fac.facility_id, g, a, t, s)
                pid += 1
                self.cal.schedule(t, self._ed_arrival, p)
        for uid, us in self.units.items():
            times = generate_non_ed_arrivals(us.unit, arr, self.horizon)
            raw = self.los_pool[los.integers(len(self.los_pool), size=len(times))]
            for t, s in zip(times.tolist(), raw.tolist()):
                self.cal.schedule(t, self._non_ed_arrival, uid, s * us.los_ratio)

    def _non_ed_arrival(self, unit_id: str, los_hours: float):
        us = self.units[unit_id]
        self._trace("non_ed_arrival", unit_id)
        if us.bed.seize_or_enqueue(los_hours):
            self._direct_admitted(unit_id, los_hours)

    def _direct_admitted(self, unit_id: str, los_hours: float):
        self.non_ed_admissions += 1
        self._trace("non_ed_admit", unit_id)
        self.cal.schedule(self.cal.now + los_hours, self._discharge, unit_id)

    # -- ED patients ----------------------------------------------------
    def _ed_arrival(self, p: Patient):
        self.pending[p.patient_id] = p
        self._trace("disposition", f"P{p.patient_id}", f"{p.origin_ed}:{p.age_group.value}")
        self._search(p)

    def _search(self, p: Patient):
        now = self.cal.now
        p.searches += 1
        out = find_placement(p, self.cfg.policy, self.state, self._sample_review)
        p.total_requests += out.requests_sent
        if isinstance(out, NoAcceptor):
            self._trace("no_acceptor", f"P{p.patient_id}", f"{out.requests_sent}")
            self._wait(p)
            return
        us = out.unit
        p.requests_sent = out.requests_sent
        p.destination_unit = us.unit_id
        p.destination_facility = us.unit.facility_id
        p.transferred = not out.internal
        p.los_hours = p.raw_los * us.los_ratio
        if p.transferred:
            key = (p.origin_ed, us.unit_id)
            p.travel_hours = self.travel.drive_hours[key]
            p.distance_miles = self.travel.distance_miles[key]
        self._trace("reserve", f"P{p.patient_id}", us.unit_id)
        self.cal.schedule(now + out.coordination_hours, self._placed, p, out.token)

    def _wait(self, p: Patient):
        self._trace("wait", f"P{p.patient_id}", p.age_group.value)
        self.hub.subscribe(p.age_group, partial(self._search, p), p.disposition_time)

    def _placed(self, p: Patient, token: int):
        now = self.cal.now
        p.placement_time = now
        p.coordination_hours = now - p.disposition_time
        del self.pending[p.patient_id]
        self.records.append(self._record(p, censored=False))
        self._trace("placed", f"P{p.patient_id}", p.destination_unit)
        self.cal.schedule(now + p.travel_hours, self._commit, p, token)

    def _commit(self, p: Patient, token: int):
        self.units[p.destination_unit].bed.commit(token)
        self._trace("commit", f"P{p.patient_id}", p.destination_unit)
        self.cal.schedule(self.cal.now + p.los_hours, self._discharge, p.destination_unit)

    def _discharge(self, unit_id: str):
        us = self.units[unit_id]
        freed = us.bed.release()
        self._trace("release", unit_id, "signal" if freed is not None else "queue")
        if freed is not None:
            for g in AGE_GROUPS:
                if g in us.unit.licensed_ages:
                    self.hub.broadcast(g)

    def _record(self, p: Patient, censored: bool) -> PatientRecord:
        return PatientRecord(
            patient_id=p.patient_id,
            replication=p.replication,
            origin_ed=p.origin_ed,
            origin_facility=p.origin_facility,
            age_group=p.age_group,
            alpha=p.alpha,
            disposition_time=p.disposition_time,
            placement_time=p.placement_time if not censored else math.nan,
            coordination_hours=p.coordination_hours,
            travel_hours=p.travel_hours if not censored else 0.0,
            distance_miles=p.distance_miles if not censored else 0.0,
            destination_unit=p.destination_unit if not censored else None,
            destination_facility=p.destination_facility if not censored else None,
            los_hours=p.los_hours if not censored else 0.0,
            requests_sent=p.requests_sent if not censored else 0,
            total_requests=p.total_requests,
            searches=p.searches,
            transferred=p.transferred if not censored else False,
            censored=censored,
        )

    def run(self) -> ReplicationResult:
        self._schedule_arrivals()
        self.cal.run_until(self.horizon)
        for p in sorted(self.pending.values(), key=lambda p: p.patient_id):
            p.coordination_hours = self.horizon - p.disposition_time
            self.records.append(self._record(p, censored=True))
        unit_stats = {}
        for uid, us in self.units.items():
            us.occupancy.finish(self.horizon)
            unit_stats[uid] = {
                "commits": us.bed.commits,
                "releases": us.bed.releases,
                "in_service": us.bed.in_service,
                "reserved": us.bed.reserved,
                "outstanding_tokens": us.bed.outstanding_tokens,
                "queued": len(us.bed.queue),
                "capacity": us.bed.capacity,
            }
        return ReplicationResult(
            replication=self.index,
            records=self.records,
            occupancy={uid: us.occupancy for uid, us in self.units.items()},
            unit_stats=unit_stats,
            non_ed_admissions=self.non_ed_admissions,
            non_ed_queued_at_end=sum(len(us.bed.queue) for us in self.units.values()),
            warmup_hours=self.warmup,
            horizon_hours=self.horizon,
            trace=self.tracer,
        )


def run_replication(cfg: ScenarioConfig, replication: int, seed: int | None = None,
                    crn_seed: int | None = None, trace: bool = False) -> ReplicationResult:
    return Replication(cfg, replication, seed=seed, crn_seed=crn_seed, trace=trace).run()
