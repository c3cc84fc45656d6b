import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bamsim.bam import BamKind
from bamsim.config import load_config
from bamsim.engine import (
    BlockReason,
    Lightpath,
    SimState,
    UnknownLightpath,
    handle_departure,
    run_experiment,
    run_replication,
    simulate_requests,
    try_establish,
)
from bamsim.spectrum import SlotRange
from bamsim.topology import Link, Topology, nsfnet_partial_topology
from bamsim.traffic import Request, TrafficClassSpec, scenario_presets

from oracles import ReplayOracle


def micro_topology(capacity=10):
    return Topology(
        Link(src, dst, capacity) for src, dst in ((14, 4), (4, 2), (4, 7), (4, 5))
    )


def micro_specs():
    """Bronze/Silver/Gold shrunk to a 10-slot link with pools (2, 3, 5)."""
    names = ("Bronze", "Silver", "Gold")
    demands = (1, 2, 5)
    paths = ((14, 4, 2), (14, 4, 7), (14, 4, 5))
    shares = (20.0, 30.0, 50.0)
    return tuple(
        TrafficClassSpec(
            index=c,
            name=names[c],
            demand_slots=demands[c],
            inter_arrival_h=1.0,
            start_delay_h=0.0,
            path=paths[c],
            share_pct=shares[c],
        )
        for c in range(3)
    )


def request(rid, t, c, hold):
    return Request(id=rid, class_index=c, arrival_time=t, hold_time=hold)


class TestTryEstablish:
    def test_empty_network_gold_takes_lowest_block(self):
        specs = scenario_presets(1)
        for kind in BamKind:
            state = SimState(nsfnet_partial_topology(), specs, kind)
            outcome = try_establish(state, request(0, 0.0, 2, 100.0))
            assert isinstance(outcome, Lightpath)
            assert outcome.slot_range == SlotRange(0, 5)
            assert outcome.path.links == ((14, 4), (4, 5))
            for lid in ((14, 4), (4, 5)):
                assert state.grids[lid].occupied_indices() == [0, 1, 2, 3, 4]

    def test_mam_blocks_gold_beyond_its_pool(self):
        # 40 gold lightpaths fill the 200-slot gold pool on link 14->4.
        state = SimState(nsfnet_partial_topology(), scenario_presets(1), BamKind.MAM)
        for i in range(40):
            assert isinstance(try_establish(state, request(i, 0.0, 2, 100.0)), Lightpath)
        assert try_establish(state, request(40, 0.0, 2, 100.0)) is BlockReason.BAM
        assert state.blocked_bam[2] == 1

    def test_atcs_blocks_on_total_capacity(self):
        # 199 silver lightpaths put 398 slots in use; 398 + 5 > 400.
        state = SimState(nsfnet_partial_topology(), scenario_presets(1), BamKind.ATCS)
        for i in range(199):
            assert isinstance(try_establish(state, request(i, 0.0, 1, 100.0)), Lightpath)
        assert try_establish(state, request(199, 0.0, 2, 100.0)) is BlockReason.BAM

    def test_atcs_blocks_on_fragmentation(self):
        # Fill the shared link completely (197 silver pairs + 6 bronze),
        # then free slots {394} and {396..399}: 395 used, so a 5-slot gold
        # demand passes the volumetric check but no 5-run exists.
        state = SimState(nsfnet_partial_topology(), scenario_presets(1), BamKind.ATCS)
        for i in range(197):
            assert isinstance(try_establish(state, request(i, 0.0, 1, 100.0)), Lightpath)
        bronzes = [
            try_establish(state, request(200 + k, 0.0, 0, 100.0)) for k in range(6)
        ]
        assert [lp.slot_range.start for lp in bronzes] == [394, 395, 396, 397, 398, 399]
        for lp in bronzes:
            if lp.slot_range.start != 395:
                handle_departure(state, lp.id)
        shared = state.grids[(14, 4)]
        assert shared.occupied_count() == 395
        outcome = try_establish(state, request(300, 0.0, 2, 100.0))
        assert outcome is BlockReason.SPECTRUM
        assert state.blocked_spectrum[2] == 1

    def test_bam_is_checked_before_spectrum(self):
        # Gold fills its pool at 0-4 and silver leaves only a 3-run free, so
        # both checks would fail; the fixed order reports the volumetric one.
        state = SimState(micro_topology(), micro_specs(), BamKind.MAM)
        assert isinstance(try_establish(state, request(0, 0.0, 2, 50.0)), Lightpath)
        assert isinstance(try_establish(state, request(1, 0.0, 1, 50.0)), Lightpath)
        assert state.grids[(14, 4)].occupied_indices() == [0, 1, 2, 3, 4, 5, 6]
        assert try_establish(state, request(2, 0.0, 2, 50.0)) is BlockReason.BAM


class TestHandleDeparture:
    def test_establish_then_depart_restores_state(self):
        state = SimState(micro_topology(), micro_specs(), BamKind.ATCS)
        lp = try_establish(state, request(0, 0.0, 2, 7.0))
        handle_departure(state, lp.id)
        for lid, grid in state.grids.items():
            assert grid.occ == 0
            assert state.bam[lid].used == [0, 0, 0]
        assert state.established == [0, 0, 1]
        assert not state.live
        state.audit()

    def test_unknown_lightpath(self):
        state = SimState(micro_topology(), micro_specs(), BamKind.MAM)
        with pytest.raises(UnknownLightpath):
            handle_departure(state, 123)

    def test_departure_leaves_other_lightpaths_alone(self):
        state = SimState(micro_topology(), micro_specs(), BamKind.ATCS)
        first = try_establish(state, request(0, 0.0, 1, 5.0))
        second = try_establish(state, request(1, 0.0, 1, 9.0))
        handle_departure(state, first.id)
        assert state.grids[(14, 4)].occupied_indices() == [2, 3]
        assert second.id in state.live
        state.audit()


MICRO_REQUESTS = [  # (time, class, hold), sorted by time
    (0.0, 0, 10.0),
    (1.0, 0, 8.0),
    (2.0, 1, 4.0),
    (3.0, 1, 4.0),
    (4.0, 0, 5.0),
    (5.0, 2, 100.0),
    (8.0, 2, 100.0),
    (11.0, 2, 100.0),
    (12.0, 2, 100.0),
    (13.0, 1, 5.0),
    (14.0, 0, 5.0),
    (15.0, 0, 5.0),
]

# Frozen golden traces, computed once with tests/oracles.ReplayOracle and
# audited by hand event for event. The three models diverge on requests
# 3/4 (MAM private pools), 5 (RDM middle doll vs ATCS total), 6 (common
# fragmentation), and 8 (ATCS low-to-high loan establishes a second gold).
GOLDEN_TRACES = {
    "mam": [
        ("arrive", 0, "established", 0),
        ("arrive", 1, "established", 1),
        ("arrive", 2, "established", 2),
        ("arrive", 3, "blocked_bam", None),
        ("arrive", 4, "blocked_bam", None),
        ("arrive", 5, "established", 4),
        ("depart", 2),
        ("arrive", 6, "blocked_bam", None),
        ("depart", 1),
        ("depart", 0),
        ("arrive", 7, "blocked_bam", None),
        ("arrive", 8, "blocked_bam", None),
        ("arrive", 9, "established", 0),
        ("arrive", 10, "established", 2),
        ("arrive", 11, "established", 3),
        ("depart", 9),
        ("depart", 10),
        ("depart", 11),
        ("depart", 5),
    ],
    "rdm": [
        ("arrive", 0, "established", 0),
        ("arrive", 1, "established", 1),
        ("arrive", 2, "established", 2),
        ("arrive", 3, "established", 4),
        ("arrive", 4, "established", 6),
        ("arrive", 5, "blocked_bam", None),
        ("depart", 2),
        ("depart", 3),
        ("arrive", 6, "blocked_spectrum", None),
        ("depart", 1),
        ("depart", 4),
        ("depart", 0),
        ("arrive", 7, "established", 0),
        ("arrive", 8, "blocked_bam", None),
        ("arrive", 9, "established", 5),
        ("arrive", 10, "established", 7),
        ("arrive", 11, "established", 8),
        ("depart", 9),
        ("depart", 10),
        ("depart", 11),
        ("depart", 7),
    ],
    "atcs": [
        ("arrive", 0, "established", 0),
        ("arrive", 1, "established", 1),
        ("arrive", 2, "established", 2),
        ("arrive", 3, "established", 4),
        ("arrive", 4, "established", 6),
        ("arrive", 5, "blocked_bam", None),
        ("depart", 2),
        ("depart", 3),
        ("arrive", 6, "blocked_spectrum", None),
        ("depart", 1),
        ("depart", 4),
        ("depart", 0),
        ("arrive", 7, "established", 0),
        ("arrive", 8, "established", 5),
        ("arrive", 9, "blocked_bam", None),
        ("arrive", 10, "blocked_bam", None),
        ("arrive", 11, "blocked_bam", None),
        ("depart", 7),
        ("depart", 8),
    ],
}


def run_micro(kind: BamKind, requests=MICRO_REQUESTS):
    trace = []
    raw = simulate_requests(
        micro_topology(),
        micro_specs(),
        kind,
        [request(i, t, c, h) for i, (t, c, h) in enumerate(requests)],
        bin_width=10.0,
        audit=True,
        trace=trace,
    )
    return raw, trace


def oracle_trace(kind: BamKind, requests=MICRO_REQUESTS, capacity=10):
    oracle = ReplayOracle(
        kind.value,
        {(14, 4): capacity, (4, 2): capacity, (4, 7): capacity, (4, 5): capacity},
        (2, 3, 5),
        [[(14, 4), (4, 2)], [(14, 4), (4, 7)], [(14, 4), (4, 5)]],
        [1, 2, 5],
    )
    return oracle.run(requests)


class TestGoldenMicroScenario:
    @pytest.mark.parametrize("kind", list(BamKind))
    def test_engine_matches_frozen_trace(self, kind):
        _, trace = run_micro(kind)
        assert trace == GOLDEN_TRACES[kind.value]

    @pytest.mark.parametrize("kind", list(BamKind))
    def test_engine_matches_replay_oracle(self, kind):
        _, trace = run_micro(kind)
        assert trace == oracle_trace(kind)

    def test_counts_follow_the_trace(self):
        raw, _ = run_micro(BamKind.ATCS)
        assert raw.established.tolist() == [3, 2, 2]
        assert (raw.blocked_bam + raw.blocked_spectrum).tolist() == [2, 1, 2]
        assert raw.arrivals == 12


class TestEventOrdering:
    def test_departure_processed_before_simultaneous_arrival(self):
        # A's teardown at t=5 frees the only block B can use at t=5.
        reqs = [(0.0, 2, 5.0), (5.0, 2, 100.0)]
        for kind in BamKind:
            _, trace = run_micro(kind, reqs)
            assert trace == [
                ("arrive", 0, "established", 0),
                ("depart", 0),
                ("arrive", 1, "established", 0),
                ("depart", 1),
            ]


@pytest.fixture(scope="module")
def tiny_config():
    return load_config("scenario01.cfg").override(total_requests=3000, replications=3)


class TestRunReplication:
    def test_zero_requests(self, tiny_config):
        raw = run_replication(tiny_config.override(total_requests=0), BamKind.MAM, 0)
        assert raw.arrivals == 0
        assert raw.blocked.sum() == 0 and raw.established.sum() == 0
        assert raw.network_mean_utilization == 0.0

    def test_single_request_establishes(self, tiny_config):
        for kind in BamKind:
            raw = run_replication(tiny_config.override(total_requests=1), kind, 0)
            assert raw.established.sum() == 1
            assert raw.blocked.sum() == 0

    def test_conservation_and_audit(self, tiny_config):
        raw = run_replication(tiny_config, BamKind.RDM, 0, audit=True)
        assert raw.blocked.sum() + raw.established.sum() == raw.arrivals == 3000

    def test_determinism(self, tiny_config):
        a = run_replication(tiny_config, BamKind.ATCS, 1)
        b = run_replication(tiny_config, BamKind.ATCS, 1)
        assert a.totals() == b.totals()
        assert np.array_equal(a.network_utilization, b.network_utilization)

    def test_replications_differ(self, tiny_config):
        a = run_replication(tiny_config, BamKind.ATCS, 0)
        b = run_replication(tiny_config, BamKind.ATCS, 1)
        assert a.totals() != b.totals() or not np.array_equal(
            a.network_utilization, b.network_utilization
        )

    def test_replication_independent_of_batch(self, tiny_config):
        batch = run_experiment(tiny_config, kinds=[BamKind.MAM])
        alone = run_replication(tiny_config, BamKind.MAM, 1)
        in_batch = batch[BamKind.MAM].per_replication[1]
        assert alone.totals() == in_batch.totals()
        assert np.array_equal(alone.cum_blocked, in_batch.cum_blocked)

    def test_network_is_capacity_weighted_mean(self, tiny_config):
        raw = run_replication(tiny_config, BamKind.ATCS, 0)
        caps = {lid: 400 for lid in raw.link_utilization}
        total = sum(caps.values())
        weighted = sum(
            raw.link_utilization[lid] * caps[lid] / total for lid in caps
        )
        assert np.allclose(weighted, raw.network_utilization, atol=1e-12)

    def test_experiment_jobs_do_not_change_results(self, tiny_config):
        seq = run_experiment(tiny_config, kinds=[BamKind.RDM], jobs=1)
        par = run_experiment(tiny_config, kinds=[BamKind.RDM], jobs=2)
        a, b = seq[BamKind.RDM], par[BamKind.RDM]
        assert {k: v.mean for k, v in a.scalars.items()} == {
            k: v.mean for k, v in b.scalars.items()
        }


@st.composite
def random_micro_run(draw):
    capacity = draw(st.integers(min_value=6, max_value=14))
    pools = (2, 3, capacity - 5)
    shares = tuple(p * 100.0 / capacity for p in pools)
    n = draw(st.integers(min_value=1, max_value=30))
    t = 0.0
    requests = []
    for _ in range(n):
        t += draw(st.floats(min_value=0.0, max_value=4.0, allow_nan=False))
        c = draw(st.integers(min_value=0, max_value=2))
        hold = draw(st.floats(min_value=0.5, max_value=25.0, allow_nan=False))
        requests.append((t, c, hold))
    # Both engine and oracle consume the stream in (time, priority) order.
    requests.sort(key=lambda r: (r[0], -r[1]))
    return capacity, shares, requests


@settings(max_examples=120, deadline=None)
@given(case=random_micro_run(), kind=st.sampled_from(list(BamKind)))
def test_random_micro_scenarios_match_oracle_and_stay_safe(case, kind):
    capacity, shares, reqs = case
    names = ("Bronze", "Silver", "Gold")
    demands = (1, 2, 5)
    paths = ((14, 4, 2), (14, 4, 7), (14, 4, 5))
    specs = tuple(
        TrafficClassSpec(
            index=c,
            name=names[c],
            demand_slots=demands[c],
            inter_arrival_h=1.0,
            start_delay_h=0.0,
            path=paths[c],
            share_pct=shares[c],
        )
        for c in range(3)
    )
    trace = []
    simulate_requests(
        micro_topology(capacity),
        specs,
        kind,
        [request(i, t, c, h) for i, (t, c, h) in enumerate(reqs)],
        bin_width=5.0,
        audit=True,  # every event boundary cross-checks grids vs accounting
        trace=trace,
    )
    pools = tuple(round(s * capacity / 100.0) for s in shares)
    oracle = ReplayOracle(
        kind.value,
        {(14, 4): capacity, (4, 2): capacity, (4, 7): capacity, (4, 5): capacity},
        pools,
        [list(micro_topology().resolve_path(p).links) for p in paths],
        list(demands),
    )
    assert trace == oracle.run(reqs)
