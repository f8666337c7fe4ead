import math

import numpy as np
import pytest

from queueing_chain.analytic import (
    MARGINAL_TAIL,
    bcmp_chain_metrics,
    bulk_moment_ratio,
    bulk_node_metrics,
    bulk_waiting,
    chain_metrics,
    jackson_chain_metrics,
    mm1_metrics,
    mmm_metrics,
    pk_waiting,
    residual_time,
    service_moments,
)
from queueing_chain.errors import MultiClassNotSupportedError, NonPositiveServiceRateError, UnstableError
from queueing_chain.model import BulkSpec, Discipline, preset_cims, preset_dedicated_hss, preset_shared_hss
from queueing_chain.traffic import solve, solve_traffic

CIMS_VISITS = (1.0, 1.0, 1.0, 0.2, 0.3, 0.5)
CIMS_TIMES = (0.004, 0.006, 0.003, 0.009, 0.009, 0.009)


def _jackson_response(rate, capacity=(1, 1, 1, 1, 1, 1)):
    return sum(
        v / (c / s - rate * v) for v, s, c in zip(CIMS_VISITS, CIMS_TIMES, capacity)
    )


def _birth_death_queue_length(arrival_rate, service_rate, servers, states=5000):
    """M/M/m 출생-사멸 사슬을 직접 정규화해 구한 E[Q]"""
    weights = [1.0]
    for k in range(1, states):
        weights.append(weights[-1] * arrival_rate / (min(k, servers) * service_rate))
    pmf = np.array(weights) / sum(weights)
    queue = np.maximum(np.arange(states) - servers, 0)
    return float(pmf @ queue), pmf


def test_mm1_closed_forms():
    metrics = mm1_metrics(5.0, 10.0)

    assert metrics.utilization == pytest.approx(0.5)
    assert metrics.mean_waiting == pytest.approx(0.1)
    assert metrics.mean_response == pytest.approx(0.2)
    assert metrics.mean_queue_length == pytest.approx(0.5)
    assert metrics.mean_in_system == pytest.approx(1.0)


def test_mm1_marginal_pmf_reaches_cutoff():
    metrics = mm1_metrics(9.0, 10.0)

    assert metrics.marginal_pmf[0] == pytest.approx(0.1)
    assert metrics.marginal_pmf.sum() >= 1.0 - MARGINAL_TAIL
    assert metrics.tail_mass <= MARGINAL_TAIL


def test_mm1_unstable_reports_infinity():
    metrics = mm1_metrics(10.0, 10.0)

    assert not metrics.stable
    assert math.isinf(metrics.mean_waiting)
    assert math.isinf(metrics.mean_response)


def test_non_positive_service_rate():
    with pytest.raises(NonPositiveServiceRateError):
        mm1_metrics(1.0, 0.0)


def test_mmm_erlang_c_example():
    metrics = mmm_metrics(400.0, 250.0, 2)

    assert metrics.utilization == pytest.approx(0.8)
    assert metrics.mean_waiting == pytest.approx(0.0071111, rel=1e-4)
    assert metrics.mean_queue_length == pytest.approx(2.84444, rel=1e-4)
    assert metrics.mean_response == pytest.approx(0.0071111 + 0.004, rel=1e-4)


@pytest.mark.parametrize("servers, arrival_rate", [(2, 15.0), (4, 30.0), (16, 150.0)])
def test_mmm_matches_birth_death_chain(servers, arrival_rate):
    queue, pmf = _birth_death_queue_length(arrival_rate, 10.0, servers)
    metrics = mmm_metrics(arrival_rate, 10.0, servers)

    assert metrics.mean_queue_length == pytest.approx(queue, rel=1e-9)
    assert metrics.mean_waiting == pytest.approx(queue / arrival_rate, rel=1e-9)
    head = metrics.marginal_pmf[: servers + 5]
    assert head == pytest.approx(pmf[: head.size], rel=1e-9)


def test_mmm_with_one_server_is_mm1():
    assert mmm_metrics(5.0, 10.0, 1) == mm1_metrics(5.0, 10.0)


def test_mmm_large_server_count_does_not_overflow():
    metrics = mmm_metrics(900.0, 1.0, 1000)

    assert metrics.stable
    assert math.isfinite(metrics.mean_waiting)
    assert metrics.mean_waiting >= 0.0


def test_pk_reduces_to_mm1_for_exponential_service():
    mean, second = service_moments("exponential", 0.1)

    assert pk_waiting(5.0, mean, second) == pytest.approx(mm1_metrics(5.0, 10.0).mean_waiting)
    assert residual_time(5.0, second) == pytest.approx(0.5 / 10.0)


def test_pk_deterministic_service_halves_waiting():
    mean, second = service_moments("deterministic", 0.1)

    assert pk_waiting(5.0, mean, second) == pytest.approx(0.05)


def test_pk_empirical_moments():
    mean, second = service_moments("empirical", 0.0, [0.004, 0.006])

    assert mean == pytest.approx(0.005)
    assert second == pytest.approx((0.004**2 + 0.006**2) / 2)


def test_pk_unstable():
    with pytest.raises(UnstableError):
        pk_waiting(10.0, 0.1, 0.02)


def test_bulk_uniform_100_moment_ratio():
    bulk = BulkSpec.uniform(100)

    assert bulk_moment_ratio(bulk) == pytest.approx(66.0)
    # ρ = 0.5 이면 E[W] = 1/μ + 66/μ
    service_rate = 250.0
    bulk_rate = 0.5 * service_rate / bulk.first_moment
    assert bulk_waiting(bulk_rate, service_rate, bulk) == pytest.approx(67.0 / service_rate)


def test_bulk_of_one_is_mm1():
    waiting = bulk_waiting(5.0, 10.0, BulkSpec.deterministic(1))

    assert waiting == pytest.approx(mm1_metrics(5.0, 10.0).mean_waiting)


def test_bulk_waiting_decreases_with_interarrival_time():
    bulk = BulkSpec.uniform(100)
    waits = [bulk_waiting(1.0 / t, 250.0, bulk) for t in (0.5, 1.0, 2.0, 5.0)]

    assert waits == sorted(waits, reverse=True)


def test_bulk_node_unstable_is_infinite():
    metrics = bulk_node_metrics(10.0, 250.0, BulkSpec.uniform(100))

    assert not metrics.stable
    assert math.isinf(metrics.mean_waiting)


def test_cims_chain_response(cims_spec):
    metrics = chain_metrics(cims_spec)

    assert metrics.model == "jackson"
    assert len(metrics.per_node) == 6
    assert metrics.chain_response == pytest.approx(_jackson_response(0.2))
    assert metrics.chain_response == pytest.approx(0.0220185, rel=1e-4)
    assert metrics.response_lower_bound == pytest.approx(0.022)
    assert metrics.node("HSS3").visit_ratio == pytest.approx(0.5)


def test_cims_tripled_capacity(cims_spec):
    metrics = chain_metrics(cims_spec.with_capacity_factors([3] * 6))

    assert metrics.chain_response == pytest.approx(_jackson_response(0.2, [3] * 6))
    assert metrics.chain_response == pytest.approx(0.0073354, rel=1e-4)


def test_chain_response_approaches_lower_bound_at_low_load():
    spec = preset_cims()
    responses = [chain_metrics(spec.with_interarrival_time(t)).chain_response for t in range(1, 51)]

    assert all(a > b for a, b in zip(responses, responses[1:]))
    assert all(r > 0.022 for r in responses)
    assert responses[-1] == pytest.approx(0.022, rel=1e-3)


def test_bottleneck_is_highest_utilization():
    metrics = chain_metrics(preset_cims(100.0))

    assert metrics.bottleneck == "S/I-CSCF"


def test_strict_raises_and_lenient_reports_infinity():
    spec = preset_cims(200.0)

    with pytest.raises(UnstableError) as info:
        chain_metrics(spec)
    assert info.value.node_ids == ("S/I-CSCF",)

    metrics = chain_metrics(spec, strict=False)
    assert not metrics.stable
    assert math.isinf(metrics.chain_response)
    assert math.isfinite(metrics.node("P-CSCF").mean_response)


def test_jackson_rejects_multiclass():
    spec = preset_shared_hss()

    with pytest.raises(MultiClassNotSupportedError):
        jackson_chain_metrics(spec, solve_traffic(spec))


def test_bcmp_fcfs_classes_share_waiting():
    metrics = chain_metrics(preset_shared_hss(0.3, 0.6, 50.0))
    hss = metrics.node("HSS")

    assert metrics.model == "bcmp"
    assert hss.mean_waiting == pytest.approx(mm1_metrics(45.0, 1.0 / 0.009).mean_waiting)
    assert [c.mean_waiting for c in hss.per_class] == pytest.approx([hss.mean_waiting] * 2)
    assert hss.per_class[0].arrival_rate == pytest.approx(15.0)


def test_bcmp_single_class_equals_jackson(cims_spec):
    traffic = solve(cims_spec)

    bcmp = bcmp_chain_metrics(cims_spec, traffic)
    jackson = jackson_chain_metrics(cims_spec, traffic)
    assert bcmp.chain_response == pytest.approx(jackson.chain_response)


def test_bcmp_ps_per_class_formulas():
    spec = preset_shared_hss(0.3, 0.6, 100.0, Discipline.PS, (0.003, 0.006))
    hss = chain_metrics(spec).node("HSS")
    rho = 30.0 * 0.003 + 60.0 * 0.006

    assert hss.utilization == pytest.approx(rho)
    first, second = hss.per_class
    assert first.mean_waiting == pytest.approx(0.003 * rho / (1.0 - rho))
    assert second.mean_response == pytest.approx(0.006 / (1.0 - rho))
    assert first.mean_in_system == pytest.approx(30.0 * 0.003 / (1.0 - rho))
    assert first.mean_waiting < second.mean_waiting


def test_class_chain_response_weights_by_entry_probability():
    metrics = chain_metrics(preset_shared_hss(0.3, 0.6, 50.0))
    share = 0.9
    front = sum(metrics.node(n).mean_response for n in ("P-CSCF", "S/I-CSCF", "SLF"))

    expected = front + share * metrics.node("HSS").mean_response
    assert metrics.class_response == pytest.approx((expected, expected))
    assert metrics.chain_response == pytest.approx(expected)


def test_shared_hss_waits_longer_than_dedicated():
    shared = chain_metrics(preset_shared_hss(0.2, 0.6, 50.0)).node("HSS")
    dedicated = chain_metrics(preset_dedicated_hss(0.2, 0.6, 50.0))

    assert shared.per_class[0].mean_waiting > dedicated.node("HSS1").mean_waiting
    assert shared.per_class[1].mean_waiting > dedicated.node("HSS2").mean_waiting


def test_bulk_entry_replaces_entry_node():
    bulk = BulkSpec.uniform(100)
    spec = preset_cims().with_interarrival_time(0.5).with_bulk(bulk)
    metrics = chain_metrics(spec)
    entry = metrics.node("P-CSCF")

    assert entry.mean_waiting == pytest.approx(bulk_waiting(2.0, 250.0, bulk))
    assert entry.exact
    assert not any(n.exact for n in metrics.per_node[1:])
    assert metrics.request_rate == pytest.approx(101.0)


def _random_stable_triples(count=20, seed=20190526):
    rng = np.random.default_rng(seed)
    triples = []
    for _ in range(count):
        servers = int(rng.integers(1, 21))
        service_rate = float(rng.uniform(1.0, 100.0))
        rho = float(rng.uniform(0.05, 0.95))
        triples.append((rho * servers * service_rate, service_rate, servers))
    return triples


@pytest.mark.parametrize("arrival_rate, service_rate, servers", _random_stable_triples())
def test_mmm_matches_birth_death_on_random_triples(arrival_rate, service_rate, servers):
    queue, _ = _birth_death_queue_length(arrival_rate, service_rate, servers, states=2000)
    metrics = mmm_metrics(arrival_rate, service_rate, servers)

    assert metrics.mean_queue_length == pytest.approx(queue, rel=1e-9)
    assert metrics.mean_queue_length == pytest.approx(arrival_rate * metrics.mean_waiting, rel=1e-9)


@pytest.mark.parametrize("interarrival", [1.0, 2.0, 5.0, 10.0])
def test_little_law_at_every_cims_node(interarrival):
    metrics = chain_metrics(preset_cims().with_interarrival_time(interarrival))

    for node in metrics.per_node:
        assert node.mean_queue_length == pytest.approx(node.arrival_rate * node.mean_waiting, rel=1e-9)


@pytest.mark.parametrize("servers", [1, 3, 10])
def test_node_response_grows_with_load(servers):
    loads = np.linspace(0.05, 0.95, 19)
    responses = [mmm_metrics(rho * servers * 10.0, 10.0, servers).mean_response for rho in loads]

    assert all(a < b for a, b in zip(responses, responses[1:]))


def test_chain_response_meets_lower_bound_at_vanishing_load():
    metrics = chain_metrics(preset_cims(1e-6))

    assert metrics.chain_response >= metrics.response_lower_bound
    assert metrics.chain_response == pytest.approx(metrics.response_lower_bound, rel=1e-6)


def test_ten_servers_at_front_nodes_lower_waiting_everywhere():
    for interarrival in range(1, 51):
        spec = preset_cims().with_interarrival_time(interarrival)
        single = chain_metrics(spec)
        pooled = chain_metrics(spec.with_servers([10, 10, 1, 1, 1, 1]))

        for node_id in ("P-CSCF", "S/I-CSCF"):
            assert pooled.node(node_id).mean_waiting < single.node(node_id).mean_waiting
            assert pooled.node(node_id).mean_queue_length < single.node(node_id).mean_queue_length
