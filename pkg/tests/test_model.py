import json
import os

import pytest

from queueing_chain.errors import ConfigError, ValidationError
from queueing_chain.model import (
    BulkSpec,
    ClassSpec,
    Discipline,
    NetworkSpec,
    NodeSpec,
    RoutingMatrix,
    apply_overrides,
    build_network,
    dump_network,
    load_network,
    parse_network,
    preset_cims,
    preset_shared_hss,
    render_network,
    validate,
)

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CIMS_NETWORK = os.path.join(REPO_ROOT, "metadata", "cims_network.json")


def _two_node_document(**arrival):
    return {
        "nodes": [
            {"id": "A", "service_time": 0.01},
            {"id": "B", "service_rate": 50.0, "servers": 2},
        ],
        "routing": {"entry": {"A": 1.0}, "A": {"B": 0.5}},
        "arrival": arrival or {"rate": 10.0},
    }


def test_canonical_network_file_matches_cims_preset():
    assert load_network(CIMS_NETWORK) == preset_cims()


def test_cims_preset_shape():
    spec = preset_cims()

    assert spec.node_ids == ("P-CSCF", "S/I-CSCF", "SLF", "HSS1", "HSS2", "HSS3")
    assert spec.nodes[0].service_rate == pytest.approx(250.0)
    assert spec.routing.probabilities[2][3:] == (0.2, 0.3, 0.5)
    assert validate(spec).is_valid


def test_parse_network_converts_times_to_rates():
    spec = parse_network(_two_node_document(interarrival_time=0.5))

    assert spec.nodes[0].service_rate == pytest.approx(100.0)
    assert spec.nodes[1].servers == 2
    assert spec.external_rate == pytest.approx(2.0)


def test_parse_network_time_prefix():
    document = _two_node_document()
    document["nodes"][1] = {"id": "B", "service_rate": "time:0.02"}

    assert parse_network(document).nodes[1].service_rate == pytest.approx(50.0)


def test_render_then_parse_keeps_multiclass_ps_network():
    spec = preset_shared_hss(0.2, 0.5, 40.0, Discipline.PS, (0.003, 0.006))

    assert parse_network(render_network(spec)) == spec


def test_dump_network_writes_loadable_file(tmp_path):
    path = tmp_path / "network.json"
    dump_network(preset_cims(3.0), str(path))

    assert load_network(str(path)) == preset_cims(3.0)


def test_config_error_reports_key_and_line(tmp_path):
    document = _two_node_document()
    document["nodes"][1]["servers"] = "two"
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(document, indent=4), encoding="utf-8")

    with pytest.raises(ConfigError) as info:
        load_network(str(path))

    assert info.value.key == "nodes[B].servers"
    assert info.value.line is not None and info.value.line > 1


def test_config_error_on_unknown_routing_target():
    document = _two_node_document()
    document["routing"]["A"] = {"C": 1.0}

    with pytest.raises(ConfigError, match="unknown node 'C'"):
        parse_network(document)


def test_config_error_on_json_syntax(tmp_path):
    path = tmp_path / "syntax.json"
    path.write_text('{"nodes": [', encoding="utf-8")

    with pytest.raises(ConfigError):
        load_network(str(path))


def test_validate_collects_every_violation():
    spec = NetworkSpec(
        nodes=(NodeSpec("A", -1.0), NodeSpec("A", 10.0, servers=0)),
        routing=RoutingMatrix(((0.0, 0.7), (0.6, 0.6)), (0.5, 0.4)),
        external_rate=1.0,
    )

    messages = validate(spec).messages()

    assert any("duplicate node id" in m for m in messages)
    assert any("service rate must be > 0" in m for m in messages)
    assert any("servers must be an integer" in m for m in messages)
    assert any("row sum > 1" in m for m in messages)
    assert any("entry probabilities must sum to 1" in m for m in messages)


def test_validate_rejects_closed_routing():
    spec = NetworkSpec(
        nodes=(NodeSpec("A", 10.0), NodeSpec("B", 10.0)),
        routing=RoutingMatrix(((0.0, 1.0), (1.0, 0.0)), (1.0, 0.0)),
    )

    assert any("not open" in m for m in validate(spec).messages())


def test_row_sum_within_tolerance_is_renormalized():
    routing = RoutingMatrix(((0.5, 0.5 + 5e-10), (0.0, 0.0)), (1.0, 0.0))

    assert sum(routing.probabilities[0]) == pytest.approx(1.0, abs=1e-15)


def test_per_class_rates_require_ps():
    node = NodeSpec("HSS", 100.0, per_class_service_rates={"class1": 100.0, "class2": 50.0})
    spec = NetworkSpec(
        nodes=(node,),
        routing=RoutingMatrix(((0.0,),), (1.0,)),
        classes=(ClassSpec("class1", 0.5), ClassSpec("class2", 0.5)),
    )

    messages = validate(spec).messages()

    assert any("require PS" in m for m in messages)
    assert any("FCFS node" in m for m in messages)


def test_bulk_entry_must_be_single_fcfs_server():
    spec = preset_cims().with_servers([2, 1, 1, 1, 1, 1]).with_bulk(BulkSpec.uniform(10))

    assert any("one server" in m for m in validate(spec).messages())


def test_bulk_spec_parse_and_moments():
    bulk = BulkSpec.parse("uniform:100")

    assert bulk.first_moment == pytest.approx(50.5)
    assert bulk.second_moment == pytest.approx(3383.5)
    assert BulkSpec.parse("empirical:1=0.5,3=0.5").first_moment == pytest.approx(2.0)
    assert BulkSpec.parse("geometric:0.5").second_moment == pytest.approx(6.0)


def test_bulk_spec_parse_error():
    with pytest.raises(ConfigError):
        BulkSpec.parse("uniform:many")


def test_build_network_applies_flags_then_overrides():
    spec = build_network(
        preset="cims",
        interarrival=5.0,
        capacity=[3, 3, 3, 3, 3, 3],
        overrides=["nodes.HSS1.servers=2", "routing.SLF.HSS3=0.4"],
    )

    assert spec.external_rate == pytest.approx(0.2)
    assert spec.nodes[0].capacity_factor == 3.0
    assert spec.nodes[3].servers == 2
    assert spec.routing.probabilities[2][5] == pytest.approx(0.4)


def test_apply_overrides_accepts_mapping():
    spec = apply_overrides(preset_cims(), {"arrival.interarrival_time": 4, "nodes.SLF.service_time": 0.002})

    assert spec.external_rate == pytest.approx(0.25)
    assert spec.nodes[2].service_rate == pytest.approx(500.0)


def test_apply_overrides_unknown_key():
    with pytest.raises(ConfigError, match="unknown override key"):
        apply_overrides(preset_cims(), ["nodes.SLF.color=red"])


def test_build_network_requires_exactly_one_source(tmp_path):
    with pytest.raises(ConfigError):
        build_network()
    with pytest.raises(ConfigError):
        build_network(preset="cims", config_path=CIMS_NETWORK)


def test_build_network_rejects_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        build_network(preset="ims")


def test_build_network_raises_validation_error():
    with pytest.raises(ValidationError) as info:
        build_network(preset="cims", overrides=["routing.SLF.HSS1=0.9"])

    assert not info.value.report.is_valid
