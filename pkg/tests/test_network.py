"""Network model, validation, conservation, and file round trips."""

import json

import numpy as np
import pytest

from signalvuln.network import (
    FlowMatrix,
    Intersection,
    Link,
    LinkKind,
    Movement,
    NetworkFormatError,
    NetworkValidationError,
    RoadNetwork,
    Stage,
    check_conservation,
    load_network,
    save_network,
    total_flow,
    validate_network,
)


def _tiny(saturation=10.0, flow=4.0):
    links = (
        Link(1, LinkKind.ENTRY, "1"),
        Link(2, LinkKind.EXIT, "2"),
    )
    net = RoadNetwork(
        links=links,
        intersections=(Intersection(1, "1"),),
        movements=(Movement(1, 2, saturation),),
        stages=(Stage(1, ((1, 2),)),),
        lost_time=1.0,
        sample_rate=1.0,
    )
    return net, FlowMatrix(np.array([flow]))


def test_example_structure(example):
    net, flows = example
    assert len(net.links) == 14
    assert len(net.intersections) == 2
    assert net.n_movements == 16
    assert len(net.stages) == 8
    assert net.entry_links == (1, 3, 5, 8, 10, 12)
    assert net.internal_links == (7, 14)
    assert total_flow(flows) == 58.0


def test_example_validates(example):
    net, flows = example
    errors, warnings = validate_network(net, flows)
    assert errors == []
    assert warnings == []
    assert check_conservation(net, flows) == []


def test_lookup_maps(example):
    net, _ = example
    assert net.movement_pos(3, 6) == 3
    assert net.movement_pos(14, 9) == 15
    with pytest.raises(KeyError):
        net.movement_pos(6, 3)
    assert net.inflow_movements[14] == (2, 5)
    assert net.outflow_movements[14] == (14, 15)
    # every movement sits in exactly one stage on this network
    for stages in net.movement_stages:
        assert len(stages) == 1
    assert net.stages_of[1] == (0, 1, 2, 3)
    assert net.movement_intersection[net.movement_pos(8, 13)] == 2


def test_flow_matrix_is_immutable(example):
    _, flows = example
    with pytest.raises(ValueError):
        flows.values[0] = 99.0
    bumped = flows.replace(0, 7.0)
    assert bumped.values[0] == 7.0
    assert flows.values[0] == 2.0
    scaled = flows.scaled(2.0)
    assert scaled.values[3] == 8.0


def test_conservation_violation_reported(example):
    net, flows = example
    broken = flows.replace(net.movement_pos(3, 14), 7.0)
    viols = check_conservation(net, broken)
    assert [v.link for v in viols] == [14]
    assert viols[0].inflow == 11.0
    assert viols[0].outflow == 12.0
    assert viols[0].magnitude == 1.0
    assert check_conservation(net, broken, tol=1.5) == []


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda n: {"movements": [{"from": 2, "to": 1, "saturation": 5, "flow": 1}]},
         "exit link"),
        (lambda n: {"movements": [{"from": 1, "to": 2, "saturation": 0, "flow": 1}]},
         "nonpositive saturation"),
        (lambda n: {"stages": [{"intersection": 9, "phases": [[1, 2]]}]},
         "unknown intersection"),
        (lambda n: {"stages": [{"intersection": 1, "phases": []}]},
         "is empty"),
    ],
)
def test_validation_catches(mutate, fragment, tmp_path):
    net, flows = _tiny()
    doc = json.loads(open(_save(net, flows, tmp_path)).read())
    doc.update(mutate(doc))
    path = tmp_path / "broken.net"
    path.write_text(json.dumps(doc))
    with pytest.raises(NetworkValidationError, match=fragment):
        load_network(str(path))


def _save(net, flows, tmp_path):
    path = tmp_path / "tiny.net"
    save_network(net, flows, str(path))
    return str(path)


def test_negative_flow_rejected():
    net, _ = _tiny()
    errors, _ = validate_network(net, FlowMatrix(np.array([-1.0])))
    assert any("negative flow" in e for e in errors)


def test_flow_length_mismatch():
    net, _ = _tiny()
    errors, _ = validate_network(net, FlowMatrix(np.array([1.0, 2.0])))
    assert any("length" in e for e in errors)


def test_unstaged_movement_is_warning_not_error():
    links = (
        Link(1, LinkKind.ENTRY, "1"),
        Link(2, LinkKind.EXIT, "2"),
        Link(3, LinkKind.EXIT, "3"),
    )
    net = RoadNetwork(
        links=links,
        intersections=(Intersection(1, "1"),),
        movements=(Movement(1, 2, 10.0), Movement(1, 3, 10.0)),
        stages=(Stage(1, ((1, 2),)),),
        lost_time=1.0,
        sample_rate=1.0,
    )
    errors, warnings = validate_network(net)
    assert errors == []
    assert any("(1,3)" in w for w in warnings)


def test_save_load_round_trip(example, tmp_path):
    net, flows = example
    path = tmp_path / "rt.net"
    save_network(net, flows, str(path))
    net2, flows2 = load_network(str(path))
    assert net2 == net
    assert np.array_equal(flows2.values, flows.values)


def test_bundled_file_matches_builder(example):
    from signalvuln.fixtures import load_example_network

    net, flows = example
    net2, flows2 = load_example_network()
    assert net2 == net
    assert np.array_equal(flows2.values, flows.values)


def test_load_errors(tmp_path):
    with pytest.raises(NetworkFormatError):
        load_network(str(tmp_path / "missing.net"))
    bad = tmp_path / "bad.net"
    bad.write_text("{not json")
    with pytest.raises(NetworkFormatError):
        load_network(str(bad))
    wrong = tmp_path / "wrong.net"
    wrong.write_text(json.dumps({"links": [{"id": 1, "kind": "nope"}]}))
    with pytest.raises(NetworkFormatError):
        load_network(str(wrong))
