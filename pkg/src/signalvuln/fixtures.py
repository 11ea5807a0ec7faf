"""Bundled example network and the synthetic grid generator.

``build_example_network`` returns the two-intersection arterial that the test
suite and the documentation use throughout: 14 links (6 entry, 2 internal,
6 exit), 16 movements, and 8 two-movement stages.  The same network ships as
``data/example2.net`` and both representations are kept identical.

``build_grid_network`` produces a rows x cols grid of four-way intersections
with seeded demand.  Flows are accumulated along sampled entry-to-exit paths,
so conservation holds exactly (integer counts, dyadic rescaling).
"""

import importlib.resources

import numpy as np

from .network import (
    FlowMatrix,
    Intersection,
    Link,
    LinkKind,
    Movement,
    RoadNetwork,
    Stage,
    load_network,
)

# (from, to, saturation, flow) in declaration order; intersection 1 first.
_EXAMPLE_MOVEMENTS = [
    (1, 6, 32.0, 2.0),
    (1, 4, 32.0, 2.0),
    (3, 14, 32.0, 8.0),
    (3, 6, 32.0, 4.0),
    (5, 2, 32.0, 2.0),
    (5, 14, 32.0, 4.0),
    (7, 4, 32.0, 6.0),
    (7, 2, 32.0, 2.0),
    (8, 13, 24.0, 2.0),
    (8, 11, 24.0, 2.0),
    (10, 7, 24.0, 4.0),
    (10, 13, 24.0, 2.0),
    (12, 9, 24.0, 2.0),
    (12, 7, 24.0, 4.0),
    (14, 11, 24.0, 6.0),
    (14, 9, 24.0, 6.0),
]

_EXAMPLE_STAGES = [
    (1, [(3, 14), (7, 4)]),
    (1, [(1, 6), (5, 2)]),
    (1, [(3, 6), (7, 2)]),
    (1, [(1, 4), (5, 14)]),
    (2, [(14, 11), (10, 7)]),
    (2, [(12, 9), (8, 13)]),
    (2, [(14, 9), (10, 13)]),
    (2, [(12, 7), (8, 11)]),
]

_EXAMPLE_KINDS = {
    LinkKind.ENTRY: (1, 3, 5, 8, 10, 12),
    LinkKind.INTERNAL: (7, 14),
    LinkKind.EXIT: (2, 4, 6, 9, 11, 13),
}


def build_example_network():
    """The bundled two-intersection arterial.  Returns (net, flows)."""
    kind_of = {}
    for kind, ids in _EXAMPLE_KINDS.items():
        for lid in ids:
            kind_of[lid] = kind
    links = tuple(Link(lid, kind_of[lid], str(lid)) for lid in sorted(kind_of))
    intersections = (Intersection(1, "1"), Intersection(2, "2"))
    movements = tuple(Movement(a, b, c) for a, b, c, _ in _EXAMPLE_MOVEMENTS)
    flows = FlowMatrix(np.array([f for *_, f in _EXAMPLE_MOVEMENTS]))
    stages = tuple(Stage(n, tuple(tuple(p) for p in ph)) for n, ph in _EXAMPLE_STAGES)
    net = RoadNetwork(
        links=links,
        intersections=intersections,
        movements=movements,
        stages=stages,
        lost_time=1.0,
        sample_rate=15.0,
    )
    return net, flows


def example_network_path():
    """Filesystem path of the bundled .net file."""
    return importlib.resources.files("signalvuln").joinpath("data/example2.net")


def load_example_network():
    return load_network(str(example_network_path()))


# ----------------------------------------------------------------------
# grid generator


class GridGenerationError(RuntimeError):
    """Demand generation could not reach a feasible schedule."""


_DIRS = ("N", "E", "S", "W")
_OPPOSITE = {"N": "S", "E": "W", "S": "N", "W": "E"}
# incoming side -> (through exit side, turn exit side)
_TURNS = {"N": ("S", "E"), "S": ("N", "W"), "W": ("E", "N"), "E": ("W", "S")}
_OFFSET = {"N": (-1, 0), "S": (1, 0), "E": (0, 1), "W": (0, -1)}


def build_grid_network(rows, cols, seed=0, paths_per_intersection=30, max_load=0.85):
    """Seeded rows x cols grid of four-way intersections.

    Every intersection has eight movements (four through, four turning)
    grouped into four stages pairing non-conflicting directions.  Demand is
    drawn by routing unit-flow paths from random entry links to exits, then
    rescaled by a dyadic factor until the fixed-time schedule is feasible
    with per-intersection load at most ``max_load``.

    Returns (net, flows).  Raises GridGenerationError if feasibility cannot
    be reached within a bounded number of rescales.
    """
    from .scheduling import solve_fixed_time

    if rows < 1 or cols < 1:
        raise ValueError("grid must have at least one row and one column")
    rng = np.random.default_rng(seed)

    def node_id(r, c):
        return r * cols + c

    links = []
    # incoming[(node, side)] = link id arriving at node from that side
    # outgoing[(node, side)] = link id leaving node toward that side
    incoming = {}
    outgoing = {}

    def add_link(kind, name):
        lid = len(links)
        links.append(Link(lid, kind, name))
        return lid

    for r in range(rows):
        for c in range(cols):
            n = node_id(r, c)
            for side in _DIRS:
                dr, dc = _OFFSET[side]
                nr, nc = r + dr, c + dc
                if 0 <= nr < rows and 0 <= nc < cols:
                    m = node_id(nr, nc)
                    # one directed internal link per ordered neighbor pair
                    lid = add_link(LinkKind.INTERNAL, f"i{m}-{n}")
                    incoming[(n, side)] = lid
                    outgoing[(m, _OPPOSITE[side])] = lid
                else:
                    ein = add_link(LinkKind.ENTRY, f"e{n}{side}")
                    eout = add_link(LinkKind.EXIT, f"x{n}{side}")
                    incoming[(n, side)] = ein
                    outgoing[(n, side)] = eout

    intersections = tuple(
        Intersection(node_id(r, c), f"({r},{c})") for r in range(rows) for c in range(cols)
    )

    movements = []
    stages = []
    movement_pos = {}
    for r in range(rows):
        for c in range(cols):
            n = node_id(r, c)
            sat = float(rng.integers(24, 40))
            pair_moves = {}
            for side in _DIRS:
                src = incoming[(n, side)]
                for out_side in _TURNS[side]:
                    dst = outgoing[(n, out_side)]
                    pos = len(movements)
                    movements.append(Movement(src, dst, sat))
                    movement_pos[(src, dst)] = pos
                    pair_moves[(side, out_side)] = (src, dst)
            stages.extend(
                [
                    Stage(n, (pair_moves[("N", "S")], pair_moves[("S", "N")])),
                    Stage(n, (pair_moves[("W", "E")], pair_moves[("E", "W")])),
                    Stage(n, (pair_moves[("N", "E")], pair_moves[("S", "W")])),
                    Stage(n, (pair_moves[("W", "N")], pair_moves[("E", "S")])),
                ]
            )

    net = RoadNetwork(
        links=tuple(links),
        intersections=intersections,
        movements=tuple(movements),
        stages=tuple(stages),
        lost_time=1.0,
        sample_rate=15.0,
    )

    counts = _route_paths(net, rng, paths_per_intersection * rows * cols)
    flows = FlowMatrix(counts.astype(float))

    for _ in range(5):
        schedule = solve_fixed_time(net, flows)
        load = float(np.max(schedule.intersection_loads)) if len(schedule.intersection_loads) else 0.0
        if load <= max_load:
            return net, flows
        # dyadic factor keeps per-link balances exact in floating point
        scale = np.floor(1024.0 * max_load / load) / 1024.0
        if scale <= 0:
            scale = 1.0 / 1024.0
        flows = flows.scaled(scale)
    raise GridGenerationError("could not scale demand to a feasible schedule")


def _route_paths(net, rng, n_paths, demand_low=1, demand_high=4, max_steps=None):
    """Accumulate unit demands along random entry->exit walks.

    A path is committed only when it reaches an exit link, so every internal
    link balances exactly.  Returns integer counts per movement.
    """
    counts = np.zeros(net.n_movements, dtype=np.int64)
    entries = list(net.entry_links)
    if max_steps is None:
        max_steps = 4 * len(net.intersections) + 8
    exit_set = set(net.exit_links)
    for _ in range(n_paths):
        link = entries[int(rng.integers(len(entries)))]
        demand = int(rng.integers(demand_low, demand_high + 1))
        visited = []
        for _ in range(max_steps):
            options = net.outflow_movements[link]
            if not options:
                break
            mpos = options[int(rng.integers(len(options)))]
            visited.append(mpos)
            link = net.movements[mpos].to_link
            if link in exit_set:
                for p in visited:
                    counts[p] += demand
                break
    return counts


def random_conservative_flows(net, seed, n_paths=None, max_load=0.9):
    """Random admissible demand on an existing network.

    Uses the same path-routing construction as the grid generator, so the
    result conserves flow exactly and is rescaled to a feasible schedule.
    """
    from .scheduling import solve_fixed_time

    rng = np.random.default_rng(seed)
    if n_paths is None:
        n_paths = 20 * len(net.intersections)
    counts = _route_paths(net, rng, n_paths)
    flows = FlowMatrix(counts.astype(float))
    for _ in range(5):
        schedule = solve_fixed_time(net, flows)
        load = float(np.max(schedule.intersection_loads)) if len(schedule.intersection_loads) else 0.0
        if load <= max_load:
            return flows
        scale = np.floor(1024.0 * max_load / load) / 1024.0
        if scale <= 0:
            scale = 1.0 / 1024.0
        flows = flows.scaled(scale)
    raise GridGenerationError("could not scale random demand to feasibility")
