"""Road network model: links, movements, stages, nominal flows, and file I/O.

A network is a directed graph whose edges are road links and whose nodes are
signalized intersections.  Traffic moves from link to link through *movements*
(from-link, to-link pairs); a *stage* is a set of movements served
simultaneously at one intersection.  Demand is a nonnegative flow per
movement, in vehicles per sample period.  Entry links carry traffic into the
network, exit links carry it out, and internal links connect intersections;
internal links must conserve flow (inflow equals outflow).
"""

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class NetworkFormatError(ValueError):
    """A network file could not be parsed against the expected schema."""


class NetworkValidationError(ValueError):
    """A parsed network violates a structural invariant."""


class LinkKind(enum.Enum):
    ENTRY = "entry"
    INTERNAL = "internal"
    EXIT = "exit"


@dataclass(frozen=True)
class Link:
    id: int
    kind: LinkKind
    name: str = ""


@dataclass(frozen=True)
class Intersection:
    id: int
    name: str = ""


@dataclass(frozen=True)
class Movement:
    """One turning intention, served at ``saturation`` vehicles per period.

    The movement's sensor id equals its position in ``RoadNetwork.movements``;
    there is exactly one flow sensor per movement.
    """

    from_link: int
    to_link: int
    saturation: float


@dataclass(frozen=True)
class Stage:
    """A set of simultaneously green movements at one intersection."""

    intersection: int
    phases: tuple


def _as_phase_tuple(phases):
    return tuple((int(a), int(b)) for a, b in phases)


@dataclass(frozen=True)
class FlowMatrix:
    """Per-movement demand, aligned with ``RoadNetwork.movements``.

    Immutable after construction; ``replace``/``scaled`` return new instances.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("flow values must be a one-dimensional array")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __eq__(self, other):
        if not isinstance(other, FlowMatrix):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __len__(self):
        return len(self.values)

    def replace(self, index, value):
        out = self.values.copy()
        out[index] = value
        return FlowMatrix(out)

    def scaled(self, factor):
        return FlowMatrix(self.values * factor)


@dataclass(frozen=True)
class RoadNetwork:
    links: tuple
    intersections: tuple
    movements: tuple
    stages: tuple
    lost_time: float = 1.0
    sample_rate: float = 1.0

    # ------------------------------------------------------------------
    # derived index maps (positions, not ids, index every matrix/vector)

    @cached_property
    def link_index(self):
        return {lk.id: pos for pos, lk in enumerate(self.links)}

    @cached_property
    def intersection_index(self):
        return {n.id: pos for pos, n in enumerate(self.intersections)}

    @cached_property
    def movement_index(self):
        return {(m.from_link, m.to_link): pos for pos, m in enumerate(self.movements)}

    @property
    def n_movements(self):
        return len(self.movements)

    @cached_property
    def saturations(self):
        arr = np.array([m.saturation for m in self.movements], dtype=float)
        arr.flags.writeable = False
        return arr

    @cached_property
    def entry_links(self):
        return tuple(lk.id for lk in self.links if lk.kind is LinkKind.ENTRY)

    @cached_property
    def internal_links(self):
        return tuple(lk.id for lk in self.links if lk.kind is LinkKind.INTERNAL)

    @cached_property
    def exit_links(self):
        return tuple(lk.id for lk in self.links if lk.kind is LinkKind.EXIT)

    @cached_property
    def inflow_movements(self):
        """link id -> movement positions whose ``to`` is that link."""
        out = {lk.id: [] for lk in self.links}
        for pos, m in enumerate(self.movements):
            out[m.to_link].append(pos)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def outflow_movements(self):
        """link id -> movement positions whose ``from`` is that link."""
        out = {lk.id: [] for lk in self.links}
        for pos, m in enumerate(self.movements):
            out[m.from_link].append(pos)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def stages_of(self):
        """intersection id -> stage positions, in declaration order."""
        out = {n.id: [] for n in self.intersections}
        for pos, st in enumerate(self.stages):
            out[st.intersection].append(pos)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def stage_movements(self):
        """stage position -> movement positions of its phases."""
        idx = self.movement_index
        return tuple(tuple(idx[p] for p in st.phases) for st in self.stages)

    @cached_property
    def movement_stages(self):
        """movement position -> stage positions containing it."""
        out = [[] for _ in self.movements]
        for spos, members in enumerate(self.stage_movements):
            for mpos in members:
                out[mpos].append(spos)
        return tuple(tuple(v) for v in out)

    @cached_property
    def movement_intersection(self):
        """movement position -> intersection id, or None if unstaged."""
        out = [None] * len(self.movements)
        for st, members in zip(self.stages, self.stage_movements):
            for mpos in members:
                out[mpos] = st.intersection
        return tuple(out)

    @cached_property
    def intersection_movements(self):
        """intersection id -> movement positions staged there."""
        out = {n.id: [] for n in self.intersections}
        for mpos, nid in enumerate(self.movement_intersection):
            if nid is not None:
                out[nid].append(mpos)
        return {k: tuple(sorted(set(v))) for k, v in out.items()}

    def movement_pos(self, from_link, to_link):
        try:
            return self.movement_index[(from_link, to_link)]
        except KeyError:
            raise KeyError(f"no movement ({from_link},{to_link}) in network") from None

    def flow_of(self, flows, from_link, to_link):
        return float(flows.values[self.movement_pos(from_link, to_link)])


# ----------------------------------------------------------------------
# validation


def validate_network(net, flows=None):
    """Check structural invariants.  Returns (errors, warnings) as string lists."""
    errors = []
    warnings = []

    link_ids = [lk.id for lk in net.links]
    if len(set(link_ids)) != len(link_ids):
        errors.append("duplicate link ids")
    if any(i < 0 for i in link_ids):
        errors.append("negative link id")
    node_ids = [n.id for n in net.intersections]
    if len(set(node_ids)) != len(node_ids):
        errors.append("duplicate intersection ids")

    kind = {lk.id: lk.kind for lk in net.links}
    seen = set()
    for m in net.movements:
        if m.from_link not in kind:
            errors.append(f"movement ({m.from_link},{m.to_link}) references unknown from-link")
            continue
        if m.to_link not in kind:
            errors.append(f"movement ({m.from_link},{m.to_link}) references unknown to-link")
            continue
        if (m.from_link, m.to_link) in seen:
            errors.append(f"duplicate movement ({m.from_link},{m.to_link})")
        seen.add((m.from_link, m.to_link))
        if not (m.saturation > 0):
            errors.append(f"movement ({m.from_link},{m.to_link}) has nonpositive saturation")
        if kind[m.from_link] is LinkKind.EXIT:
            errors.append(f"exit link {m.from_link} used as a from-link")
        if kind[m.to_link] is LinkKind.ENTRY:
            errors.append(f"entry link {m.to_link} used as a to-link")

    if not errors:
        for lk in net.links:
            if lk.kind is LinkKind.INTERNAL:
                if not net.inflow_movements[lk.id]:
                    errors.append(f"internal link {lk.id} has no inflow movement")
                if not net.outflow_movements[lk.id]:
                    errors.append(f"internal link {lk.id} has no outflow movement")

    node_set = set(node_ids)
    movement_set = {(m.from_link, m.to_link) for m in net.movements}
    staged_at = {}
    for spos, st in enumerate(net.stages):
        if st.intersection not in node_set:
            errors.append(f"stage {spos} references unknown intersection {st.intersection}")
            continue
        if not st.phases:
            errors.append(f"stage {spos} is empty")
        if len(set(st.phases)) != len(st.phases):
            errors.append(f"stage {spos} repeats a phase")
        for p in st.phases:
            if p not in movement_set:
                errors.append(f"stage {spos} references unknown movement {p}")
                continue
            prev = staged_at.setdefault(p, st.intersection)
            if prev != st.intersection:
                errors.append(f"movement {p} staged at two intersections ({prev}, {st.intersection})")

    # all movements leaving (entering) one link must be controlled at one node
    for getter, side in ((lambda m: m.from_link, "from"), (lambda m: m.to_link, "to")):
        at = {}
        for m in net.movements:
            p = (m.from_link, m.to_link)
            if p not in staged_at:
                continue
            node = staged_at[p]
            prev = at.setdefault(getter(m), node)
            if prev != node:
                errors.append(f"link {getter(m)} has {side}-movements at two intersections")

    for n in net.intersections:
        if not errors and not net.stages_of.get(n.id):
            errors.append(f"intersection {n.id} has no stages")

    for m in net.movements:
        if (m.from_link, m.to_link) not in staged_at:
            warnings.append(f"movement ({m.from_link},{m.to_link}) belongs to no stage")

    if net.lost_time < 0:
        errors.append("lost_time must be nonnegative")
    if not (net.sample_rate > 0):
        errors.append("sample_rate must be positive")

    if flows is not None:
        if len(flows.values) != len(net.movements):
            errors.append("flow vector length does not match movement count")
        elif np.any(flows.values < 0):
            bad = int(np.argmin(flows.values))
            m = net.movements[bad]
            errors.append(f"negative flow on movement ({m.from_link},{m.to_link})")

    return errors, warnings


@dataclass(frozen=True)
class ConservationViolation:
    link: int
    inflow: float
    outflow: float

    @property
    def magnitude(self):
        return abs(self.inflow - self.outflow)


def check_conservation(net, flows, tol=0.0):
    """Internal links whose inflow and outflow differ by more than ``tol``."""
    out = []
    for lid in net.internal_links:
        fin = float(sum(flows.values[p] for p in net.inflow_movements[lid]))
        fout = float(sum(flows.values[p] for p in net.outflow_movements[lid]))
        if abs(fin - fout) > tol:
            out.append(ConservationViolation(lid, fin, fout))
    return out


def total_flow(flows):
    return float(np.sum(flows.values))


# ----------------------------------------------------------------------
# file format


_KINDS = {k.value: k for k in LinkKind}


def _network_from_dict(doc):
    try:
        links = tuple(
            Link(int(e["id"]), _KINDS[e["kind"]], str(e.get("name", e["id"])))
            for e in doc["links"]
        )
        intersections = tuple(
            Intersection(int(e["id"]), str(e.get("name", e["id"])))
            for e in doc["intersections"]
        )
        movements = []
        flow_values = []
        for e in doc["movements"]:
            movements.append(Movement(int(e["from"]), int(e["to"]), float(e["saturation"])))
            flow_values.append(float(e["flow"]))
        stages = tuple(
            Stage(int(e["intersection"]), _as_phase_tuple(e["phases"]))
            for e in doc["stages"]
        )
        net = RoadNetwork(
            links=links,
            intersections=intersections,
            movements=tuple(movements),
            stages=stages,
            lost_time=float(doc["lost_time"]),
            sample_rate=float(doc["sample_rate"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkFormatError(f"malformed network document: {exc}") from exc
    return net, FlowMatrix(np.array(flow_values, dtype=float))


def load_network(path):
    """Read a ``.net`` JSON file.  Returns (RoadNetwork, FlowMatrix).

    Raises NetworkFormatError on parse problems and NetworkValidationError
    (naming the first violated invariant) on structural problems.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise NetworkFormatError(f"cannot read network file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise NetworkFormatError("top-level network document must be an object")
    net, flows = _network_from_dict(doc)
    errors, _ = validate_network(net, flows)
    if errors:
        raise NetworkValidationError(errors[0])
    return net, flows


def network_to_dict(net, flows):
    return {
        "links": [
            {"id": lk.id, "kind": lk.kind.value, "name": lk.name} for lk in net.links
        ],
        "intersections": [{"id": n.id, "name": n.name} for n in net.intersections],
        "movements": [
            {
                "from": m.from_link,
                "to": m.to_link,
                "saturation": m.saturation,
                "flow": float(flows.values[pos]),
            }
            for pos, m in enumerate(net.movements)
        ],
        "stages": [
            {"intersection": st.intersection, "phases": [list(p) for p in st.phases]}
            for st in net.stages
        ],
        "lost_time": net.lost_time,
        "sample_rate": net.sample_rate,
    }


def save_network(net, flows, path):
    """Write a ``.net`` JSON file; ``load_network`` round-trips it exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net, flows), fh, indent=2)
        fh.write("\n")
