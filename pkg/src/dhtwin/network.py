"""Thermal transport of the supply and return pipe trees.

The supply graph is a tree rooted at the heating center; the return tree is
its structural mirror. Mass flows are demand-imposed (no pressure solve):
each building leaf requests Q/(cp*dT) and interior segments carry the sum of
their downstream leaves, so node-level mass conservation is exact summation.

Heat transport is finite-volume upwind advection per cell with a lumped
wall/insulation capacity node per cell. The fluid exchanges with the wall
and the wall loses to the ground at u_per_m from the pipe catalog; the
fluid-wall contact conductance is large compared to u_per_m so the series
path reproduces the catalog loss coefficient to well under a percent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import cosim, kernels
from .core import WATER, DhtwinError, FluidProps, NonFiniteState, ParseError, TimeSeries, kwh_from_joule

MAX_CELL_LENGTH_M = 10.0
KFW_PER_M_DEFAULT = 50.0   # W/(m K) fluid-wall contact, >> u_per_m
MIN_DELTA_T_K = 0.5


class DuplicateLabel(DhtwinError):
    """A pipe catalog declares the same DN label twice."""


class DegenerateDeltaT(DhtwinError):
    """A building demands heat across a vanishing supply-return spread."""


class TopologyError(DhtwinError):
    """The supply edge list does not form a tree rooted at the center."""


@dataclass(frozen=True)
class PipeProps:
    """Catalog entry for one DN label."""

    inner_diameter: float    # m
    u_per_m: float           # W/(m K) to ground
    wall_cap_per_m: float    # J/(m K) wall + insulation


def load_pipe_catalog(path) -> dict[str, PipeProps]:
    """Load a `DN,inner_diameter_m,u_w_per_mk,wall_cap_j_per_mk` file."""
    catalog: dict[str, PipeProps] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty pipe catalog", line=1)
    start = 0
    if rows[0][1][0].strip().upper() in ("DN", "LABEL"):
        start = 1
    if len(rows) == start:
        raise ParseError("pipe catalog has no data rows", line=rows[0][0])
    for lineno, row in rows[start:]:
        if len(row) != 4:
            raise ParseError("expected 4 columns `DN,inner_diameter_m,u_w_per_mk,wall_cap_j_per_mk`", line=lineno)
        label = row[0].strip()
        if label in catalog:
            raise DuplicateLabel(f"duplicate pipe label {label!r} on line {lineno}")
        try:
            d, u, cap = float(row[1]), float(row[2]), float(row[3])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if d <= 0 or u < 0 or cap <= 0:
            raise ParseError(f"non-positive pipe property for {label}", line=lineno)
        catalog[label] = PipeProps(inner_diameter=d, u_per_m=u, wall_cap_per_m=cap)
    return catalog


@dataclass(frozen=True)
class PipeSegment:
    """One supply pipe run between two nodes (the return run is mirrored)."""

    id: str
    node_from: str
    node_to: str
    length: float
    inner_diameter: float
    u_per_m: float
    wall_cap_per_m: float
    n_cells: int

    def __post_init__(self):
        if self.length <= 0 or self.inner_diameter <= 0:
            raise ValueError(f"segment {self.id}: length and diameter must be positive")
        if self.u_per_m < 0:
            raise ValueError(f"segment {self.id}: u_per_m must be >= 0")
        if self.n_cells < 1:
            raise ValueError(f"segment {self.id}: n_cells must be >= 1")
        if self.length / self.n_cells > MAX_CELL_LENGTH_M + 1e-9:
            raise ValueError(f"segment {self.id}: cell length exceeds {MAX_CELL_LENGTH_M} m")

    @property
    def area(self) -> float:
        return math.pi * self.inner_diameter**2 / 4.0

    @property
    def dx(self) -> float:
        return self.length / self.n_cells


def _cells_for(length: float) -> int:
    return max(1, math.ceil(length / MAX_CELL_LENGTH_M - 1e-12))


@dataclass
class Topology:
    """Supply tree plus derived leaf bookkeeping.

    segments are stored in topological order (every segment appears after
    the segment feeding it). Leaves are nodes with no outgoing segment;
    exactly the building connection points.
    """

    segments: list[PipeSegment]
    root: str = "center"
    ground_temp: float = 10.0
    fluid: FluidProps = field(default_factory=lambda: WATER)
    kfw_per_m: float = KFW_PER_M_DEFAULT

    def __post_init__(self):
        self._validate_and_order()

    @classmethod
    def from_edges(cls, edges, catalog: dict[str, PipeProps], root="center",
                   ground_temp=10.0, fluid=WATER, kfw_per_m=KFW_PER_M_DEFAULT,
                   cells_per_segment=None):
        """Build from `(from, to, DN, length_m)` rows and a pipe catalog."""
        segments = []
        for i, (a, b, dn, length) in enumerate(edges):
            if dn not in catalog:
                raise TopologyError(f"unknown pipe label {dn!r} in edge {a}->{b}")
            props = catalog[dn]
            n_cells = cells_per_segment(length) if cells_per_segment else _cells_for(length)
            segments.append(PipeSegment(
                id=f"s{i:03d}_{a}_{b}", node_from=a, node_to=b, length=float(length),
                inner_diameter=props.inner_diameter, u_per_m=props.u_per_m,
                wall_cap_per_m=props.wall_cap_per_m, n_cells=n_cells,
            ))
        return cls(segments=segments, root=root, ground_temp=ground_temp,
                   fluid=fluid, kfw_per_m=kfw_per_m)

    def _validate_and_order(self):
        incoming: dict[str, int] = {}
        for seg in self.segments:
            if seg.node_to in incoming:
                raise TopologyError(f"node {seg.node_to} has two incoming segments (not a tree)")
            if seg.node_to == self.root:
                raise TopologyError("a segment ends at the root")
            incoming[seg.node_to] = 1

        by_from: dict[str, list[PipeSegment]] = {}
        for seg in self.segments:
            by_from.setdefault(seg.node_from, []).append(seg)

        ordered: list[PipeSegment] = []
        stack = list(reversed(by_from.get(self.root, [])))
        seen_nodes = {self.root}
        while stack:
            seg = stack.pop()
            ordered.append(seg)
            seen_nodes.add(seg.node_to)
            for child in reversed(by_from.get(seg.node_to, [])):
                stack.append(child)
        if len(ordered) != len(self.segments):
            missing = {s.id for s in self.segments} - {s.id for s in ordered}
            raise TopologyError(f"segments unreachable from root {self.root!r}: {sorted(missing)}")
        self.segments = ordered

        self.parent_idx: list[int] = []
        idx_by_end = {seg.node_to: i for i, seg in enumerate(self.segments)}
        for seg in self.segments:
            self.parent_idx.append(idx_by_end.get(seg.node_from, -1))

        self.leaves = [seg.node_to for seg in self.segments if seg.node_to not in by_from]
        self.leaf_segment = {leaf: idx_by_end[leaf] for leaf in self.leaves}
        self.child_idx: list[list[int]] = [[] for _ in self.segments]
        for s, p in enumerate(self.parent_idx):
            if p != -1:
                self.child_idx[p].append(s)
        self.root_segments = [s for s, p in enumerate(self.parent_idx) if p == -1]
        self.leaf_index_of_segment: list = [None] * len(self.segments)
        for li, leaf in enumerate(self.leaves):
            self.leaf_index_of_segment[self.leaf_segment[leaf]] = li

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def total_length(self) -> float:
        return sum(s.length for s in self.segments)

    def segment_flows(self, leaf_flows) -> np.ndarray:
        """Interior flows accumulated child-first, so every node balances
        bitwise exactly (parent flow is literally the sum of its children)."""
        if hasattr(leaf_flows, "tolist"):
            leaf_flows = leaf_flows.tolist()
        flows = [0.0] * self.n_segments
        for s in range(self.n_segments - 1, -1, -1):
            acc = 0.0
            li = self.leaf_index_of_segment[s]
            if li is not None:
                acc += leaf_flows[li]
            for c in self.child_idx[s]:
                acc += flows[c]
            flows[s] = acc
        return np.asarray(flows)


def allocate_mass_flows(topology: Topology, building_demands: dict) -> dict:
    """Demand-driven flows for the whole tree.

    building_demands maps leaf id to (q_dem_w, t_supply, t_return). The leaf
    flow is Q/(cp*(Ts-Tr)); interior segments carry the sum of their leaves.
    Returns {'leaf_flows': {leaf: kg/s}, 'segment_flows': array}.
    """
    cp = topology.fluid.cp
    leaf_flows = np.zeros(len(topology.leaves))
    for li, leaf in enumerate(topology.leaves):
        q, ts, tr = building_demands.get(leaf, (0.0, 80.0, 55.0))
        if q < 0:
            raise ValueError(f"negative demand at {leaf}")
        if q > 0 and ts - tr < MIN_DELTA_T_K:
            raise DegenerateDeltaT(f"leaf {leaf}: dT={ts - tr:.3f} K below {MIN_DELTA_T_K} K")
        leaf_flows[li] = 0.0 if q == 0 else q / (cp * (ts - tr))
    return {
        "leaf_flows": {leaf: float(leaf_flows[i]) for i, leaf in enumerate(topology.leaves)},
        "segment_flows": topology.segment_flows(leaf_flows),
    }


class _TreeRuntime:
    """Flattened per-tree arrays consumed by the kernels."""

    def __init__(self, topology: Topology, direction: str):
        segs = topology.segments
        fluid = topology.fluid
        n_seg = len(segs)
        self.direction = direction
        self.seg_n = np.array([s.n_cells for s in segs], dtype=np.int64)
        self.seg_off = np.zeros(n_seg, dtype=np.int64)
        np.cumsum(self.seg_n[:-1], out=self.seg_off[1:])
        self.n_cells = int(self.seg_n.sum())
        dx = np.array([s.dx for s in segs])
        self.cf_cell = fluid.rho * fluid.cp * np.array([s.area for s in segs]) * dx
        self.cw_cell = np.array([s.wall_cap_per_m for s in segs]) * dx
        self.ug_wk = np.array([s.u_per_m for s in segs]) * dx
        self.kfw_wk = np.full(n_seg, topology.kfw_per_m) * dx

        ptr = [0]
        kind: list[int] = []
        ref: list[int] = []
        if direction == "supply":
            # boundary 0 is the root inlet; terminals are the leaf segments
            for s in range(n_seg):
                p = topology.parent_idx[s]
                if p == -1:
                    kind.append(0)
                    ref.append(0)
                else:
                    kind.append(1)
                    ref.append(p)
                ptr.append(len(kind))
            self.n_boundaries = 1
            self.terminal_segments = np.array(
                [topology.leaf_segment[leaf] for leaf in topology.leaves], dtype=np.int64)
        elif direction == "return":
            # boundaries are the building leaves; terminals are root-adjacent
            children: list[list[int]] = [[] for _ in range(n_seg)]
            for s, p in enumerate(topology.parent_idx):
                if p != -1:
                    children[p].append(s)
            leaf_boundary = {topology.leaf_segment[leaf]: li
                             for li, leaf in enumerate(topology.leaves)}
            for s in range(n_seg):
                if s in leaf_boundary:
                    kind.append(0)
                    ref.append(leaf_boundary[s])
                for c in children[s]:
                    kind.append(1)
                    ref.append(c)
                ptr.append(len(kind))
            self.n_boundaries = len(topology.leaves)
            self.terminal_segments = np.array(
                [s for s, p in enumerate(topology.parent_idx) if p == -1], dtype=np.int64)
        else:
            raise ValueError(direction)
        self.feed_ptr = np.array(ptr, dtype=np.int64)
        self.feed_kind = np.array(kind, dtype=np.int64)
        self.feed_ref = np.array(ref, dtype=np.int64)

        self.cf_by_cell = np.repeat(self.cf_cell, self.seg_n)
        self.cw_by_cell = np.repeat(self.cw_cell, self.seg_n)

    def storage_energy(self, tf: np.ndarray, tw: np.ndarray) -> float:
        return float(self.cf_by_cell @ tf + self.cw_by_cell @ tw)


@dataclass
class StepDiagnostics:
    """Per-macro-step energy accounting across both trees [J]."""

    e_in: float
    e_out: float
    loss: float
    storage_delta: float

    @property
    def residual(self) -> float:
        return self.e_in - self.e_out - self.loss - self.storage_delta


class NetworkState:
    """Mutable thermal state of both trees, owned by one simulation run."""

    def __init__(self, topology: Topology, t_init_supply=70.0, t_init_return=50.0):
        self.topology = topology
        self.sup = _TreeRuntime(topology, "supply")
        self.ret = _TreeRuntime(topology, "return")
        self.tf_sup = np.full(self.sup.n_cells, float(t_init_supply))
        self.tw_sup = np.full(self.sup.n_cells, float(t_init_supply))
        self.tf_ret = np.full(self.ret.n_cells, float(t_init_return))
        self.tw_ret = np.full(self.ret.n_cells, float(t_init_return))
        self.seg_mdot = np.zeros(topology.n_segments)
        self._out_sup = np.zeros(topology.n_segments)
        self._out_ret = np.zeros(topology.n_segments)
        self._leaf_seg = np.array([topology.leaf_segment[leaf]
                                   for leaf in topology.leaves], dtype=np.int64)
        self._root_seg = np.array(topology.root_segments, dtype=np.int64)
        self._cfl_per_kg = topology.fluid.cp / self.sup.cf_cell

    def snapshot(self):
        return (self.tf_sup.copy(), self.tw_sup.copy(), self.tf_ret.copy(),
                self.tw_ret.copy(), self.seg_mdot.copy())

    def restore(self, snap):
        self.tf_sup[:], self.tw_sup[:] = snap[0], snap[1]
        self.tf_ret[:], self.tw_ret[:] = snap[2], snap[3]
        self.seg_mdot[:] = snap[4]

    def set_leaf_flows(self, leaf_flows: np.ndarray):
        self.seg_mdot = self.topology.segment_flows(np.asarray(leaf_flows, dtype=float))

    def n_substeps(self, dt: float) -> int:
        cfl = float(np.max(self.seg_mdot * self._cfl_per_kg)) * dt
        return max(1, math.ceil(cfl - 1e-12))


def advance_supply(state: NetworkState, inlet_temp: float, dt: float, t_ground=None):
    """Advance the supply tree only. Returns (arrivals, q_loss_w, parts),
    parts being the (e_in, e_out, loss) joule bookkeeping of the step."""
    topo = state.topology
    cp = topo.fluid.cp
    tg = topo.ground_temp if t_ground is None else float(t_ground)
    n_sub = state.n_substeps(dt)
    root_inflow = float(state.seg_mdot[state._root_seg].sum())
    loss = kernels.advance_tree(
        state.tf_sup, state.tw_sup, state.sup.seg_off, state.sup.seg_n,
        state.sup.cf_cell, state.sup.cw_cell, state.sup.ug_wk, state.sup.kfw_wk,
        state.seg_mdot, state.sup.feed_ptr, state.sup.feed_kind, state.sup.feed_ref,
        np.array([float(inlet_temp)]), np.array([root_inflow]),
        tg, cp, dt, n_sub, state._out_sup)
    if not math.isfinite(float(state.tf_sup.sum()) + float(state.tw_sup.sum())):
        raise NonFiniteState("supply tree temperature became non-finite")
    leaf_out = state._out_sup[state._leaf_seg]
    arrivals = dict(zip(topo.leaves, leaf_out.tolist()))
    e_in = root_inflow * cp * float(inlet_temp) * dt
    e_out = float((state.seg_mdot[state._leaf_seg] * leaf_out).sum()) * cp * dt
    return arrivals, loss / dt, (e_in, e_out, loss)


def advance_return(state: NetworkState, leaf_return_temps, dt: float, t_ground=None):
    """Advance the return tree only. Returns (t_return_center, q_loss_w, parts)."""
    topo = state.topology
    cp = topo.fluid.cp
    tg = topo.ground_temp if t_ground is None else float(t_ground)
    n_sub = state.n_substeps(dt)
    leaf_temps = np.asarray(leaf_return_temps, dtype=float)
    leaf_flows = state.seg_mdot[state._leaf_seg]
    loss = kernels.advance_tree(
        state.tf_ret, state.tw_ret, state.ret.seg_off, state.ret.seg_n,
        state.ret.cf_cell, state.ret.cw_cell, state.ret.ug_wk, state.ret.kfw_wk,
        state.seg_mdot, state.ret.feed_ptr, state.ret.feed_kind, state.ret.feed_ref,
        leaf_temps, leaf_flows,
        tg, cp, dt, n_sub, state._out_ret)
    if not math.isfinite(float(state.tf_ret.sum()) + float(state.tw_ret.sum())):
        raise NonFiniteState("return tree temperature became non-finite")
    ret_term = state.ret.terminal_segments
    term_flows = state.seg_mdot[ret_term]
    term_out = state._out_ret[ret_term]
    wsum = float(term_flows.sum())
    if wsum > 0:
        t_return_center = float((term_flows * term_out).sum() / wsum)
    else:
        t_return_center = float(np.mean(term_out))
    e_in = float((leaf_flows * leaf_temps).sum()) * cp * dt
    e_out = float((term_flows * term_out).sum()) * cp * dt
    return t_return_center, loss / dt, (e_in, e_out, loss)


def advance_thermal(state: NetworkState, inlet_temp: float, leaf_return_temps,
                    dt: float, t_ground=None):
    """Advance both trees by dt with the currently allocated flows.

    leaf_return_temps: per-leaf primary return temperatures [degC] in
    topology.leaves order. Returns (arrival_temps dict, center_return_temp,
    q_loss_w, StepDiagnostics).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    e0 = (state.sup.storage_energy(state.tf_sup, state.tw_sup)
          + state.ret.storage_energy(state.tf_ret, state.tw_ret))
    arrivals, q_loss_sup, p_sup = advance_supply(state, inlet_temp, dt, t_ground)
    t_return_center, q_loss_ret, p_ret = advance_return(state, leaf_return_temps, dt, t_ground)
    e1 = (state.sup.storage_energy(state.tf_sup, state.tw_sup)
          + state.ret.storage_energy(state.tf_ret, state.tw_ret))
    diag = StepDiagnostics(e_in=p_sup[0] + p_ret[0], e_out=p_sup[1] + p_ret[1],
                           loss=p_sup[2] + p_ret[2], storage_delta=e1 - e0)
    return arrivals, t_return_center, q_loss_sup + q_loss_ret, diag


def total_heat_loss(q_loss_series: TimeSeries) -> float:
    """Time integral of a Q_loss series [W] over its grid, in kWh."""
    e_j = float(np.sum(q_loss_series.values) * q_loss_series.grid.dt)
    return kwh_from_joule(e_j)


def steady_outlet_oracle(t_in: float, t_ground: float, u_per_m: float,
                         length: float, mdot: float, cp: float = WATER.cp) -> float:
    """Closed-form steady outlet of a single pipe: exponential decay to ground."""
    return t_ground + (t_in - t_ground) * math.exp(-u_per_m * length / (mdot * cp))


class SupplyNetworkBlock(cosim.Block):
    """Supply tree as a co-simulation block.

    Sets the tree flows from the per-leaf requests, then transports the
    center supply temperature to the building arrival ports. The paired
    ReturnNetworkBlock shares the same NetworkState (and the flows set here).
    """

    def __init__(self, name: str, state: NetworkState, ground_temp_fn=None):
        super().__init__(name)
        self.state = state
        self.ground_temp_fn = ground_temp_fn
        topo = state.topology
        self.declare_input("t_inlet_degc", "degC", default=80.0)
        self._mdot_keys = []
        self._arrival_keys = []
        for leaf in topo.leaves:
            self.declare_input(f"mdot_{leaf}_kg_s", "kg/s", 0.0)
            self.declare_output(f"t_arrival_{leaf}_degc", "degC",
                                initial=float(state.tf_sup[0]))
            self._mdot_keys.append(f"mdot_{leaf}_kg_s")
            self._arrival_keys.append(f"t_arrival_{leaf}_degc")
        self.declare_output("q_loss_w", "W")
        self.declare_output("mdot_total_kg_s", "kg/s")

    def do_step(self, t, dt):
        topo = self.state.topology
        ins = self._inputs
        leaf_flows = [ins[k] for k in self._mdot_keys]
        self.state.set_leaf_flows(leaf_flows)
        tg = self.ground_temp_fn(t) if self.ground_temp_fn else None
        arrivals, q_loss, _ = advance_supply(self.state, ins["t_inlet_degc"], dt, tg)
        outs = self._outputs
        for leaf, key in zip(topo.leaves, self._arrival_keys):
            outs[key] = arrivals[leaf]
        outs["q_loss_w"] = q_loss
        outs["mdot_total_kg_s"] = float(self.state.seg_mdot[self.state._root_seg].sum())

    def snapshot(self):
        return (dict(self._outputs), self.state.tf_sup.copy(),
                self.state.tw_sup.copy(), self.state.seg_mdot.copy())

    def restore(self, snap):
        self._outputs = dict(snap[0])
        self.state.tf_sup[:] = snap[1]
        self.state.tw_sup[:] = snap[2]
        self.state.seg_mdot[:] = snap[3]


class ReturnNetworkBlock(cosim.Block):
    """Return tree block; mixes the building returns back to the center."""

    def __init__(self, name: str, state: NetworkState, ground_temp_fn=None):
        super().__init__(name)
        self.state = state
        self.ground_temp_fn = ground_temp_fn
        topo = state.topology
        self._return_keys = []
        for leaf in topo.leaves:
            self.declare_input(f"t_return_{leaf}_degc", "degC", 55.0)
            self._return_keys.append(f"t_return_{leaf}_degc")
        self.declare_output("t_return_degc", "degC", initial=float(state.tf_ret[0]))
        self.declare_output("q_loss_w", "W")
        self.declare_output("mdot_total_kg_s", "kg/s")

    def do_step(self, t, dt):
        ins = self._inputs
        leaf_temps = [ins[k] for k in self._return_keys]
        tg = self.ground_temp_fn(t) if self.ground_temp_fn else None
        t_ret, q_loss, _ = advance_return(self.state, leaf_temps, dt, tg)
        outs = self._outputs
        outs["t_return_degc"] = t_ret
        outs["q_loss_w"] = q_loss
        outs["mdot_total_kg_s"] = float(self.state.seg_mdot[self.state._root_seg].sum())

    def snapshot(self):
        return (dict(self._outputs), self.state.tf_ret.copy(), self.state.tw_ret.copy())

    def restore(self, snap):
        self._outputs = dict(snap[0])
        self.state.tf_ret[:] = snap[1]
        self.state.tw_ret[:] = snap[2]
