"""Small shared fixtures: a two-building toy grid plus its monolithic twin."""

import math

import numpy as np

from dhtwin import cosim
from dhtwin.building import (
    BuildingBlock,
    BuildingBoundaries,
    BuildingInputs,
    BuildingModel,
    HiuParams,
)
from dhtwin.center import CenterBlock, CenterConfig, CenterModel
from dhtwin.network import (
    NetworkState,
    PipeProps,
    ReturnNetworkBlock,
    SupplyNetworkBlock,
    Topology,
    advance_return,
    advance_supply,
)

CATALOG = {
    "DN50": PipeProps(0.0545, 0.17, 950.0),
    "DN40": PipeProps(0.0431, 0.15, 800.0),
}
EDGES = [
    ("center", "j1", "DN50", 60.0),
    ("j1", "b1", "DN40", 30.0),
    ("j1", "b2", "DN40", 40.0),
]

T0 = 1609459200.0  # 2021-01-01T00:00:00


def space_profile(scale):
    def fn(t):
        hour = (t % 86400.0) / 3600.0
        day = 0.75 + 0.25 * math.sin((hour - 14.0) / 24.0 * 2 * math.pi)
        return scale * day
    return fn


def dhw_profile(scale):
    def fn(t):
        hour = (t % 86400.0) / 3600.0
        return scale if 6.0 <= hour < 8.0 or 18.0 <= hour < 20.0 else 0.0
    return fn


def make_models(variant="v1"):
    topo = Topology.from_edges(EDGES, CATALOG)
    net_state = NetworkState(topo)
    center_model = CenterModel(CenterConfig.for_variant(variant))
    hiu = HiuParams(hx_power=12000.0, buffer_volume=0.3)
    b_models = {leaf: BuildingModel(hiu=hiu) for leaf in topo.leaves}
    bounds = {
        "b1": BuildingBoundaries(q_space=space_profile(6000.0), q_dhw=dhw_profile(1500.0)),
        "b2": BuildingBoundaries(q_space=space_profile(9000.0), q_dhw=dhw_profile(2000.0)),
    }
    return topo, net_state, center_model, b_models, bounds


def build_graph(variant="v1"):
    topo, net_state, center_model, b_models, bounds = make_models(variant)
    graph = cosim.CouplingGraph()
    graph.add_block(CenterBlock("center", center_model))
    graph.add_block(SupplyNetworkBlock("supply", net_state))
    for leaf in topo.leaves:
        graph.add_block(BuildingBlock(leaf, b_models[leaf], bounds[leaf]))
    graph.add_block(ReturnNetworkBlock("return", net_state))

    graph.connect("center", "t_supply_degc", "supply", "t_inlet_degc")
    for leaf in topo.leaves:
        graph.connect(leaf, "mdot_kg_s", "supply", f"mdot_{leaf}_kg_s")
        graph.connect("supply", f"t_arrival_{leaf}_degc", leaf, "t_primary_degc")
        graph.connect(leaf, "t_return_degc", "return", f"t_return_{leaf}_degc")
    graph.connect("return", "t_return_degc", "center", "t_return_degc")
    graph.connect("return", "mdot_total_kg_s", "center", "mdot_return_kg_s")
    return graph, topo


def run_monolithic(n_steps, dt=60.0, variant="v1"):
    """Same equations, stepped directly in causal order without the master."""
    from dhtwin.core import month_of

    topo, net_state, center_model, b_models, bounds = make_models(variant)
    center_state = center_model.initial_state(79.0)
    b_states = {leaf: b_models[leaf].initial_state(t_room=20.0, t_buffer=60.0)
                for leaf in topo.leaves}
    mdot_b = {leaf: 0.0 for leaf in topo.leaves}
    t_ret_b = {leaf: 55.0 for leaf in topo.leaves}
    t_ret_center = float(net_state.tf_ret[0])
    mdot_total = 0.0

    t_return_trace = {leaf: [] for leaf in topo.leaves}
    for k in range(n_steps):
        t = T0 + k * dt
        r = center_model.step(center_state, mdot_total, t_ret_center, t,
                              month_of(t), 10.0, dt)
        t_supply = r.t_supply
        net_state.set_leaf_flows(np.array([mdot_b[leaf] for leaf in topo.leaves]))
        arrivals, _, _ = advance_supply(net_state, t_supply, dt)
        for leaf in topo.leaves:
            b = bounds[leaf]
            out = b_models[leaf].step(b_states[leaf], BuildingInputs(
                t_primary_in=arrivals[leaf], t_ambient=b.t_ambient(t),
                solar_wm2=b.solar_wm2(t), q_internal=b.q_internal(t),
                q_dhw=b.q_dhw(t), q_space=b.q_space(t)), t, dt)
            mdot_b[leaf] = out.mdot_primary
            t_ret_b[leaf] = out.t_primary_out
            t_return_trace[leaf].append(out.t_primary_out)
        t_ret_center, _, _ = advance_return(
            net_state, [t_ret_b[leaf] for leaf in topo.leaves], dt)
        mdot_total = float(sum(net_state.seg_mdot[s] for s in topo.root_segments))
    return {leaf: np.array(v) for leaf, v in t_return_trace.items()}
