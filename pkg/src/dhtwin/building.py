"""Modular building: thermal envelope, radiator, HIU with buffer tank.

A building couples to the grid only through its heat interface unit: the
primary loop delivers water at the arrival temperature, the HIU exchanger
charges a small stratified buffer, and a PI controller modulates the primary
flow so the water returns to the grid at the 55 degC setpoint. Space heating
and domestic hot water are drawn from the buffer top.

Two demand modes exist. In envelope mode a two-node RC model plus a room
thermostat generates the space-heat demand from weather; in profile mode the
space-heat and DHW series are prescribed and the envelope is bypassed. The
analysis runs use profile mode; envelope mode serves model validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cosim, kernels
from .core import WATER, FluidProps, NonFiniteState

DEADBAND_K = 0.5
T_RETURN_SET = 55.0


@dataclass(frozen=True)
class EnvelopeParams:
    """Two-node (room air / wall mass) envelope.

    Defaults represent a renovated single family house of 186.8 m2
    conditioned area in the 42 kWh/(m2 a) demand class (TABULA type
    DE.N.SFH.12 territory; aggregate values, since the two-node reduction
    cannot carry component U-values). Annual space heat over the bundled
    weather lands on 42 kWh/m2 with the default room schedule.
    """

    a_c: float = 186.8          # m2 conditioned area
    ua_env: float = 126.0       # W/K wall to ambient
    c_int: float = 8.0e6        # J/K room air + furniture
    c_wall: float = 6.0e7       # J/K
    ua_iw: float = 600.0        # W/K room <-> wall coupling
    vent_loss: float = 33.0     # W/K air exchange, room to ambient
    g_solar: float = 4.2        # m2 effective solar aperture

    def __post_init__(self):
        for name in ("a_c", "ua_env", "c_int", "c_wall", "ua_iw", "vent_loss", "g_solar"):
            if getattr(self, name) <= 0:
                raise ValueError(f"envelope parameter {name} must be positive")


@dataclass(frozen=True)
class RadiatorParams:
    q_nom: float = 8000.0    # W at nominal over-temperature
    dt_nom: float = 30.0     # K
    exponent: float = 1.3

    def __post_init__(self):
        if self.q_nom <= 0 or self.dt_nom <= 0:
            raise ValueError("radiator q_nom and dt_nom must be positive")
        if not 1.0 <= self.exponent <= 1.5:
            raise ValueError("radiator exponent outside [1, 1.5]")


@dataclass(frozen=True)
class HiuParams:
    hx_effectiveness: float = 0.9
    buffer_volume: float = 0.3          # m3
    t_return_set: float = T_RETURN_SET  # degC primary return target
    mdot_primary_max: float = 0.5       # kg/s
    mdot_primary_min: float = 0.0
    mdot_trickle: float = 0.0           # kg/s bypass keeping the service pipe warm
    hx_power: float = 15000.0           # W design exchanger duty
    charge_on: float = 58.0             # degC buffer top, charging latches on
    charge_off: float = 64.0            # degC buffer top, charging latches off
    buffer_ua: float = 2.5              # W/K standing loss
    t_amb_room: float = 15.0            # degC around the buffer
    pi_kp: float = 0.002                # kg/s per K
    pi_ki: float = 2.0e-4               # kg/s per K s
    n_layers: int = 3
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 < self.hx_effectiveness <= 1.0:
            raise ValueError("hx_effectiveness must be in (0, 1]")
        if self.buffer_volume <= 0:
            raise ValueError("buffer_volume must be positive")
        if self.charge_off <= self.charge_on:
            raise ValueError("charge_off must exceed charge_on")


@dataclass
class BuildingState:
    t_room: float
    t_wall: float
    buffer: np.ndarray            # degC, layer 0 = top
    hiu_integrator: float = 0.0   # kg/s accumulated PI trim
    room_integrator: float = 0.0  # radiator modulation accumulated
    charging: bool = False
    mdot_primary: float = 0.0
    t_primary_out: float = T_RETURN_SET

    def copy(self) -> "BuildingState":
        return BuildingState(
            t_room=self.t_room, t_wall=self.t_wall, buffer=self.buffer.copy(),
            hiu_integrator=self.hiu_integrator, room_integrator=self.room_integrator,
            charging=self.charging, mdot_primary=self.mdot_primary,
            t_primary_out=self.t_primary_out)


@dataclass(frozen=True)
class BuildingInputs:
    t_primary_in: float
    t_ambient: float = 10.0
    solar_wm2: float = 0.0
    q_internal: float = 0.0
    q_dhw: float = 0.0
    q_space: float | None = None   # prescribed space heat [W]; None = thermostat


@dataclass(frozen=True)
class BuildingOutputs:
    mdot_primary: float
    t_primary_out: float
    t_room: float
    q_rad: float
    q_hx: float         # heat taken from the primary loop
    q_unserved: float   # demand the buffer could not cover this step
    e_charge_j: float = 0.0   # buffer energy in from the exchanger
    e_discharge_j: float = 0.0  # buffer energy out to radiator/DHW
    e_loss_j: float = 0.0     # buffer standing loss


def setpoint_schedule(t: float) -> float:
    """Room setpoint: 20 degC for local hours [0, 7), 22 degC for [7, 24)."""
    hour = (t % 86400.0) / 3600.0
    return 20.0 if hour < 7.0 else 22.0


def radiator_output(t_water: float, t_room: float, params: RadiatorParams) -> float:
    """Power-law radiator emission; zero once the water is no hotter than the room."""
    dt = t_water - t_room
    if dt <= 0.0:
        return 0.0
    return params.q_nom * (dt / params.dt_nom) ** params.exponent


def hiu_step(state: BuildingState, t_primary_in: float, q_request: float,
             dt: float, params: HiuParams, fluid: FluidProps = WATER):
    """Advance the primary-side controller and exchanger by dt.

    The PI controller modulates the primary mass flow so the primary outlet
    tracks t_return_set. The transferred duty is capped twice: by exchanger
    effectiveness against the buffer bottom, and by the return setpoint (the
    primary is never cooled below it, so an arrival at the setpoint yields
    no duty). Returns (mdot_primary, t_primary_out, q_hx).
    """
    cp = fluid.cp
    t_set = params.t_return_set
    t_bottom = float(state.buffer[-1])
    q_request = max(0.0, q_request)
    dt_set = t_primary_in - t_set
    mdot_floor = max(params.mdot_primary_min, params.mdot_trickle)

    if not params.enabled or q_request <= 0.0:
        mdot = params.mdot_trickle if params.enabled else 0.0
        state.mdot_primary = mdot
        state.t_primary_out = t_primary_in
        return mdot, t_primary_in, 0.0

    if dt_set <= -1.5:
        # cold-start purge: the service line has gone cold; open the valve
        # to pull hot water down and charge against the buffer bottom while
        # the 55 degC return target is unreachable anyway
        mdot = max(0.30 * params.mdot_primary_max, mdot_floor)
        q_hx = max(0.0, min(q_request,
                            params.hx_effectiveness * mdot * cp
                            * (t_primary_in - t_bottom)))
        t_out = t_primary_in - q_hx / (mdot * cp)
        state.mdot_primary = mdot
        state.t_primary_out = t_out
        return mdot, t_out, q_hx

    if dt_set <= 0.0:
        # arrival at or just under the setpoint: no driving spread for a
        # 55 degC return, keep the minimum circulation and wait
        mdot = params.mdot_trickle
        state.mdot_primary = mdot
        state.t_primary_out = t_primary_in
        return mdot, t_primary_in, 0.0

    # feed-forward flow that would return exactly at the setpoint
    mdot_ff = q_request / (cp * max(dt_set, 0.5))
    err = state.t_primary_out - t_set
    mdot = mdot_ff - params.pi_kp * err - state.hiu_integrator
    mdot_clamped = min(max(mdot, mdot_floor), params.mdot_primary_max)
    if mdot_clamped == mdot:  # anti-windup: integrate only while unsaturated
        state.hiu_integrator += params.pi_ki * err * dt
    state.hiu_integrator *= max(0.0, 1.0 - 0.002 * dt)  # leak residual bias
    state.hiu_integrator = min(max(state.hiu_integrator, -0.05), 0.05)
    mdot = mdot_clamped

    q_hx = min(q_request,
               params.hx_effectiveness * mdot * cp * max(t_primary_in - t_bottom, 0.0),
               mdot * cp * dt_set)
    q_hx = max(0.0, q_hx)
    if mdot > 1e-12:
        t_out = t_primary_in - q_hx / (mdot * cp)
    else:
        mdot = 0.0
        q_hx = 0.0
        t_out = t_primary_in

    state.mdot_primary = mdot
    state.t_primary_out = t_out
    return mdot, t_out, q_hx


class BuildingModel:
    """One building instance: envelope + radiator + HIU + buffer."""

    def __init__(self, envelope: EnvelopeParams | None = None,
                 radiator: RadiatorParams | None = None,
                 hiu: HiuParams | None = None,
                 fluid: FluidProps = WATER,
                 room_pi_kp: float = 1.0, room_pi_ki: float = 2.0e-3):
        self.envelope = envelope or EnvelopeParams()
        self.radiator = radiator or RadiatorParams()
        self.hiu = hiu or HiuParams()
        self.fluid = fluid
        self.room_pi_kp = room_pi_kp
        self.room_pi_ki = room_pi_ki
        vol_layer = self.hiu.buffer_volume / self.hiu.n_layers
        self._layer_cap = np.full(self.hiu.n_layers, fluid.rho * vol_layer * fluid.cp)
        self._ua_layer = np.full(self.hiu.n_layers, self.hiu.buffer_ua / self.hiu.n_layers)
        # secondary charge loop sized for the design duty across 20 K
        self._mdot_charge = self.hiu.hx_power / (fluid.cp * 20.0)

    def initial_state(self, t_room=20.0, t_buffer=60.0) -> BuildingState:
        return BuildingState(t_room=t_room, t_wall=t_room,
                             buffer=np.full(self.hiu.n_layers, float(t_buffer)))

    def step(self, state: BuildingState, inputs: BuildingInputs, t: float,
             dt: float) -> BuildingOutputs:
        cp = self.fluid.cp
        buf = state.buffer
        t_top = float(buf[0])

        # --- space heating demand -----------------------------------------
        if inputs.q_space is None:
            t_set = setpoint_schedule(t)
            err = t_set - state.t_room
            if abs(err) <= DEADBAND_K / 2.0:
                err_eff = 0.0
            else:
                err_eff = err - math.copysign(DEADBAND_K / 2.0, err)
            mod = state.room_integrator + self.room_pi_kp * err_eff
            mod_clamped = min(max(mod, 0.0), 1.0)
            if mod == mod_clamped:
                state.room_integrator += self.room_pi_ki * err_eff * dt
            state.room_integrator = min(max(state.room_integrator, 0.0), 1.0)
            q_rad = mod_clamped * radiator_output(t_top, state.t_room, self.radiator)
        else:
            q_rad = max(0.0, float(inputs.q_space))

        # --- buffer draws (radiator circuit + DHW), from the top ----------
        q_draw = q_rad + max(0.0, inputs.q_dhw)
        q_unserved = 0.0
        if q_draw > 0.0:
            # draw is only possible while the top stays usefully warm
            t_floor = state.t_room if inputs.q_space is None else 25.0
            avail = max(0.0, (t_top - t_floor)) * self._layer_cap[0] / dt
            if q_draw > avail:
                q_unserved = q_draw - avail
                q_draw = avail
                if inputs.q_space is None:
                    q_rad = max(0.0, q_draw - max(0.0, inputs.q_dhw))
        mdot_draw = q_draw / (cp * 20.0)
        t_draw_return = t_top - 20.0

        # --- HIU charging --------------------------------------------------
        if state.charging:
            if t_top >= self.hiu.charge_off:
                state.charging = False
        else:
            if t_top < self.hiu.charge_on:
                state.charging = True
        q_request = self.hiu.hx_power if (state.charging and self.hiu.enabled) else 0.0
        mdot_p, t_p_out, q_hx = hiu_step(state, inputs.t_primary_in, q_request,
                                         dt, self.hiu, self.fluid)

        mdot_c = self._mdot_charge if q_hx > 0.0 else 0.0
        t_charge = buf[-1] + (q_hx / (mdot_c * cp) if mdot_c > 0.0 else 0.0)

        e_charge, e_disch, e_loss = kernels.tank_step(
            buf, self._layer_cap, mdot_c, t_charge, mdot_draw,
            t_draw_return, self._ua_layer, self.hiu.t_amb_room,
            0.5, cp, dt, self._tank_substeps(mdot_c, mdot_draw, dt))

        # --- envelope update (after heat emission is known) ----------------
        if inputs.q_space is None:
            env = self.envelope
            q_sol = env.g_solar * max(0.0, inputs.solar_wm2)
            d_room = (env.ua_iw * (state.t_wall - state.t_room)
                      + env.vent_loss * (inputs.t_ambient - state.t_room)
                      + q_rad + inputs.q_internal + 0.5 * q_sol) * dt / env.c_int
            d_wall = (env.ua_iw * (state.t_room - state.t_wall)
                      + env.ua_env * (inputs.t_ambient - state.t_wall)
                      + 0.5 * q_sol) * dt / env.c_wall
            state.t_room += d_room
            state.t_wall += d_wall

        if not (math.isfinite(state.t_room) and math.isfinite(float(buf[0]))):
            raise NonFiniteState("building state became non-finite")

        return BuildingOutputs(mdot_primary=mdot_p, t_primary_out=t_p_out,
                               t_room=state.t_room, q_rad=q_rad, q_hx=q_hx,
                               q_unserved=q_unserved, e_charge_j=e_charge,
                               e_discharge_j=e_disch, e_loss_j=e_loss)

    def _tank_substeps(self, mdot_c: float, mdot_d: float, dt: float) -> int:
        flow_wk = (mdot_c + mdot_d) * self.fluid.cp
        tau = float(self._layer_cap[0]) / (flow_wk + float(self._ua_layer[0]) + 1.0)
        return max(1, math.ceil(dt / (0.5 * tau)))

    def buffer_energy(self, state: BuildingState) -> float:
        return float(np.dot(self._layer_cap, state.buffer))


def constant(value: float):
    return lambda t: value


@dataclass
class BuildingBoundaries:
    """Boundary signals for one building, as callables of epoch time."""

    t_ambient: callable = None
    solar_wm2: callable = None
    q_internal: callable = None
    q_dhw: callable = None
    q_space: callable = None   # None selects envelope (thermostat) mode

    def __post_init__(self):
        self.t_ambient = self.t_ambient or constant(10.0)
        self.solar_wm2 = self.solar_wm2 or constant(0.0)
        self.q_internal = self.q_internal or constant(0.0)
        self.q_dhw = self.q_dhw or constant(0.0)


class BuildingBlock(cosim.Block):
    """Building as a co-simulation block: arrival temperature in, primary
    flow request and return temperature out."""

    def __init__(self, name: str, model: BuildingModel,
                 boundaries: BuildingBoundaries | None = None,
                 t_room0=20.0, t_buffer0=60.0):
        super().__init__(name)
        self.model = model
        self.boundaries = boundaries or BuildingBoundaries()
        self._t_room0 = t_room0
        self._t_buffer0 = t_buffer0
        self.state = model.initial_state(t_room=t_room0, t_buffer=t_buffer0)
        self.declare_input("t_primary_degc", "degC", default=70.0)
        self.declare_output("mdot_kg_s", "kg/s", 0.0)
        self.declare_output("t_return_degc", "degC", model.hiu.t_return_set)
        self.declare_output("q_hx_w", "W")
        self.declare_output("q_rad_w", "W")
        self.declare_output("t_room_degc", "degC", t_room0)
        self.declare_output("q_unserved_w", "W")

    def init(self, t0):
        self.state = self.model.initial_state(t_room=self._t_room0,
                                              t_buffer=self._t_buffer0)

    def do_step(self, t, dt):
        b = self.boundaries
        q_space = b.q_space(t) if b.q_space is not None else None
        inputs = BuildingInputs(
            t_primary_in=self._inputs["t_primary_degc"],
            t_ambient=b.t_ambient(t), solar_wm2=b.solar_wm2(t),
            q_internal=b.q_internal(t), q_dhw=b.q_dhw(t), q_space=q_space)
        out = self.model.step(self.state, inputs, t, dt)
        self._outputs["mdot_kg_s"] = out.mdot_primary
        self._outputs["t_return_degc"] = out.t_primary_out
        self._outputs["q_hx_w"] = out.q_hx
        self._outputs["q_rad_w"] = out.q_rad
        self._outputs["t_room_degc"] = out.t_room
        self._outputs["q_unserved_w"] = out.q_unserved

    def snapshot(self):
        return (dict(self._outputs), self.state.copy())

    def restore(self, snap):
        self._outputs = dict(snap[0])
        self.state = snap[1].copy()
