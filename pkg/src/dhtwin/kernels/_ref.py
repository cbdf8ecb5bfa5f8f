"""Pure-Python reference kernels for the hot inner loops.

These are the readable definitions of the numerics; `_fast.pyx` implements
the same loops in Cython with the same statement order so both backends
agree to floating-point roundoff. Keep any change mirrored in both files.

Pipe tree update per sub-step:
  1. snapshot every segment's outlet (last cell) temperature,
  2. mix each segment's inlet from its feeders (flow weighted) using the
     snapshot, so intra-step ordering cannot matter,
  3. explicit upwind advection (CFL <= 1 guaranteed by the caller's n_sub),
  4. implicit fluid<->wall exchange plus wall->ground loss (a 2x2 linear
     solve per cell; unconditionally stable, so n_sub follows CFL only).

Energy bookkeeping uses the same temperatures as the update, which makes the
per-step balance close to machine precision.
"""

from __future__ import annotations


BACKEND_NAME = "python"


def advance_tree(
    tf,
    tw,
    seg_off,
    seg_n,
    cf_cell,
    cw_cell,
    ug_wk,
    kfw_wk,
    mdot,
    feed_ptr,
    feed_kind,
    feed_ref,
    bnd_temp,
    bnd_mdot,
    t_ground,
    cp,
    dt,
    n_sub,
    outlet_mean,
):
    """Advance one pipe tree by a macro step of length dt using n_sub sub-steps.

    tf, tw          per-cell fluid and wall temperatures, updated in place
    seg_off, seg_n  cell range of each segment within tf/tw
    cf_cell         fluid heat capacity of one cell [J/K] per segment
    cw_cell         wall+insulation capacity of one cell [J/K] per segment
    ug_wk, kfw_wk   wall->ground and fluid<->wall conductance per cell [W/K]
    mdot            segment mass flows [kg/s], constant over the macro step
    feed_*          CSR feeder lists per segment; kind 0 = boundary index,
                    kind 1 = upstream segment outlet
    bnd_temp/mdot   boundary temperatures [degC] and flows [kg/s]
    outlet_mean     out: flow-time mean outlet temperature per segment

    Returns the ground loss of the step in joules.
    """
    n_seg = len(seg_n)
    dt_s = dt / n_sub
    loss_j = 0.0
    outlet_snap = [0.0] * n_seg
    inlet = [0.0] * n_seg
    for s in range(n_seg):
        outlet_mean[s] = 0.0

    for _ in range(n_sub):
        for s in range(n_seg):
            outlet_snap[s] = tf[seg_off[s] + seg_n[s] - 1]

        for s in range(n_seg):
            wsum = 0.0
            tsum = 0.0
            for k in range(feed_ptr[s], feed_ptr[s + 1]):
                if feed_kind[k] == 0:
                    w = bnd_mdot[feed_ref[k]]
                    tval = bnd_temp[feed_ref[k]]
                else:
                    w = mdot[feed_ref[k]]
                    tval = outlet_snap[feed_ref[k]]
                wsum += w
                tsum += w * tval
            if wsum > 0.0:
                inlet[s] = tsum / wsum
            else:
                inlet[s] = outlet_snap[s]

        for s in range(n_seg):
            off = seg_off[s]
            n = seg_n[s]
            cf = cf_cell[s]
            cw = cw_cell[s]
            a = kfw_wk[s] * dt_s / cf
            b = kfw_wk[s] * dt_s / cw
            c = ug_wk[s] * dt_s / cw
            det = (1.0 + a) * (1.0 + b + c) - a * b
            cfl = mdot[s] * cp * dt_s / cf

            outlet_mean[s] += outlet_snap[s]

            if cfl > 0.0:
                for i in range(off + n - 1, off, -1):
                    tf[i] = tf[i] + cfl * (tf[i - 1] - tf[i])
                tf[off] = tf[off] + cfl * (inlet[s] - tf[off])

            for i in range(off, off + n):
                rhs_w = tw[i] + c * t_ground
                tf_new = (tf[i] * (1.0 + b + c) + a * rhs_w) / det
                tw_new = ((1.0 + a) * rhs_w + b * tf[i]) / det
                loss_j += ug_wk[s] * (tw_new - t_ground) * dt_s
                tf[i] = tf_new
                tw[i] = tw_new

    for s in range(n_seg):
        outlet_mean[s] /= n_sub
    return loss_j


def tank_step(
    temps,
    layer_cap,
    mdot_charge,
    t_charge,
    mdot_disch,
    t_return,
    ua_layer,
    t_amb,
    cond_wk,
    cp,
    dt,
    n_sub,
):
    """Advance a stratified tank by dt with charge and discharge loops.

    The charge loop draws from the bottom layer and re-enters the top at
    t_charge; the discharge loop draws from the top and re-enters the bottom
    at t_return. The net of the two flows displaces water through the layer
    stack (upwind). Inter-layer conduction and a per-layer standing loss to
    t_amb are applied, then inverted layers are buoyancy-mixed.

    Returns (e_charge_j, e_discharge_j, e_loss_j): net energy added by the
    charge loop, removed by the discharge loop, and lost standing, over dt.
    """
    n = len(temps)
    dt_s = dt / n_sub
    e_charge = 0.0
    e_disch = 0.0
    e_loss = 0.0
    old = [0.0] * n

    for _ in range(n_sub):
        for i in range(n):
            old[i] = temps[i]
        up = mdot_disch - mdot_charge
        down = -up
        if up < 0.0:
            up = 0.0
        if down < 0.0:
            down = 0.0

        for i in range(n):
            q = 0.0
            if i == 0:
                q += mdot_charge * cp * (t_charge - old[0])
            if i == n - 1:
                q += mdot_disch * cp * (t_return - old[n - 1])
            if up > 0.0 and i < n - 1:
                q += up * cp * (old[i + 1] - old[i])
            if down > 0.0 and i > 0:
                q += down * cp * (old[i - 1] - old[i])
            if i > 0:
                q += cond_wk * (old[i - 1] - old[i])
            if i < n - 1:
                q += cond_wk * (old[i + 1] - old[i])
            q -= ua_layer[i] * (old[i] - t_amb)
            temps[i] = old[i] + q * dt_s / layer_cap[i]

        e_charge += mdot_charge * cp * (t_charge - old[n - 1]) * dt_s
        e_disch += mdot_disch * cp * (old[0] - t_return) * dt_s
        for i in range(n):
            e_loss += ua_layer[i] * (old[i] - t_amb) * dt_s

        _buoyancy_mix(temps, layer_cap, n)

    return e_charge, e_disch, e_loss


def _buoyancy_mix(temps, layer_cap, n):
    # Mix adjacent inverted layers (cooler above warmer) to their
    # capacity-weighted mean until the profile is monotone again.
    changed = True
    while changed:
        changed = False
        for i in range(n - 1):
            if temps[i] < temps[i + 1] - 1e-12:
                cap = layer_cap[i] + layer_cap[i + 1]
                tmix = (layer_cap[i] * temps[i] + layer_cap[i + 1] * temps[i + 1]) / cap
                temps[i] = tmix
                temps[i + 1] = tmix
                changed = True
