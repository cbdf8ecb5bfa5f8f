# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; statement-for-statement mirror of `_ref.py`.

Keep the arithmetic order identical to the reference so both backends agree
to floating-point roundoff.
"""

import numpy as np

BACKEND_NAME = "cython"


def advance_tree(
    double[::1] tf,
    double[::1] tw,
    long long[::1] seg_off,
    long long[::1] seg_n,
    double[::1] cf_cell,
    double[::1] cw_cell,
    double[::1] ug_wk,
    double[::1] kfw_wk,
    double[::1] mdot,
    long long[::1] feed_ptr,
    long long[::1] feed_kind,
    long long[::1] feed_ref,
    double[::1] bnd_temp,
    double[::1] bnd_mdot,
    double t_ground,
    double cp,
    double dt,
    long long n_sub,
    double[::1] outlet_mean,
):
    cdef Py_ssize_t n_seg = seg_n.shape[0]
    cdef double dt_s = dt / n_sub
    cdef double loss_j = 0.0
    cdef Py_ssize_t s, i, k, sub
    cdef long long off, n
    cdef double cf, cw, a, b, c, det, cfl
    cdef double wsum, tsum, w, tval
    cdef double rhs_w, tf_new, tw_new
    cdef double[::1] outlet_snap = np.empty(n_seg, dtype=np.float64)
    cdef double[::1] inlet = np.empty(n_seg, dtype=np.float64)

    for s in range(n_seg):
        outlet_mean[s] = 0.0

    for sub in range(n_sub):
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
    double[::1] temps,
    double[::1] layer_cap,
    double mdot_charge,
    double t_charge,
    double mdot_disch,
    double t_return,
    double[::1] ua_layer,
    double t_amb,
    double cond_wk,
    double cp,
    double dt,
    long long n_sub,
):
    cdef Py_ssize_t n = temps.shape[0]
    cdef double dt_s = dt / n_sub
    cdef double e_charge = 0.0
    cdef double e_disch = 0.0
    cdef double e_loss = 0.0
    cdef double[::1] old = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, sub
    cdef double up, down, q
    cdef bint changed
    cdef double cap, tmix

    for sub in range(n_sub):
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

    return e_charge, e_disch, e_loss
