"""Pure-Python episode integration kernel.

Reference implementation of the semi-implicit Euler loop.  The compiled
kernel in ``_kernel.pyx`` mirrors this file statement for statement; the
parity test suite asserts the two produce bit-identical trajectories, so
any change here must be made there too, in the same operation order.

State vector layout (``state``): t, x_body, v_body, s_slug, v_slug,
q_residual, t_since_off, pulse_count.

Packed config layout (``pcfg``): m_slug, m_body_eff, s_max, act_coeff,
c_damp, reflux_k, hold_gain, k_es, c_es, mu_s, mu_d, n_force, v_stick,
drag_c, s_lo, s_hi.

Energy accumulator layout (``energy``): work_in, friction_loss,
viscous_loss, potential_gain.  Work terms use midpoint velocities, and
friction claims the residual impulse of the body update (including stick
snaps), so the audit closes to rounding error by construction.
"""

from __future__ import annotations

from math import exp

# pcfg indices
M_SLUG, M_BODY, S_MAX, ACT_COEFF, C_DAMP, REFLUX_K, HOLD_GAIN = 0, 1, 2, 3, 4, 5, 6
K_ES, C_ES, MU_S, MU_D, N_FORCE, V_STICK, DRAG_C, S_LO, S_HI = 7, 8, 9, 10, 11, 12, 13, 14, 15
S_STROKE, C_DAMP2 = 16, 17

IMPL = "pure-python"


def run_core(
    pcfg,
    bounds,
    volts,
    ons,
    risings,
    fallings,
    tau,
    dt_target,
    log_dt,
    state,
    log_t,
    log_x,
    log_vb,
    log_s,
    log_vs,
    log_volt,
    log_q,
    edge_t,
    edge_x,
    energy,
):
    m_slug = pcfg[M_SLUG]
    m_body = pcfg[M_BODY]
    s_max = pcfg[S_MAX]
    act_coeff = pcfg[ACT_COEFF]
    c_damp = pcfg[C_DAMP]
    reflux_k = pcfg[REFLUX_K]
    hold_gain = pcfg[HOLD_GAIN]
    k_es = pcfg[K_ES]
    c_es = pcfg[C_ES]
    mu_s = pcfg[MU_S]
    mu_d = pcfg[MU_D]
    n_force = pcfg[N_FORCE]
    v_stick = pcfg[V_STICK]
    drag_c = pcfg[DRAG_C]
    s_lo = pcfg[S_LO]
    s_hi = pcfg[S_HI]
    s_stroke = pcfg[S_STROKE]
    c_damp2 = pcfg[C_DAMP2]

    t = state[0]
    x = state[1]
    vb = state[2]
    s = state[3]
    vs = state[4]
    q = state[5]
    t_off = state[6]
    pulses = state[7]

    e_in = energy[0]
    e_fric = energy[1]
    e_visc = energy[2]
    e_pot = energy[3]

    n_intervals = len(volts)
    n_log = 0
    n_edge = 0

    # initial sample
    log_t[n_log] = t
    log_x[n_log] = x
    log_vb[n_log] = vb
    log_s[n_log] = s
    log_vs[n_log] = vs
    log_volt[n_log] = volts[0] if n_intervals > 0 else 0.0
    log_q[n_log] = q
    n_log += 1
    next_log = t + log_dt

    for i in range(n_intervals + 1):
        # boundary bookkeeping (entering edge i)
        if fallings[i]:
            pulses += 1.0
            t_off = 0.0
        if risings[i]:
            edge_t[n_edge] = bounds[i]
            edge_x[n_edge] = x
            n_edge += 1
        if i == n_intervals:
            break

        a = bounds[i]
        b = bounds[i + 1]
        span = b - a
        if span <= 0.0:
            continue
        n_steps = int(span / dt_target - 1e-9) + 1
        h = span / n_steps
        volt = volts[i]
        on = ons[i]

        for _k in range(n_steps):
            v_rel = vs - vb
            f_act = act_coeff * volt * volt if s < s_stroke else 0.0
            f_damp = -c_damp * v_rel - c_damp2 * abs(v_rel) * v_rel
            if on:
                q = 1.0
            elif tau > 0.0:
                q = exp(-t_off / tau)
            else:
                q = 0.0
            hold = 1.0 - hold_gain * q
            if hold < 0.0:
                hold = 0.0
            f_reflux = -reflux_k * s * hold
            if s > s_max:
                f_stop = -k_es * (s - s_max) - c_es * v_rel
                if f_stop > 0.0:
                    f_stop = 0.0
            elif s < 0.0:
                f_stop = -k_es * s - c_es * v_rel
                if f_stop < 0.0:
                    f_stop = 0.0
            else:
                f_stop = 0.0
            f_slug = f_act + f_damp + f_reflux + f_stop
            f_drag = -drag_c * abs(vb) * vb
            f_other = -f_slug + f_drag

            snapped = False
            if vb > v_stick or vb < -v_stick:
                f_fric = -mu_d * n_force if vb > 0.0 else mu_d * n_force
            else:
                limit = mu_s * n_force
                if f_other > limit:
                    f_fric = -limit
                elif f_other < -limit:
                    f_fric = limit
                else:
                    f_fric = -f_other
                    snapped = True

            vs1 = vs + h * (f_slug / m_slug)
            vb1 = vb + h * ((f_other + f_fric) / m_body)
            if snapped:
                vb1 = 0.0
            elif (vb > 0.0 and vb1 < 0.0) or (vb < 0.0 and vb1 > 0.0):
                # a sliding body stops at the zero crossing when static
                # friction can hold it there; otherwise it passes through
                limit = mu_s * n_force
                if -limit <= f_other <= limit:
                    vb1 = 0.0

            vs_mid = 0.5 * (vs + vs1)
            vb_mid = 0.5 * (vb + vb1)
            rel_mid = vs_mid - vb_mid
            e_in += f_act * rel_mid * h
            e_visc += -(f_damp * rel_mid * h) - (f_stop * rel_mid * h) - (f_drag * vb_mid * h)
            e_pot += -(f_reflux * rel_mid * h)
            fric_impulse = m_body * (vb1 - vb) - f_other * h
            e_fric += -(fric_impulse * vb_mid)

            x = x + h * vb1
            s1 = s + h * (vs1 - vb1)
            if s1 > s_hi:
                s1 = s_hi
                e_visc += 0.5 * m_slug * (vs1 * vs1 - vb1 * vb1)
                vs1 = vb1
            elif s1 < s_lo:
                s1 = s_lo
                e_visc += 0.5 * m_slug * (vs1 * vs1 - vb1 * vb1)
                vs1 = vb1
            s = s1
            vs = vs1
            vb = vb1
            t = t + h
            if not on:
                t_off = t_off + h

            if t >= next_log - 1e-12:
                if on:
                    q = 1.0
                elif tau > 0.0:
                    q = exp(-t_off / tau)
                else:
                    q = 0.0
                log_t[n_log] = t
                log_x[n_log] = x
                log_vb[n_log] = vb
                log_s[n_log] = s
                log_vs[n_log] = vs
                log_volt[n_log] = volt
                log_q[n_log] = q
                n_log += 1
                while next_log <= t + 1e-12:
                    next_log = next_log + log_dt

        t = b  # land exactly on the boundary

    if log_t[n_log - 1] < t:
        log_t[n_log] = t
        log_x[n_log] = x
        log_vb[n_log] = vb
        log_s[n_log] = s
        log_vs[n_log] = vs
        log_volt[n_log] = volts[n_intervals - 1] if n_intervals > 0 else 0.0
        log_q[n_log] = q
        n_log += 1

    state[0] = t
    state[1] = x
    state[2] = vb
    state[3] = s
    state[4] = vs
    state[5] = q
    state[6] = t_off
    state[7] = pulses

    energy[0] = e_in
    energy[1] = e_fric
    energy[2] = e_visc
    energy[3] = e_pot

    return n_log, n_edge
