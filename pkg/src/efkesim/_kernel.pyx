# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled episode integration kernel.

Statement-for-statement mirror of ``_kernel_py.run_core``; compiled with
-ffp-contract=off so results are bit-identical to the pure-Python kernel
(asserted by the parity tests).  Keep both files in sync.
"""

from libc.math cimport exp, fabs

IMPL = "compiled"


def run_core(
    double[::1] pcfg,
    double[::1] bounds,
    double[::1] volts,
    unsigned char[::1] ons,
    unsigned char[::1] risings,
    unsigned char[::1] fallings,
    double tau,
    double dt_target,
    double log_dt,
    double[::1] state,
    double[::1] log_t,
    double[::1] log_x,
    double[::1] log_vb,
    double[::1] log_s,
    double[::1] log_vs,
    double[::1] log_volt,
    double[::1] log_q,
    double[::1] edge_t,
    double[::1] edge_x,
    double[::1] energy,
):
    cdef double m_slug = pcfg[0]
    cdef double m_body = pcfg[1]
    cdef double s_max = pcfg[2]
    cdef double act_coeff = pcfg[3]
    cdef double c_damp = pcfg[4]
    cdef double reflux_k = pcfg[5]
    cdef double hold_gain = pcfg[6]
    cdef double k_es = pcfg[7]
    cdef double c_es = pcfg[8]
    cdef double mu_s = pcfg[9]
    cdef double mu_d = pcfg[10]
    cdef double n_force = pcfg[11]
    cdef double v_stick = pcfg[12]
    cdef double drag_c = pcfg[13]
    cdef double s_lo = pcfg[14]
    cdef double s_hi = pcfg[15]
    cdef double s_stroke = pcfg[16]
    cdef double c_damp2 = pcfg[17]

    cdef double t = state[0]
    cdef double x = state[1]
    cdef double vb = state[2]
    cdef double s = state[3]
    cdef double vs = state[4]
    cdef double q = state[5]
    cdef double t_off = state[6]
    cdef double pulses = state[7]

    cdef double e_in = energy[0]
    cdef double e_fric = energy[1]
    cdef double e_visc = energy[2]
    cdef double e_pot = energy[3]

    cdef Py_ssize_t n_intervals = volts.shape[0]
    cdef Py_ssize_t n_log = 0
    cdef Py_ssize_t n_edge = 0
    cdef Py_ssize_t i, _k
    cdef long n_steps
    cdef double a, b, span, h, volt, next_log
    cdef double v_rel, f_act, f_damp, hold, f_reflux, f_stop, f_slug, f_drag
    cdef double f_other, f_fric, limit, vs1, vb1, vs_mid, vb_mid, rel_mid
    cdef double fric_impulse, s1
    cdef bint on, snapped

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
        n_steps = <long>(span / dt_target - 1e-9) + 1
        h = span / n_steps
        volt = volts[i]
        on = ons[i]

        for _k in range(n_steps):
            v_rel = vs - vb
            f_act = act_coeff * volt * volt if s < s_stroke else 0.0
            f_damp = -c_damp * v_rel - c_damp2 * fabs(v_rel) * v_rel
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
            f_drag = -drag_c * fabs(vb) * vb
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
