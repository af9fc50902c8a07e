"""Numeric kernels for the nodal solve and MPC mesh rollouts.

Everything in here operates on the flattened array form of a network (see
``network.NetworkModel.flat``) so the same code serves the scalar simulation
path and the hot mesh-search loop.  Functions are compiled with numba's
``@njit`` by default; setting the environment variable ``AQUAPLAN_NO_NUMBA=1``
before import selects the pure-numpy fallback (identical code, no JIT).
``benchmarks/bench_mesh.py`` compares the two.
"""

import os

import numpy as np

USING_NUMBA = False
if os.environ.get("AQUAPLAN_NO_NUMBA", "0") in ("", "0"):
    try:
        from numba import njit as _njit

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a hard dependency
        pass

if USING_NUMBA:
    def jit(fn):
        return _njit(cache=True)(fn)
else:
    def jit(fn):
        return fn

# Link type codes in the flat representation.
PIPE = 0
VALVE = 1
PRESSURE_PUMP = 2
FLOW_PUMP = 3

# Conversion declared in the interface contract: 1 PSI*GPM = 4.3453e-4 kW.
KW_PER_PSI_GPM = 4.3453e-4


@jit
def _solve_nodal(junc_of_node, fixed_p, tank_of_node,
                 link_type, link_i, link_j, link_param, link_ctrl, ppump_col,
                 n_unknown, demand_node, x, u, f_demand):
    """Solve the linear nodal continuity system.

    Unknowns are junction pressures followed by pressure-pump flows.
    Returns (node pressures, signed link flows, total pump power PSI*GPM).
    """
    n_nodes = junc_of_node.shape[0]
    n_links = link_type.shape[0]

    p = np.zeros(n_nodes)
    for n in range(n_nodes):
        if junc_of_node[n] < 0:
            t = tank_of_node[n]
            p[n] = x[t] if t >= 0 else fixed_p[n]

    a = np.zeros((n_unknown, n_unknown))
    b = np.zeros(n_unknown)
    b[junc_of_node[demand_node]] += f_demand

    for l in range(n_links):
        t = link_type[l]
        i = link_i[l]
        j = link_j[l]
        ri = junc_of_node[i]
        rj = junc_of_node[j]
        if t == PIPE or t == VALVE:
            if t == PIPE:
                g = 1.0 / link_param[l]
            else:
                g = u[link_ctrl[l]]
                if g < 0.0:
                    g = 0.0
                elif g > link_param[l]:
                    g = link_param[l]
            # flow i->j is g*(P_i - P_j); enters j, leaves i
            if rj >= 0:
                if ri >= 0:
                    a[rj, ri] += g
                else:
                    b[rj] -= g * p[i]
                a[rj, rj] -= g
            if ri >= 0:
                if rj >= 0:
                    a[ri, rj] += g
                else:
                    b[ri] -= g * p[j]
                a[ri, ri] -= g
        elif t == PRESSURE_PUMP:
            c = ppump_col[l]
            dp = link_param[l] if link_ctrl[l] < 0 else u[link_ctrl[l]]
            if rj >= 0:
                a[rj, c] += 1.0
            if ri >= 0:
                a[ri, c] -= 1.0
            # constraint row: P_j - P_i = dp
            b[c] += dp
            if rj >= 0:
                a[c, rj] += 1.0
            else:
                b[c] -= p[j]
            if ri >= 0:
                a[c, ri] -= 1.0
            else:
                b[c] += p[i]
        else:  # FLOW_PUMP: prescribed flow i->j
            f = u[link_ctrl[l]]
            if rj >= 0:
                b[rj] -= f
            if ri >= 0:
                b[ri] += f

    z = np.linalg.solve(a, b)

    for n in range(n_nodes):
        if junc_of_node[n] >= 0:
            p[n] = z[junc_of_node[n]]

    flows = np.zeros(n_links)
    power = 0.0
    for l in range(n_links):
        t = link_type[l]
        i = link_i[l]
        j = link_j[l]
        if t == PIPE:
            flows[l] = (p[i] - p[j]) / link_param[l]
        elif t == VALVE:
            g = u[link_ctrl[l]]
            if g < 0.0:
                g = 0.0
            elif g > link_param[l]:
                g = link_param[l]
            flows[l] = g * (p[i] - p[j])
        elif t == PRESSURE_PUMP:
            flows[l] = z[ppump_col[l]]
            power += flows[l] * (p[j] - p[i])
        else:
            flows[l] = u[link_ctrl[l]]
            power += flows[l] * (p[j] - p[i])

    return p, flows, power


@jit
def _tank_net_inflows(tank_of_node, link_i, link_j, flows, n_tanks):
    net = np.zeros(n_tanks)
    for l in range(link_i.shape[0]):
        ti = tank_of_node[link_i[l]]
        tj = tank_of_node[link_j[l]]
        if tj >= 0:
            net[tj] += flows[l]
        if ti >= 0:
            net[ti] -= flows[l]
    return net


@jit
def _node_inflow(node, link_i, link_j, flows):
    """Sum of positive flow entering ``node`` over all links."""
    total = 0.0
    for l in range(link_i.shape[0]):
        f = flows[l]
        if link_j[l] == node and f > 0.0:
            total += f
        elif link_i[l] == node and f < 0.0:
            total -= f
    return total


@jit
def _chlorine_step(yc, volume, inflow, c_in, dt, k_per_min, literal):
    """One explicit-Euler step of the tank chlorine balance."""
    if literal:
        dyc = inflow * c_in - k_per_min * yc
    else:
        dyc = inflow * (c_in - yc) / volume - k_per_min * yc
    out = yc + dt * dyc
    if out < 0.0:
        out = 0.0
    return out


@jit
def _rollout_step(junc_of_node, fixed_p, tank_of_node,
                  link_type, link_i, link_j, link_param, link_ctrl, ppump_col,
                  n_unknown, demand_node, output_node, monitored,
                  x, yc, u, f_demand, phi, c_in,
                  dt, cap, chl_tank, chl_node, k_per_min, literal,
                  yd_sp, yc_sp, lam_c, lam_d, lam_e,
                  x_lo, x_hi, yp_lo, yp_hi):
    """Advance the plant one step under control ``u``.

    Returns (stage cost, y_D, y_E, power, bound violation, x_next, yc_next,
    node pressures, link flows).  The violation is the worst constraint
    overshoot at this step (<= 0 means feasible).
    """
    p, flows, power = _solve_nodal(
        junc_of_node, fixed_p, tank_of_node,
        link_type, link_i, link_j, link_param, link_ctrl, ppump_col,
        n_unknown, demand_node, x, u, f_demand)

    yd = p[output_node]
    total_power = power if power > 0.0 else 0.0
    ye = phi * total_power * KW_PER_PSI_GPM  # kg CO2 per hour

    viol = 0.0
    for m in range(monitored.shape[0]):
        pm = p[monitored[m]]
        if yp_lo - pm > viol:
            viol = yp_lo - pm
        if pm - yp_hi > viol:
            viol = pm - yp_hi

    net = _tank_net_inflows(tank_of_node, link_i, link_j, flows,
                            cap.shape[0])
    x_next = np.empty_like(x)
    for t in range(cap.shape[0]):
        x_next[t] = x[t] + cap[t] * dt * net[t]
        if x_lo[t] - x_next[t] > viol:
            viol = x_lo[t] - x_next[t]
        if x_next[t] - x_hi[t] > viol:
            viol = x_next[t] - x_hi[t]

    volume = x[chl_tank] / cap[chl_tank]
    inflow = _node_inflow(chl_node, link_i, link_j, flows)
    yc_next = _chlorine_step(yc, volume, inflow, c_in, dt, k_per_min, literal)

    ec = yc_sp - yc
    ed = yd_sp - yd
    cost = lam_c * ec * ec + lam_d * ed * ed + lam_e * ye * ye

    return cost, yd, ye, power, viol, x_next, yc_next, p, flows


@jit
def _rollout(junc_of_node, fixed_p, tank_of_node,
             link_type, link_i, link_j, link_param, link_ctrl, ppump_col,
             n_unknown, demand_node, output_node, monitored,
             x0, yc0, u, fd_arr, phi_arr, cin_arr,
             dt, cap, chl_tank, chl_node, k_per_min, literal,
             yd_sp, yc_sp, lam_c, lam_d, lam_e,
             x_lo, x_hi, yp_lo, yp_hi):
    """Hold ``u`` over the horizon and accumulate cost and worst violation."""
    x = x0.copy()
    yc = yc0
    total = 0.0
    worst = 0.0
    for j in range(fd_arr.shape[0]):
        cost, yd, ye, power, viol, x, yc, p, flows = _rollout_step(
            junc_of_node, fixed_p, tank_of_node,
            link_type, link_i, link_j, link_param, link_ctrl, ppump_col,
            n_unknown, demand_node, output_node, monitored,
            x, yc, u, fd_arr[j], phi_arr[j], cin_arr[j],
            dt, cap, chl_tank, chl_node, k_per_min, literal,
            yd_sp, yc_sp, lam_c, lam_d, lam_e,
            x_lo, x_hi, yp_lo, yp_hi)
        total += cost
        if viol > worst:
            worst = viol
    return total, worst


@jit
def _mesh_rollout(mesh,
                  junc_of_node, fixed_p, tank_of_node,
                  link_type, link_i, link_j, link_param, link_ctrl, ppump_col,
                  n_unknown, demand_node, output_node, monitored,
                  x0, yc0, fd_arr, phi_arr, cin_arr,
                  dt, cap, chl_tank, chl_node, k_per_min, literal,
                  yd_sp, yc_sp, lam_c, lam_d, lam_e,
                  x_lo, x_hi, yp_lo, yp_hi):
    """Evaluate every mesh point; returns (costs, worst violations)."""
    m = mesh.shape[0]
    costs = np.empty(m)
    viols = np.empty(m)
    for k in range(m):
        total, worst = _rollout(
            junc_of_node, fixed_p, tank_of_node,
            link_type, link_i, link_j, link_param, link_ctrl, ppump_col,
            n_unknown, demand_node, output_node, monitored,
            x0, yc0, mesh[k], fd_arr, phi_arr, cin_arr,
            dt, cap, chl_tank, chl_node, k_per_min, literal,
            yd_sp, yc_sp, lam_c, lam_d, lam_e,
            x_lo, x_hi, yp_lo, yp_hi)
        costs[k] = total
        viols[k] = worst
    return costs, viols
