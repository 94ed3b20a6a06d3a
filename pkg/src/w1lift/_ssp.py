"""Successive-shortest-path kernel for the dense transportation problem.

Kept separate so it can be compiled with numba; the pure-Python body is the
reference and is what runs when numba is unavailable.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

ZERO = 1e-15


@njit(cache=True)
def ssp_transport(supply, demand, cost):
    """Min-cost transport of ``supply`` onto ``demand`` (equal totals).

    Dijkstra on reduced costs from every source with remaining supply; ties
    are broken by lowest node index (sources before sinks). Returns the flow
    matrix and the node potentials ``(pu, pv)`` certifying optimality:
    ``cost[i, j] + pu[i] - pv[j] >= 0`` everywhere, with equality on the
    flow support.
    """
    m = supply.shape[0]
    n = demand.shape[0]
    flow = np.zeros((m, n))
    pu = np.zeros(m)
    pv = np.zeros(n)
    a = supply.copy()
    b = demand.copy()
    inf = np.inf
    du = np.empty(m)
    dv = np.empty(n)
    done_u = np.empty(m, dtype=np.bool_)
    done_v = np.empty(n, dtype=np.bool_)
    prev_v = np.empty(n, dtype=np.int64)  # source feeding sink j on the tree
    prev_u = np.empty(m, dtype=np.int64)  # sink feeding source i via a reverse arc
    for _ in range(4 * (m + n) * (m + n) + 16):
        remaining = 0.0
        for i in range(m):
            if a[i] > ZERO:
                remaining += a[i]
        if remaining <= ZERO:
            break
        for i in range(m):
            done_u[i] = False
            prev_u[i] = -1
            du[i] = 0.0 if a[i] > ZERO else inf
        for j in range(n):
            done_v[j] = False
            prev_v[j] = -1
            dv[j] = inf
        target = -1
        while True:
            best = inf
            kind = -1
            idx = -1
            for i in range(m):
                if not done_u[i] and du[i] < best:
                    best = du[i]
                    kind = 0
                    idx = i
            for j in range(n):
                if not done_v[j] and dv[j] < best:
                    best = dv[j]
                    kind = 1
                    idx = j
            if kind < 0:
                break
            if kind == 0:
                done_u[idx] = True
                base = du[idx] + pu[idx]
                for j in range(n):
                    if not done_v[j]:
                        nd = base + cost[idx, j] - pv[j]
                        if nd < dv[j]:
                            dv[j] = nd
                            prev_v[j] = idx
            else:
                done_v[idx] = True
                if b[idx] > ZERO:
                    target = idx
                    break
                for i in range(m):
                    if not done_u[i] and flow[i, idx] > ZERO:
                        r = cost[i, idx] + pu[i] - pv[idx]
                        nd = dv[idx] - r if r < 0.0 else dv[idx]
                        if nd < du[i]:
                            du[i] = nd
                            prev_u[i] = idx
        if target < 0:
            break
        reach = dv[target]
        for i in range(m):
            pu[i] += du[i] if du[i] < reach else reach
        for j in range(n):
            pv[j] += dv[j] if dv[j] < reach else reach
        # bottleneck along the alternating path back to a source with supply
        delta = b[target]
        j = target
        while True:
            i = prev_v[j]
            if prev_u[i] < 0:
                if a[i] < delta:
                    delta = a[i]
                break
            j = prev_u[i]
            if flow[i, j] < delta:
                delta = flow[i, j]
        j = target
        while True:
            i = prev_v[j]
            flow[i, j] += delta
            if prev_u[i] < 0:
                a[i] -= delta
                break
            j2 = prev_u[i]
            flow[i, j2] -= delta
            if flow[i, j2] < ZERO:
                flow[i, j2] = 0.0
            j = j2
        b[target] -= delta
    return flow, pu, pv
