"""Network simplex kernel for the dense transportation problem.

Spanning-tree bookkeeping follows the thread/successor representation of
LEMON's ``NetworkSimplex`` (block-search pivoting, strongly feasible trees).
Arc ``e < n*m`` goes from supply node ``e // m`` to demand node ``n + e % m``;
arcs ``n*m + u`` are the artificial arcs joining node ``u`` to the root.
"""

import numpy as np
from numba import njit

STATE_TREE = 0
STATE_LOWER = 1

DIR_UP = 1
DIR_DOWN = -1


@njit(cache=True, nogil=True)
def network_simplex(cost, supply, demand, tol, max_iter):
    """Solve min <C, F> over transport plans with marginals ``supply``/``demand``.

    ``cost`` is the row-major flattened n x m matrix. Returns
    ``(flow, pi, n_iter, status)`` where ``flow`` has n*m entries, ``pi`` has
    one potential per node (supply nodes first) and status is 0 on optimality,
    1 when ``max_iter`` was hit.
    """
    n = supply.shape[0]
    m = demand.shape[0]
    n_arcs = n * m
    node_num = n + m
    root = node_num

    max_cost = 0.0
    for e in range(n_arcs):
        if cost[e] > max_cost:
            max_cost = cost[e]
    art_c = (max_cost + 1.0) * node_num

    flow = np.zeros(n_arcs, dtype=np.float64)
    state = np.ones(n_arcs, dtype=np.int8)
    art_flow = np.empty(node_num, dtype=np.float64)

    parent = np.empty(node_num + 1, dtype=np.int64)
    pred = np.empty(node_num + 1, dtype=np.int64)
    pred_dir = np.empty(node_num + 1, dtype=np.int64)
    thread = np.empty(node_num + 1, dtype=np.int64)
    rev_thread = np.empty(node_num + 1, dtype=np.int64)
    succ_num = np.empty(node_num + 1, dtype=np.int64)
    last_succ = np.empty(node_num + 1, dtype=np.int64)
    pi = np.empty(node_num + 1, dtype=np.float64)
    dirty_revs = np.empty(node_num + 1, dtype=np.int64)

    parent[root] = -1
    pred[root] = -1
    thread[root] = 0
    rev_thread[0] = root
    succ_num[root] = node_num + 1
    last_succ[root] = root - 1
    pi[root] = 0.0

    for u in range(node_num):
        e = u
        parent[u] = root
        pred[u] = n_arcs + e
        thread[u] = u + 1
        rev_thread[u + 1] = u
        succ_num[u] = 1
        last_succ[u] = u
        if u < n:
            pred_dir[u] = DIR_UP
            pi[u] = 0.0
            art_flow[e] = supply[u]
        else:
            pred_dir[u] = DIR_DOWN
            pi[u] = art_c
            art_flow[e] = demand[u - n]

    block_size = max(int(np.sqrt(n_arcs)), 10)
    next_arc = 0
    n_iter = 0
    status = 0

    while True:
        # entering arc: block search over real arcs only
        in_arc = -1
        min_rc = -tol
        cnt = block_size
        e = next_arc
        found = False
        scanned = 0
        while scanned < n_arcs:
            if state[e] != STATE_TREE:
                i = e // m
                j = n + e % m
                c = cost[e] + pi[i] - pi[j]
                if c < min_rc:
                    min_rc = c
                    in_arc = e
            scanned += 1
            e += 1
            if e == n_arcs:
                e = 0
            cnt -= 1
            if cnt == 0:
                if in_arc >= 0:
                    found = True
                    break
                cnt = block_size
        if in_arc < 0:
            break
        if not found:
            e = in_arc
        next_arc = e

        if n_iter >= max_iter:
            status = 1
            break
        n_iter += 1

        # join node of the cycle
        u_src = in_arc // m
        v_tgt = n + in_arc % m
        a = u_src
        b = v_tgt
        while a != b:
            if succ_num[a] < succ_num[b]:
                a = parent[a]
            else:
                b = parent[b]
        join = a

        # leaving arc (uncapacitated: only decreasing tree arcs limit delta)
        first = u_src
        second = v_tgt
        delta = np.inf
        result = 0
        u_out = -1
        u = first
        while u != join:
            if pred_dir[u] == DIR_UP:
                pe = pred[u]
                d = flow[pe] if pe < n_arcs else art_flow[pe - n_arcs]
                if d < delta:
                    delta = d
                    u_out = u
                    result = 1
            u = parent[u]
        u = second
        while u != join:
            if pred_dir[u] == DIR_DOWN:
                pe = pred[u]
                d = flow[pe] if pe < n_arcs else art_flow[pe - n_arcs]
                if d <= delta:
                    delta = d
                    u_out = u
                    result = 2
            u = parent[u]
        if result == 1:
            u_in = first
            v_in = second
        else:
            u_in = second
            v_in = first

        # augment
        if delta > 0.0:
            flow[in_arc] += delta
            u = u_src
            while u != join:
                pe = pred[u]
                if pe < n_arcs:
                    flow[pe] -= pred_dir[u] * delta
                else:
                    art_flow[pe - n_arcs] -= pred_dir[u] * delta
                u = parent[u]
            u = v_tgt
            while u != join:
                pe = pred[u]
                if pe < n_arcs:
                    flow[pe] += pred_dir[u] * delta
                else:
                    art_flow[pe - n_arcs] += pred_dir[u] * delta
                u = parent[u]
        state[in_arc] = STATE_TREE
        pe = pred[u_out]
        if pe < n_arcs:
            state[pe] = STATE_LOWER
            flow[pe] = 0.0
        else:
            art_flow[pe - n_arcs] = 0.0

        # tree structure update
        old_rev_thread = rev_thread[u_out]
        old_succ_num = succ_num[u_out]
        old_last_succ = last_succ[u_out]
        v_out = parent[u_out]

        if u_in == u_out:
            parent[u_in] = v_in
            pred[u_in] = in_arc
            pred_dir[u_in] = DIR_UP if u_in == u_src else DIR_DOWN
            if thread[v_in] != u_out:
                after = thread[old_last_succ]
                thread[old_rev_thread] = after
                rev_thread[after] = old_rev_thread
                after = thread[v_in]
                thread[v_in] = u_out
                rev_thread[u_out] = v_in
                thread[old_last_succ] = after
                rev_thread[after] = old_last_succ
        else:
            if old_rev_thread == v_in:
                thread_continue = thread[old_last_succ]
            else:
                thread_continue = thread[v_in]
            stem = u_in
            par_stem = v_in
            last = last_succ[u_in]
            after = thread[last]
            thread[v_in] = u_in
            n_dirty = 0
            dirty_revs[n_dirty] = v_in
            n_dirty += 1
            while stem != u_out:
                next_stem = parent[stem]
                thread[last] = next_stem
                dirty_revs[n_dirty] = last
                n_dirty += 1
                before = rev_thread[stem]
                thread[before] = after
                rev_thread[after] = before
                parent[stem] = par_stem
                par_stem = stem
                stem = next_stem
                if last_succ[stem] == last_succ[par_stem]:
                    last = rev_thread[par_stem]
                else:
                    last = last_succ[stem]
                after = thread[last]
            parent[u_out] = par_stem
            thread[last] = thread_continue
            rev_thread[thread_continue] = last
            last_succ[u_out] = last
            if old_rev_thread != v_in:
                thread[old_rev_thread] = after
                rev_thread[after] = old_rev_thread
            for k in range(n_dirty):
                w = dirty_revs[k]
                rev_thread[thread[w]] = w
            tmp_sc = 0
            tmp_ls = last_succ[u_out]
            u = u_out
            p = parent[u]
            while u != u_in:
                pred[u] = pred[p]
                pred_dir[u] = -pred_dir[p]
                tmp_sc += succ_num[u] - succ_num[p]
                succ_num[u] = tmp_sc
                last_succ[p] = tmp_ls
                u = p
                p = parent[u]
            pred[u_in] = in_arc
            pred_dir[u_in] = DIR_UP if u_in == u_src else DIR_DOWN
            succ_num[u_in] = old_succ_num

        up_limit_out = join if last_succ[join] == v_in else -1
        last_succ_out = last_succ[u_out]
        u = v_in
        while u != -1 and last_succ[u] == v_in:
            last_succ[u] = last_succ_out
            u = parent[u]
        if join != old_rev_thread and v_in != old_rev_thread:
            u = v_out
            while u != up_limit_out and last_succ[u] == old_last_succ:
                last_succ[u] = old_rev_thread
                u = parent[u]
        elif last_succ_out != old_last_succ:
            u = v_out
            while u != up_limit_out and last_succ[u] == old_last_succ:
                last_succ[u] = last_succ_out
                u = parent[u]
        u = v_in
        while u != join:
            succ_num[u] += old_succ_num
            u = parent[u]
        u = v_out
        while u != join:
            succ_num[u] -= old_succ_num
            u = parent[u]

        # potentials of the re-hung subtree
        sigma = pi[v_in] - pi[u_in] - pred_dir[u_in] * cost[in_arc]
        end = thread[last_succ[u_in]]
        u = u_in
        while u != end:
            pi[u] += sigma
            u = thread[u]

    return flow, pi[:node_num].copy(), n_iter, status
