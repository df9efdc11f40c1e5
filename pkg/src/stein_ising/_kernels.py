"""Numba inner loops for the Monte Carlo engine.

All kernels take a ``numpy.random.Generator`` and consume it in a fixed
order, so trajectories are reproducible from the stream alone.  Interactions
arrive either as a uniform coupling constant (complete-graph models, O(1)
field updates via the running spin sum) or as CSR arrays (graph models,
O(degree) field updates).  The ``restricted`` flag applies the global spin
flip whenever an update takes the configuration below zero total spin.
"""

import numpy as np
from numba import njit

KERNEL_OPTS = dict(cache=True, nogil=True)


@njit(inline="always")
def _site_field(spins, i, s, is_uniform, c, indptr, indices, weights):
    if is_uniform:
        return c * (s - spins[i])
    acc = 0.0
    for k in range(indptr[i], indptr[i + 1]):
        acc += weights[k] * spins[indices[k]]
    return acc


@njit(inline="always")
def _flip_all(spins):
    for j in range(spins.shape[0]):
        spins[j] = -spins[j]


@njit(**KERNEL_OPTS)
def advance(spins, s, steps, restricted, is_uniform, c, indptr, indices, weights, gen):
    """Advance one chain by ``steps`` single-site updates; returns the spin sum."""
    n = spins.shape[0]
    for _ in range(steps):
        i = gen.integers(0, n)
        f = _site_field(spins, i, s, is_uniform, c, indptr, indices, weights)
        p = 0.5 * (1.0 + np.tanh(f))
        new = 1 if gen.random() < p else -1
        s += new - spins[i]
        spins[i] = new
        if restricted and s < 0:
            _flip_all(spins)
            s = -s
    return s


@njit(**KERNEL_OPTS)
def sample_spins(spins, s, burn, thin, num, restricted,
                 is_uniform, c, indptr, indices, weights, gen, out):
    """Record ``num`` spin snapshots, one every ``thin`` updates after burn-in."""
    n = spins.shape[0]
    s = advance(spins, s, burn, restricted, is_uniform, c, indptr, indices, weights, gen)
    for row in range(num):
        s = advance(spins, s, thin, restricted, is_uniform, c, indptr, indices, weights, gen)
        for j in range(n):
            out[row, j] = spins[j]
    return s


@njit(**KERNEL_OPTS)
def sample_sums(spins, s, burn, thin, num, restricted,
                is_uniform, c, indptr, indices, weights, gen, out):
    """Record ``num`` spin sums, one every ``thin`` updates after burn-in."""
    s = advance(spins, s, burn, restricted, is_uniform, c, indptr, indices, weights, gen)
    for row in range(num):
        s = advance(spins, s, thin, restricted, is_uniform, c, indptr, indices, weights, gen)
        out[row] = s
    return s


@njit(**KERNEL_OPTS)
def moment_batches(spins, s, batches, batch_len, restricted,
                   is_uniform, c, indptr, indices, weights, gen,
                   subset_of_site_ptr, subset_of_site, prod, out):
    """Exact per-update time averages of subset spin products, in batches.

    ``prod[q]`` must hold the product of subset ``q`` at the *current*
    spins (so burn-in must happen before products are taken); subsets
    have even size, so the restricted global flip never touches them.
    Products are integrated event-wise: a flip of site ``i`` closes the
    integration window of every subset containing ``i``.  ``out`` is
    (batches, m).
    """
    n = spins.shape[0]
    m = prod.shape[0]
    last = np.zeros(m, dtype=np.int64)
    acc = np.zeros(m, dtype=np.float64)
    for b in range(batches):
        for q in range(m):
            last[q] = 0
            acc[q] = 0.0
        for t in range(batch_len):
            i = gen.integers(0, n)
            f = _site_field(spins, i, s, is_uniform, c, indptr, indices, weights)
            p = 0.5 * (1.0 + np.tanh(f))
            new = 1 if gen.random() < p else -1
            if new != spins[i]:
                s += new - spins[i]
                spins[i] = new
                for k in range(subset_of_site_ptr[i], subset_of_site_ptr[i + 1]):
                    q = subset_of_site[k]
                    acc[q] += prod[q] * (t - last[q])
                    prod[q] = -prod[q]
                    last[q] = t
                if restricted and s < 0:
                    _flip_all(spins)
                    s = -s
        for q in range(m):
            acc[q] += prod[q] * (batch_len - last[q])
            out[b, q] = acc[q] / batch_len
    return s


@njit(**KERNEL_OPTS)
def energy_gap_batches(spins, s, burn, batches, batch_len, restricted,
                       is_uniform, c, indptr, indices, weights,
                       is_uniform2, c2, indptr2, indices2, weights2,
                       gen, out):
    """Batch means of ``H_1(x) - H_2(x)`` along a chain driven by model 1.

    The gap is updated incrementally per accepted flip and re-derived
    exactly at every batch boundary to kill float drift.  The global flip
    leaves both quadratic energies unchanged.
    """
    n = spins.shape[0]
    s = advance(spins, s, burn, restricted, is_uniform, c, indptr, indices, weights, gen)
    for b in range(batches):
        gap = 0.0
        for i in range(n):
            f1 = _site_field(spins, i, s, is_uniform, c, indptr, indices, weights)
            f2 = _site_field(spins, i, s, is_uniform2, c2, indptr2, indices2, weights2)
            gap += 0.5 * spins[i] * (f1 - f2)
        total = 0.0
        for _ in range(batch_len):
            i = gen.integers(0, n)
            f1 = _site_field(spins, i, s, is_uniform, c, indptr, indices, weights)
            p = 0.5 * (1.0 + np.tanh(f1))
            new = 1 if gen.random() < p else -1
            if new != spins[i]:
                f2 = _site_field(spins, i, s, is_uniform2, c2, indptr2, indices2, weights2)
                gap += (new - spins[i]) * (f1 - f2)
                s += new - spins[i]
                spins[i] = new
                if restricted and s < 0:
                    _flip_all(spins)
                    s = -s
            total += gap
        out[b] = total / batch_len
    return s


@njit(**KERNEL_OPTS)
def coupled_run(x, y, sx, sy, steps, restricted,
                is_uniform, c, indptr, indices, weights, gen,
                check_every, stop_on_coalesce, track_order, s1_sum, tau1_in):
    """Advance two chains under the shared (site, uniform) threshold rule.

    Returns ``(sx, sy, coalesced_at, tau1, order_violation_at, t_done)``
    with -1 for events that did not happen.  ``tau1`` is the first update
    at which the y-chain's spin sum equals ``s1_sum`` (pass ``tau1_in``
    from a previous segment to keep it sticky).  Order tracking flags the
    first update after which ``x >= y`` fails entrywise; it stops at the
    first global flip, which lawfully breaks order.
    """
    n = x.shape[0]
    coalesced = -1
    violation = -1
    tau1 = tau1_in
    equal = True
    for j in range(n):
        if x[j] != y[j]:
            equal = False
            break
    if equal:
        coalesced = 0
        if stop_on_coalesce:
            return sx, sy, coalesced, tau1, violation, 0
    t = 0
    for t in range(1, steps + 1):
        i = gen.integers(0, n)
        u = gen.random()
        fx = _site_field(x, i, sx, is_uniform, c, indptr, indices, weights)
        fy = _site_field(y, i, sy, is_uniform, c, indptr, indices, weights)
        px = 0.5 * (1.0 + np.tanh(fx))
        py = 0.5 * (1.0 + np.tanh(fy))
        newx = 1 if u < px else -1
        newy = 1 if u < py else -1
        sx += newx - x[i]
        sy += newy - y[i]
        x[i] = newx
        y[i] = newy
        if restricted:
            if sx < 0:
                _flip_all(x)
                sx = -sx
                track_order = False
            if sy < 0:
                _flip_all(y)
                sy = -sy
                track_order = False
        if tau1 < 0 and sy == s1_sum:
            tau1 = t
        if track_order and violation < 0:
            for j in range(n):
                if x[j] < y[j]:
                    violation = t
                    break
        if coalesced < 0 and t % check_every == 0:
            same = True
            for j in range(n):
                if x[j] != y[j]:
                    same = False
                    break
            if same:
                coalesced = t
                if stop_on_coalesce:
                    break
    return sx, sy, coalesced, tau1, violation, t


@njit(**KERNEL_OPTS)
def contraction_trials(n, c, trials, checkpoints, s1_sum, start, site,
                       restricted, gen, out_d, out_tau, out_coal):
    """Monte Carlo for the stopped magnetization-gap contraction bound.

    Each trial couples the restricted complete-graph chains started from
    ``start`` with site ``site`` forced to +1 (x) and -1 (y), using the
    shared threshold rule, and records ``(m(X_t) - m(Y_t)) * 1[t <= tau1]``
    at each checkpoint, where ``tau1`` is the first time the y-chain's spin
    sum hits ``s1_sum``.  Coalesced pairs contribute 0 from then on.
    """
    horizon = checkpoints[-1]
    num_checks = checkpoints.shape[0]
    empty_i = np.empty(0, dtype=np.int64)
    empty_w = np.empty(0, dtype=np.float64)
    x = np.empty(n, dtype=np.int8)
    y = np.empty(n, dtype=np.int8)
    for trial in range(trials):
        for j in range(n):
            x[j] = start[j]
            y[j] = start[j]
        x[site] = 1
        y[site] = -1
        sx = 0
        sy = 0
        for j in range(n):
            sx += x[j]
            sy += y[j]
        tau1 = np.int64(-1)
        coal = np.int64(-1)
        ck = 0
        for t in range(1, horizon + 1):
            i = gen.integers(0, n)
            u = gen.random()
            fx = c * (sx - x[i])
            fy = c * (sy - y[i])
            px = 0.5 * (1.0 + np.tanh(fx))
            py = 0.5 * (1.0 + np.tanh(fy))
            newx = 1 if u < px else -1
            newy = 1 if u < py else -1
            sx += newx - x[i]
            sy += newy - y[i]
            x[i] = newx
            y[i] = newy
            if restricted:
                if sx < 0:
                    _flip_all(x)
                    sx = -sx
                if sy < 0:
                    _flip_all(y)
                    sy = -sy
            if tau1 < 0 and sy == s1_sum:
                tau1 = t
            if coal < 0 and sx == sy and t % n == 0:
                same = True
                for j in range(n):
                    if x[j] != y[j]:
                        same = False
                        break
                if same:
                    coal = t
            while ck < num_checks and t == checkpoints[ck]:
                if tau1 >= 0 and tau1 < t:
                    out_d[trial, ck] = 0.0
                else:
                    out_d[trial, ck] = (sx - sy) / n
                ck += 1
        out_tau[trial] = tau1
        out_coal[trial] = coal
    return 0


@njit(**KERNEL_OPTS)
def birth_death_hits(r, alpha, start, runs, gen, out_hit, out_steps):
    """Gambler's ruin on {0..r-1}: up with probability 1/(1+alpha).

    Absorbs at 0 and r-1; records whether the top was hit first and after
    how many steps.
    """
    p_up = 1.0 / (1.0 + alpha)
    for run in range(runs):
        state = start
        steps = 0
        while 0 < state < r - 1:
            if gen.random() < p_up:
                state += 1
            else:
                state -= 1
            steps += 1
        out_hit[run] = state == r - 1
        out_steps[run] = steps
    return 0


@njit(**KERNEL_OPTS)
def birth_death_bottom_times(r, alpha, start, runs, horizon, gen, out_time):
    """First time the reflected chain hits state 0 (horizon+1 if censored).

    The top state r-1 holds in place instead of moving up, matching the
    comparison chain's boundary rule.
    """
    p_up = 1.0 / (1.0 + alpha)
    for run in range(runs):
        state = start
        hit = horizon + 1
        for t in range(1, horizon + 1):
            if gen.random() < p_up:
                if state < r - 1:
                    state += 1
            else:
                state -= 1
            if state == 0:
                hit = t
                break
        out_time[run] = hit
    return 0
