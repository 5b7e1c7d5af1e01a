"""Pure-Python kernels; same signatures and semantics as the compiled ``_core``.

Inputs are numpy arrays prepared by :mod:`platoon_match.accel`. Departure
times are compact indices into the scenario's sorted distinct default times.
Comparisons use an absolute tolerance of ``EPS`` so that float rounding never
breaks a tie that is exact in rational arithmetic.
"""

EPS = 1e-9

EVEN_OUT = 0
SCORE = 1
COOPERATIVE = 2


def _option_value(model, i, t, profile, counts, pen, rl, rf, beta, score, gap):
    n = counts[t] + 1 - (1 if profile[i] == t else 0)
    if model == EVEN_OUT:
        if n > 1:
            return (rl[i] + (n - 1) * rf[i]) / n - pen
        return -pen
    if model == SCORE:
        if n <= 1:
            return -pen
        lowest = True
        for k in range(len(profile)):
            if k != i and profile[k] == t and score[k] < score[i]:
                lowest = False
                break
        if lowest:
            return rl[i] - pen + beta[i] * (n - 1) / n
        return rf[i] - pen - beta[i] / n
    # cooperative: change in fleet profit from placing i into the group at t
    m = 0
    sum_rf = 0.0
    min_gap = 0.0
    for k in range(len(profile)):
        if k != i and profile[k] == t:
            if m == 0 or gap[k] < min_gap:
                min_gap = gap[k]
            sum_rf += rf[k]
            m += 1
    if m == 0:
        return -pen
    before = sum_rf - min_gap if m > 1 else 0.0
    after = sum_rf + rf[i] - min(min_gap, gap[i])
    return after - before - pen


def departure_sweep(model, profile, opt_ptr, opt_time, opt_pen, rl, rf, beta, score, n_times):
    """One in-place best-response sweep in vehicle order; returns 1 if anything moved."""
    prof = [int(x) for x in profile]
    ptr = [int(x) for x in opt_ptr]
    times = [int(x) for x in opt_time]
    pens = [float(x) for x in opt_pen]
    rl_ = [float(x) for x in rl]
    rf_ = [float(x) for x in rf]
    beta_ = [float(x) for x in beta]
    score_ = [float(x) for x in score]
    gap = [a - b for a, b in zip(rf_, rl_)]
    counts = [0] * int(n_times)
    for t in prof:
        counts[t] += 1
    changed = 0
    for i in range(len(prof)):
        lo, hi = ptr[i], ptr[i + 1]
        values = [
            _option_value(model, i, times[o], prof, counts, pens[o], rl_, rf_, beta_, score_, gap)
            for o in range(lo, hi)
        ]
        best = max(values)
        current = prof[i]
        choice = current
        cur_value = None
        for o in range(lo, hi):
            if times[o] == current:
                cur_value = values[o - lo]
        if cur_value is None or cur_value < best - EPS:
            for o in range(lo, hi):
                if values[o - lo] >= best - EPS:
                    choice = times[o]
                    break
        if choice != current:
            counts[current] -= 1
            counts[choice] += 1
            prof[i] = choice
            changed = 1
    for i, t in enumerate(prof):
        profile[i] = t
    return changed


def _choice(j, is_seller, price, reach, gain, order):
    best = -1
    best_value = 0.0
    for s in order:
        if is_seller[s] and reach[j][s]:
            v = gain[j][s] - price[s]
            if v > best_value + EPS:
                best = s
                best_value = v
    return best


def buyer_choices(is_seller, price, reach, gain, order, out):
    """Fill ``out[j]`` with the seller index buyer ``j`` follows, ``-1`` otherwise."""
    sel = [int(x) for x in is_seller]
    pr = [float(x) for x in price]
    rc = reach.tolist()
    gn = gain.tolist()
    od = [int(x) for x in order]
    for j in range(len(sel)):
        out[j] = -1 if sel[j] else _choice(j, sel, pr, rc, gn, od)


def market_sweep(is_seller, price, price_idx, grid_ptr, grid_vals, reach, gain, order, rl):
    """One in-place sweep of seller best responses in index order; returns 1 if any price moved."""
    n = len(is_seller)
    sel = [int(x) for x in is_seller]
    pr = [float(x) for x in price]
    pidx = [int(x) for x in price_idx]
    ptr = [int(x) for x in grid_ptr]
    grid = [float(x) for x in grid_vals]
    rc = reach.tolist()
    gn = gain.tolist()
    od = [int(x) for x in order]
    rl_ = [float(x) for x in rl]
    buyers = [j for j in range(n) if not sel[j]]
    changed = 0
    for i in range(n):
        if not sel[i]:
            continue
        candidates = [j for j in buyers if rc[j][i]]
        best_k = -1
        best_value = 0.0
        for k in range(ptr[i], ptr[i + 1]):
            pr[i] = grid[k]
            count = 0
            for j in candidates:
                if _choice(j, sel, pr, rc, gn, od) == i:
                    count += 1
            value = rl_[i] + count * grid[k] if count else 0.0
            if best_k < 0 or value > best_value + EPS:
                best_k = k
                best_value = value
        pr[i] = grid[best_k]
        if best_k != pidx[i]:
            pidx[i] = best_k
            changed = 1
    for i in range(n):
        price[i] = pr[i]
        price_idx[i] = pidx[i]
    return changed
