"""Independent reference implementations used only by the tests.

Written in plain scalar Python from the textbook definitions, so they share
no code paths with the package.
"""
import math
from fractions import Fraction


def _sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def naive_lstm(w_ih, w_hh, b_ih, b_hh, xs):
    """Per-scalar LSTM with packed gate rows (i, f, g, o), zero initial state."""
    hidden = len(w_hh[0])
    h = [0.0] * hidden
    c = [0.0] * hidden
    outputs = []
    for x in xs:
        pre = []
        for r in range(4 * hidden):
            acc = b_ih[r] + b_hh[r]
            for d, xv in enumerate(x):
                acc += w_ih[r][d] * xv
            for j, hv in enumerate(h):
                acc += w_hh[r][j] * hv
            pre.append(acc)
        new_h, new_c = [], []
        for u in range(hidden):
            i = _sigmoid(pre[u])
            f = _sigmoid(pre[hidden + u])
            g = math.tanh(pre[2 * hidden + u])
            o = _sigmoid(pre[3 * hidden + u])
            cu = f * c[u] + i * g
            new_c.append(cu)
            new_h.append(o * math.tanh(cu))
        h, c = new_h, new_c
        outputs.append(list(h))
    return outputs


def all_edit_paths(ref, hyp):
    """Every monotone alignment path as ``(errors, ops)``, no pruning.

    ``ops`` uses '=' match, 'S', 'D', 'I'.
    """
    out = []

    def walk(i, j, ops):
        if i == len(ref) and j == len(hyp):
            out.append((sum(o != "=" for o in ops), tuple(ops)))
            return
        if i < len(ref) and j < len(hyp):
            walk(i + 1, j + 1, ops + ["=" if ref[i] == hyp[j] else "S"])
        if i < len(ref):
            walk(i + 1, j, ops + ["D"])
        if j < len(hyp):
            walk(i, j + 1, ops + ["I"])

    walk(0, 0, [])
    return out


_RANK = {"=": 0, "S": 0, "D": 1, "I": 2}


def preferred_min_path(ref, hyp):
    """Minimum-error path chosen by the end-first preference diagonal < deletion < insertion."""
    paths = all_edit_paths(ref, hyp)
    low = min(e for e, _ in paths)
    best = min((ops for e, ops in paths if e == low), key=lambda ops: [_RANK[o] for o in reversed(ops)])
    return low, best


def all_path_min_errors(ref, hyp):
    """Plain enumeration of every edit path (no memo) returning the minimum error count."""
    def walk(i, j):
        if i == len(ref) and j == len(hyp):
            return 0
        costs = []
        if i < len(ref) and j < len(hyp):
            costs.append((ref[i] != hyp[j]) + walk(i + 1, j + 1))
        if i < len(ref):
            costs.append(1 + walk(i + 1, j))
        if j < len(hyp):
            costs.append(1 + walk(i, j + 1))
        return min(costs)
    return walk(0, 0)


def exact_pad_length(n, rate, min_duration):
    """Repeat-pad output length computed with exact rationals."""
    needed = Fraction(min_duration).limit_denominator(10**6) * rate
    copies = max(1, math.ceil(needed / n))
    return copies * n
