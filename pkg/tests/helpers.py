"""Independent oracles used by the tests.

Everything here is deliberately naive (python loops, direct formulas) and
shares no code with the implementation paths it checks.
"""

from __future__ import annotations

import numpy as np

from wbclab.model import forward_batch, parameters


def brute_force_prf(y_true, y_pred, C):
    """Per-class (precision, recall, f1) via explicit sample loops."""
    precision, recall, f1 = [], [], []
    for c in range(C):
        tp = fp = fn = 0
        for t, p in zip(y_true, y_pred):
            if p == c and t == c:
                tp += 1
            elif p == c and t != c:
                fp += 1
            elif p != c and t == c:
                fn += 1
        prec = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        rec = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f = 2 * prec * rec / (prec + rec) if (prec + rec) > 0 else 0.0
        precision.append(prec)
        recall.append(rec)
        f1.append(f)
    return precision, recall, f1


def brute_force_macro_f1(y_true, y_pred, C):
    _, _, f1 = brute_force_prf(y_true, y_pred, C)
    return sum(f1) / C


def finite_diff_grads(model, feats, loss_fn, h=1e-5):
    """Central finite differences of loss_fn() w.r.t. every model parameter.

    loss_fn must be a closure over the (mutable) model so that poking a
    parameter in place changes the next evaluation.
    """
    grads = {}
    for name, p in parameters(model).items():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            lp = loss_fn()
            p[idx] = orig - h
            lm = loss_fn()
            p[idx] = orig
            g[idx] = (lp - lm) / (2.0 * h)
        grads[name] = g
    return grads


def max_rel_error(analytic, numeric, floor=1e-4):
    """Max over parameters of |a - n| / max(floor, |a|, |n|)."""
    worst = 0.0
    for name in analytic:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(floor, np.maximum(np.abs(a), np.abs(n)))
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def frozen_mask_loss(model, feats, value_fn, masks):
    """Closure evaluating value_fn on a forward pass with replayed dropout masks."""
    def loss_fn():
        logits, _ = forward_batch(model, feats, mode="train", masks=masks)
        return value_fn(logits)
    return loss_fn


def exhaustive_pair_search(primary_labels, a1_labels, a2_labels, y_true, C):
    """All ordered pairs whose lone application strictly improves macro F1.

    Returns {(src, dst): (delta, support)} computed with the brute-force F1.
    """
    primary_labels = list(primary_labels)
    a1_labels = list(a1_labels)
    a2_labels = list(a2_labels)
    y_true = list(y_true)
    base = brute_force_macro_f1(y_true, primary_labels, C)
    found = {}
    for src in range(C):
        for dst in range(C):
            if src == dst:
                continue
            trial = []
            support = 0
            for p, x1, x2 in zip(primary_labels, a1_labels, a2_labels):
                if p == src and x1 == dst and x2 == dst:
                    trial.append(dst)
                    support += 1
                else:
                    trial.append(p)
            if support == 0:
                continue
            delta = brute_force_macro_f1(y_true, trial, C) - base
            if delta > 0:
                found[(src, dst)] = (delta, support)
    return found
