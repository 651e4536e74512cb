"""Central-difference gradient checking shared by unit and acceptance tests."""

import numpy as np


def numeric_gradients(loss_fn, params, eps=1e-5):
    """Central finite differences of loss_fn w.r.t. every parameter element.

    loss_fn must be a pure function of `params` (any randomness inside must
    be re-seeded per call so repeated evaluations agree exactly).
    """
    grads = {}
    for name, tensor in params.items():
        g = np.zeros_like(tensor, dtype=np.float64)
        flat = tensor.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            plus = loss_fn(params)
            flat[i] = orig - eps
            minus = loss_fn(params)
            flat[i] = orig
            gflat[i] = (plus - minus) / (2.0 * eps)
        grads[name] = g
    return grads


def gradient_agreement(analytic, numeric, rel_tol=1e-4, abs_floor=1e-7):
    """Fraction of parameters whose analytic/numeric gradients agree.

    Agreement means |a - n| <= max(rel_tol * max(|a|, |n|), abs_floor); the
    absolute floor sits two orders of magnitude above the finite-difference
    noise for float64 evaluation.
    """
    total = 0
    ok = 0
    worst = 0.0
    for name in analytic:
        a = np.asarray(analytic[name], dtype=np.float64).reshape(-1)
        n = np.asarray(numeric[name], dtype=np.float64).reshape(-1)
        diff = np.abs(a - n)
        scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), abs_floor / rel_tol)
        rel = diff / scale
        passed = diff <= np.maximum(rel_tol * np.maximum(np.abs(a), np.abs(n)), abs_floor)
        total += a.size
        ok += int(passed.sum())
        worst = max(worst, float(rel.max()))
    return ok / total, worst
