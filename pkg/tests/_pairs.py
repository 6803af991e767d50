"""Brute-force all-pairs scans shared by the family tests."""
import numpy as np


def all_pairs_min(values, labels, key, block=512):
    """min over i < j of key(v_i, v_j, l_i, l_j), evaluated on every pair in blocks."""
    worst = np.inf
    n = len(values)
    for start in range(0, n, block):
        v, l = values[start:start + block, None], labels[start:start + block, None]
        i = np.arange(start, start + len(v))[:, None]
        for other in range(start, n, 4 * block):
            w, m = values[None, other:other + 4 * block], labels[None, other:other + 4 * block]
            j = np.arange(other, other + w.shape[1])[None, :]
            gap = np.where(j > i, key(v, w, l, m), np.inf)
            if gap.size:
                worst = min(worst, float(gap.min()))
    return worst


def family_violations(fam):
    """Every separation invariant of a family, checked over all pairs; returns failure messages."""
    out = []
    seps = fam.separations
    for l, (A, r) in enumerate(zip(fam.integer_sets, seps), 1):
        if np.any(A < r):
            out.append(f"level {l}: element below r_l")
    values = np.concatenate(fam.integer_sets).astype(float)
    labels = np.concatenate([np.full(len(A), r, float) for A, r in zip(fam.integer_sets, seps)])
    if len(np.unique(values)) != len(values):
        out.append("integer sets overlap")
    if all_pairs_min(values, labels, lambda a, b, ra, rb: np.abs(a - b) - ra - rb) < 0:
        out.append("|n - m| < r_l + r_k for some pair")
    for l in range(1, fam.levels + 1):
        if np.any(np.abs(fam.points(l)) < seps[l - 1] - 1e-9):
            out.append(f"level {l}: point closer than r_l to the apex")
    pts = np.concatenate([fam.points(l) for l in range(1, fam.levels + 1)])
    plab = np.concatenate([np.full(len(fam.points(l)), seps[l - 1], float)
                           for l in range(1, fam.levels + 1)])
    if all_pairs_min(pts, plab, lambda a, b, ra, rb: np.abs(a - b) - np.minimum(ra, rb)) < -1e-9:
        out.append("two points closer than min(r_v, r_mu)")
    if not all(d > 0 for d in fam.density_bounds):
        out.append("nonpositive density bound")
    return out
