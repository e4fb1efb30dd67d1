"""Pure-numpy kernels.

Every routine here has a twin in ``_kernels.pyx`` that performs the same
IEEE operations in the same order, so both backends produce bit-identical
output. Keep the two files in lockstep.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

# draw slots within one (trajectory, step)
SLOT_INIT = 0
SLOT_ACTION = 1
SLOT_OPPONENT = 2
SLOT_NEXT = 3
SLOT_NOISE_A = 4
SLOT_NOISE_B = 5

PIVOT_EPS = 1e-12


def _fmix(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(seed, traj_ids, h, slot):
    """Counter-based uniforms in [0, 1) keyed by (seed, trajectory, step, slot)."""
    ids = np.asarray(traj_ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _fmix(np.uint64(seed % 2**64) + GOLDEN * (ids + np.uint64(1)))
        z = _fmix(z + GOLDEN * np.uint64(h * 8 + slot + 1))
    return (z >> np.uint64(11)).astype(np.float64) * _INV53


def _draw(u, cdf_rows):
    return (u[:, None] >= cdf_rows).sum(axis=1).astype(np.int64)


def sample_paths(seed, traj_ids, init_cdf, act_cdf, opp_cdf, trans_cdf):
    """Sample state/action index paths.

    act_cdf: (H, S, A); opp_cdf: (H, S, B) or None; trans_cdf: (H, S, J, S)
    with J = A or A*B (row-major joint index a*B + b).
    Returns int64 arrays x, a, b, xn of shape (K, H); b is all zeros for MDPs.
    """
    ids = np.asarray(traj_ids, dtype=np.int64)
    K = ids.shape[0]
    H = act_cdf.shape[0]
    B = 1 if opp_cdf is None else opp_cdf.shape[2]
    xs = np.zeros((K, H), dtype=np.int64)
    acts = np.zeros((K, H), dtype=np.int64)
    opps = np.zeros((K, H), dtype=np.int64)
    nxt = np.zeros((K, H), dtype=np.int64)
    x = _draw(uniforms(seed, ids, 0, SLOT_INIT), np.broadcast_to(init_cdf, (K, init_cdf.shape[0])))
    for h in range(H):
        xs[:, h] = x
        a = _draw(uniforms(seed, ids, h, SLOT_ACTION), act_cdf[h, x])
        if opp_cdf is not None:
            b = _draw(uniforms(seed, ids, h, SLOT_OPPONENT), opp_cdf[h, x])
        else:
            b = np.zeros(K, dtype=np.int64)
        x = _draw(uniforms(seed, ids, h, SLOT_NEXT), trans_cdf[h, x, a * B + b])
        acts[:, h] = a
        opps[:, h] = b
        nxt[:, h] = x
    return xs, acts, opps, nxt


def gram_rhs(phi, y, w):
    """Return (sum_i w_i phi_i phi_i^T, sum_i w_i phi_i y_i^T).

    Rows are accumulated in index order; the right-hand side uses Neumaier
    compensated summation.
    """
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    n, d = phi.shape
    m = y.shape[1]
    G = np.zeros((d, d))
    s = np.zeros((d, m))
    c = np.zeros((d, m))
    for i in range(n):
        t = w[i] * phi[i]
        G += np.outer(t, phi[i])
        term = np.outer(t, y[i])
        tot = s + term
        big = np.abs(s) >= np.abs(term)
        c += np.where(big, (s - tot) + term, (term - tot) + s)
        s = tot
    return G, s + c


def simplex_game(P):
    """Solve max 1'z s.t. P z <= 1, z >= 0 for a strictly positive P.

    Dense tableau, Bland's rule. Returns (z, dual, pivots) where ``dual``
    holds the optimal multipliers of the m row constraints.
    """
    P = np.ascontiguousarray(P, dtype=np.float64)
    m, n = P.shape
    width = n + m + 1
    T = np.zeros((m + 1, width))
    T[:m, :n] = P
    for i in range(m):
        T[i, n + i] = 1.0
    T[:m, width - 1] = 1.0
    T[m, :n] = -1.0
    basis = np.arange(n, n + m, dtype=np.int64)
    pivots = 0
    while True:
        col = -1
        for j in range(n + m):
            if T[m, j] < -PIVOT_EPS:
                col = j
                break
        if col < 0:
            break
        row = -1
        best = 0.0
        for i in range(m):
            if T[i, col] > PIVOT_EPS:
                ratio = T[i, width - 1] / T[i, col]
                if row < 0 or ratio < best or (ratio == best and basis[i] < basis[row]):
                    row = i
                    best = ratio
        if row < 0:
            raise RuntimeError("unbounded game LP")
        T[row] = T[row] / T[row, col]
        for i in range(m + 1):
            if i != row:
                f = T[i, col]
                if f != 0.0:
                    T[i] = T[i] - f * T[row]
        basis[row] = col
        pivots += 1
        if pivots > 50 * (n + m) + 1000:
            raise RuntimeError("simplex pivot limit exceeded")
    z = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            z[basis[i]] = T[i, width - 1]
    dual = T[m, n:n + m].copy()
    return z, dual, pivots
