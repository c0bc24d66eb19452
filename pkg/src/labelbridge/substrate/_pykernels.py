"""Pure numpy implementations of the hot loops.

Shapes: ``xp`` is the precomputed input projection (B, T, 3H) laid out as
[reset | update | candidate]; ``u_r``, ``u_u``, ``u_c`` are (H, H) and act
on row vectors (``h @ u``).
"""

import numpy as np


def _sigmoid(v):
    return 0.5 * (np.tanh(0.5 * v) + 1.0)


def gru_forward(xp, u_r, u_u, u_c, h0):
    b, t_len, three_h = xp.shape
    h = three_h // 3
    hs = np.empty((b, t_len, h))
    rs = np.empty((b, t_len, h))
    us = np.empty((b, t_len, h))
    cs = np.empty((b, t_len, h))
    hprev = np.empty((b, t_len, h))
    cur = np.array(h0, dtype=np.float64, copy=True)
    for t in range(t_len):
        x = xp[:, t]
        r = _sigmoid(x[:, :h] + cur @ u_r)
        u = _sigmoid(x[:, h:2 * h] + cur @ u_u)
        c = np.tanh(x[:, 2 * h:] + (r * cur) @ u_c)
        hprev[:, t] = cur
        cur = u * cur + (1.0 - u) * c
        hs[:, t] = cur
        rs[:, t] = r
        us[:, t] = u
        cs[:, t] = c
    return hs, (rs, us, cs, hprev)


def gru_backward(dhs, cache, u_r, u_u, u_c):
    rs, us, cs, hprev = cache
    b, t_len, h = dhs.shape
    dxp = np.empty((b, t_len, 3 * h))
    du_r = np.zeros_like(u_r)
    du_u = np.zeros_like(u_u)
    du_c = np.zeros_like(u_c)
    dnext = np.zeros((b, h))
    for t in range(t_len - 1, -1, -1):
        r, u, c, hp = rs[:, t], us[:, t], cs[:, t], hprev[:, t]
        dh = dhs[:, t] + dnext
        dc = dh * (1.0 - u)
        dau = dh * (hp - c) * u * (1.0 - u)
        dnext = dh * u
        dac = dc * (1.0 - c * c)
        drh = dac @ u_c.T
        du_c += (r * hp).T @ dac
        dar = drh * hp * r * (1.0 - r)
        dnext = dnext + drh * r + dar @ u_r.T + dau @ u_u.T
        du_r += hp.T @ dar
        du_u += hp.T @ dau
        dxp[:, t, :h] = dar
        dxp[:, t, h:2 * h] = dau
        dxp[:, t, 2 * h:] = dac
    return dxp, du_r, du_u, du_c, dnext


def hmm_posteriors(lik, start, trans):
    """Scaled forward-backward over a batch of equal-length sequences.

    ``lik`` is (N, T, L) with the per-position observation likelihood of
    each latent state.  Returns the (N, T, L) state posteriors and the (N,)
    log-likelihood of each sequence.
    """
    n, t_len, n_lat = lik.shape
    alpha = np.empty((n, t_len, n_lat))
    scale = np.empty((n, t_len))
    a = start[None, :] * lik[:, 0]
    s = a.sum(axis=1)
    alpha[:, 0] = a / s[:, None]
    scale[:, 0] = s
    for t in range(1, t_len):
        a = (alpha[:, t - 1] @ trans) * lik[:, t]
        s = a.sum(axis=1)
        alpha[:, t] = a / s[:, None]
        scale[:, t] = s
    beta = np.ones((n, n_lat))
    post = np.empty_like(alpha)
    post[:, t_len - 1] = alpha[:, t_len - 1]
    for t in range(t_len - 2, -1, -1):
        beta = ((lik[:, t + 1] * beta) @ trans.T) / scale[:, t + 1][:, None]
        g = alpha[:, t] * beta
        post[:, t] = g / g.sum(axis=1, keepdims=True)
    return post, np.log(scale).sum(axis=1)
