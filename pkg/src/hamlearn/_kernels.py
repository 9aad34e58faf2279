"""Compiled inner loops for training, rollouts, and exact-field integration.

Everything here works on a flat float64 parameter vector. Layout, repeated
per weight layer: the weight matrix row-major, then the bias vector. The
readable numpy implementations in mlp.py and systems.py define the
semantics; these kernels are the hot path and are held to agree with them
(and with the expression-graph engine) in the test suite.

Flavor codes: 0 = conventional vector-field net, 1 = Hamiltonian net.
Family codes: 0 = linear, 1 = quartic, 2 = bistable chain.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NN, HNN = 0, 1
LINEAR, QUARTIC, CHAIN = 0, 1, 2


def layer_offsets(sizes: np.ndarray) -> np.ndarray:
    """Start offset of each layer's block in the flat parameter vector."""
    n_layers = len(sizes) - 1
    offs = np.zeros(n_layers + 1, dtype=np.int64)
    for l in range(n_layers):
        offs[l + 1] = offs[l] + sizes[l + 1] * sizes[l] + sizes[l + 1]
    return offs


def n_params(sizes) -> int:
    return int(layer_offsets(np.asarray(sizes, dtype=np.int64))[-1])


# ---------------------------------------------------------------------------
# forward / input gradient
# ---------------------------------------------------------------------------


@njit(cache=True)
def _forward_ws(theta, sizes, A, out):
    # A[0, :sizes[0]] must hold the input; hidden activations fill A[1..L].
    nl = sizes.shape[0] - 1
    off = 0
    for l in range(nl):
        n_in = sizes[l]
        n_out = sizes[l + 1]
        boff = off + n_out * n_in
        for i in range(n_out):
            s = theta[boff + i]
            row = off + i * n_in
            for j in range(n_in):
                s += theta[row + j] * A[l, j]
            if l == nl - 1:
                out[i] = s
            else:
                A[l + 1, i] = math.tanh(s)
        off = boff + n_out


@njit(cache=True)
def _input_grad_ws(theta, sizes, offs, A, D, g):
    # Gradient of a scalar-output net w.r.t. its input. A must already hold
    # the activations of a completed forward pass.
    nl = sizes.shape[0] - 1
    L = nl - 1  # hidden layers
    # output layer: d out / d a_L = output weight row
    woff = offs[nl - 1]
    for i in range(sizes[L]):
        D[L, i] = theta[woff + i] * (1.0 - A[L, i] * A[L, i])
    for l in range(L - 1, 0, -1):
        woff = offs[l]
        n_in = sizes[l]
        n_out = sizes[l + 1]
        for j in range(n_in):
            r = 0.0
            for i in range(n_out):
                r += theta[woff + i * n_in + j] * D[l + 1, i]
            D[l, j] = r * (1.0 - A[l, j] * A[l, j])
    woff = offs[0]
    n_in = sizes[0]
    n_out = sizes[1]
    for j in range(n_in):
        r = 0.0
        for i in range(n_out):
            r += theta[woff + i * n_in + j] * D[1, i]
        g[j] = r


@njit(cache=True)
def forward_batch(theta, sizes, X):
    n = X.shape[0]
    out_dim = sizes[-1]
    maxw = 0
    for s in sizes:
        maxw = max(maxw, s)
    A = np.zeros((sizes.shape[0], maxw))
    out = np.zeros(out_dim)
    Y = np.empty((n, out_dim))
    for r in range(n):
        for j in range(sizes[0]):
            A[0, j] = X[r, j]
        _forward_ws(theta, sizes, A, out)
        for k in range(out_dim):
            Y[r, k] = out[k]
    return Y


@njit(cache=True)
def input_grad_batch(theta, sizes, offs, X):
    n = X.shape[0]
    in_dim = sizes[0]
    maxw = 0
    for s in sizes:
        maxw = max(maxw, s)
    A = np.zeros((sizes.shape[0], maxw))
    D = np.zeros((sizes.shape[0], maxw))
    out = np.zeros(sizes[-1])
    g = np.zeros(in_dim)
    G = np.empty((n, in_dim))
    for r in range(n):
        for j in range(in_dim):
            A[0, j] = X[r, j]
        _forward_ws(theta, sizes, A, out)
        _input_grad_ws(theta, sizes, offs, A, D, g)
        for j in range(in_dim):
            G[r, j] = g[j]
    return G


# ---------------------------------------------------------------------------
# per-pair loss gradients
# ---------------------------------------------------------------------------


@njit(cache=True)
def _nn_pair_grad(theta, sizes, offs, x, y, A, out, delta, delta_prev, grad):
    # Squared-error loss on the forward outputs; grad must be pre-zeroed.
    nl = sizes.shape[0] - 1
    for j in range(sizes[0]):
        A[0, j] = x[j]
    _forward_ws(theta, sizes, A, out)
    loss = 0.0
    for k in range(sizes[nl]):
        diff = out[k] - y[k]
        loss += diff * diff
        delta[k] = 2.0 * diff
    for l in range(nl - 1, -1, -1):
        n_in = sizes[l]
        n_out = sizes[l + 1]
        woff = offs[l]
        boff = woff + n_out * n_in
        for i in range(n_out):
            di = delta[i]
            grad[boff + i] += di
            row = woff + i * n_in
            for j in range(n_in):
                grad[row + j] += di * A[l, j]
        if l > 0:
            for j in range(n_in):
                r = 0.0
                for i in range(n_out):
                    r += theta[woff + i * n_in + j] * delta[i]
                delta_prev[j] = r * (1.0 - A[l, j] * A[l, j])
            for j in range(n_in):
                delta[j] = delta_prev[j]
    return loss


@njit(cache=True)
def _hnn_pair_grad(theta, sizes, offs, x, y, A, D, Adot, Zdot, out, g, u,
                   abar, adotbar, bar_prev, dotbar_prev, grad):
    # Loss on the Hamilton-recipe field (dH/dp, -dH/dq) derived from the
    # scalar output. The weight gradient needs one more derivative: hold
    # u = dC/dg fixed, push u through a forward tangent pass, then run a
    # reverse pass over both the primal and tangent streams. grad must be
    # pre-zeroed.
    nl = sizes.shape[0] - 1
    L = nl - 1
    n0 = sizes[0]
    d = n0 // 2
    for j in range(n0):
        A[0, j] = x[j]
    _forward_ws(theta, sizes, A, out)
    _input_grad_ws(theta, sizes, offs, A, D, g)

    loss = 0.0
    for k in range(d):
        dq = y[k] - g[d + k]          # target qdot vs dH/dp
        dp = y[d + k] + g[k]          # target pdot vs -dH/dq
        loss += dq * dq + dp * dp
        u[d + k] = -2.0 * dq
        u[k] = 2.0 * dp

    # forward tangent stream seeded with u
    for j in range(n0):
        Adot[0, j] = u[j]
    for l in range(1, nl):
        woff = offs[l - 1]
        n_in = sizes[l - 1]
        n_out = sizes[l]
        for i in range(n_out):
            s = 0.0
            row = woff + i * n_in
            for j in range(n_in):
                s += theta[row + j] * Adot[l - 1, j]
            Zdot[l, i] = s
            Adot[l, i] = (1.0 - A[l, i] * A[l, i]) * s

    # output layer: s = w_out . adot_L, so only the output weights and the
    # tangent of the last hidden layer carry adjoints (output bias gets none,
    # which is exactly the gauge freedom of a gradient-only loss).
    woff = offs[nl - 1]
    for i in range(sizes[L]):
        grad[woff + i] += Adot[L, i]
        adotbar[i] = theta[woff + i]
        abar[i] = 0.0

    for l in range(L, 0, -1):
        woff = offs[l - 1]
        n_in = sizes[l - 1]
        n_out = sizes[l]
        for i in range(n_out):
            t = 1.0 - A[l, i] * A[l, i]
            zdb = adotbar[i] * t                      # bar of zdot_l
            abar[i] += adotbar[i] * (-2.0 * A[l, i] * Zdot[l, i])
            zb = abar[i] * t                          # bar of z_l
            row = woff + i * n_in
            for j in range(n_in):
                grad[row + j] += zdb * Adot[l - 1, j] + zb * A[l - 1, j]
            grad[woff + n_out * n_in + i] += zb
            # stash for the propagation loops below
            Zdot[l, i] = zdb
            D[l, i] = zb
        if l > 1:
            for j in range(n_in):
                rdot = 0.0
                rb = 0.0
                for i in range(n_out):
                    w = theta[woff + i * n_in + j]
                    rdot += w * Zdot[l, i]
                    rb += w * D[l, i]
                dotbar_prev[j] = rdot
                bar_prev[j] = rb
            for j in range(n_in):
                adotbar[j] = dotbar_prev[j]
                abar[j] = bar_prev[j]
    return loss


# ---------------------------------------------------------------------------
# training epoch
# ---------------------------------------------------------------------------


@njit(cache=True)
def run_epoch(flavor, theta, m, v, sizes, X, Y, order, batch_size,
              lr, beta1, beta2, eps, t0):
    """One pass over the pairs in the given visit order with Adam updates.

    Returns (mean per-pair loss, updated step counter, index of the first
    non-finite loss in `order` or -1). theta, m, v are updated in place.
    """
    nl = sizes.shape[0] - 1
    npar = theta.shape[0]
    maxw = 0
    for s in sizes:
        maxw = max(maxw, s)
    A = np.zeros((nl + 1, maxw))
    D = np.zeros((nl + 1, maxw))
    Adot = np.zeros((nl + 1, maxw))
    Zdot = np.zeros((nl + 1, maxw))
    out = np.zeros(sizes[nl])
    g = np.zeros(sizes[0])
    u = np.zeros(sizes[0])
    abar = np.zeros(maxw)
    adotbar = np.zeros(maxw)
    bar_prev = np.zeros(maxw)
    dotbar_prev = np.zeros(maxw)
    grad = np.zeros(npar)
    gacc = np.zeros(npar)
    offs = layer_offsets_nb(sizes)

    n = order.shape[0]
    t = t0
    total = 0.0
    pos = 0
    while pos < n:
        nb = min(batch_size, n - pos)
        for k in range(npar):
            gacc[k] = 0.0
        for b in range(pos, pos + nb):
            idx = order[b]
            for k in range(npar):
                grad[k] = 0.0
            if flavor == 0:
                loss = _nn_pair_grad(theta, sizes, offs, X[idx], Y[idx],
                                     A, out, adotbar, abar, grad)
            else:
                loss = _hnn_pair_grad(theta, sizes, offs, X[idx], Y[idx],
                                      A, D, Adot, Zdot, out, g, u, abar,
                                      adotbar, bar_prev, dotbar_prev, grad)
            if not math.isfinite(loss):
                return math.nan, t, b
            total += loss
            for k in range(npar):
                gacc[k] += grad[k]
        t += 1
        c1 = 1.0 - beta1 ** t
        c2 = 1.0 - beta2 ** t
        inv_nb = 1.0 / nb
        for k in range(npar):
            gk = gacc[k] * inv_nb
            m[k] = beta1 * m[k] + (1.0 - beta1) * gk
            v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk
            theta[k] -= lr * (m[k] / c1) / (math.sqrt(v[k] / c2) + eps)
        pos += nb
    return total / n, t, -1


@njit(cache=True)
def layer_offsets_nb(sizes):
    nl = sizes.shape[0] - 1
    offs = np.zeros(nl + 1, dtype=np.int64)
    for l in range(nl):
        offs[l + 1] = offs[l] + sizes[l + 1] * sizes[l] + sizes[l + 1]
    return offs


def pair_loss_gradient(flavor, theta, sizes, x, y):
    """Loss and flat weight-gradient for one training pair (test hook)."""
    sizes = np.asarray(sizes, dtype=np.int64)
    offs = layer_offsets(sizes)
    nl = len(sizes) - 1
    maxw = int(sizes.max())
    A = np.zeros((nl + 1, maxw))
    out = np.zeros(sizes[-1])
    grad = np.zeros(int(offs[-1]))
    if flavor == NN:
        delta = np.zeros(maxw)
        delta_prev = np.zeros(maxw)
        loss = _nn_pair_grad(theta, sizes, offs, x, y, A, out, delta,
                             delta_prev, grad)
    else:
        D = np.zeros((nl + 1, maxw))
        Adot = np.zeros((nl + 1, maxw))
        Zdot = np.zeros((nl + 1, maxw))
        g = np.zeros(sizes[0])
        u = np.zeros(sizes[0])
        abar = np.zeros(maxw)
        adotbar = np.zeros(maxw)
        bar_prev = np.zeros(maxw)
        dotbar_prev = np.zeros(maxw)
        loss = _hnn_pair_grad(theta, sizes, offs, x, y, A, D, Adot, Zdot,
                              out, g, u, abar, adotbar, bar_prev,
                              dotbar_prev, grad)
    return loss, grad


# ---------------------------------------------------------------------------
# exact systems
# ---------------------------------------------------------------------------


@njit(cache=True)
def _exact_field(family, a, b, kappa, y, out):
    dim = y.shape[0]
    d = dim // 2
    for k in range(d):
        out[k] = y[d + k]  # qdot = p
    if family == 0:
        for k in range(d):
            out[d + k] = -y[k]
    elif family == 1:
        for k in range(d):
            q = y[k]
            out[d + k] = -q * q * q
    else:
        for k in range(d):
            q = y[k]
            f = a * q - b * q * q * q
            qm = y[k - 1] if k > 0 else q      # free ends: ghost = edge site
            qp = y[k + 1] if k < d - 1 else q
            out[d + k] = f + kappa * (qm - 2.0 * q + qp)


@njit(cache=True)
def exact_energy(family, a, b, kappa, y):
    dim = y.shape[0]
    d = dim // 2
    e = 0.0
    for k in range(d):
        e += 0.5 * y[d + k] * y[d + k]
    if family == 0:
        for k in range(d):
            e += 0.5 * y[k] * y[k]
    elif family == 1:
        for k in range(d):
            q = y[k]
            e += 0.25 * q * q * q * q
    else:
        for k in range(d):
            q = y[k]
            e += -0.5 * a * q * q + 0.25 * b * q * q * q * q
        for k in range(d - 1):
            dq = y[k] - y[k + 1]
            e += 0.5 * kappa * dq * dq
    return e


@njit(cache=True)
def exact_rollout(family, a, b, kappa, y0, n_steps, substeps, dt):
    """RK4 rollout of the exact field; row i is the state at t = i*dt."""
    dim = y0.shape[0]
    states = np.empty((n_steps + 1, dim))
    y = y0.copy()
    k1 = np.zeros(dim)
    k2 = np.zeros(dim)
    k3 = np.zeros(dim)
    k4 = np.zeros(dim)
    tmp = np.zeros(dim)
    for j in range(dim):
        states[0, j] = y[j]
    h = dt / substeps
    for i in range(n_steps):
        for s in range(substeps):
            _exact_field(family, a, b, kappa, y, k1)
            for j in range(dim):
                tmp[j] = y[j] + 0.5 * h * k1[j]
            _exact_field(family, a, b, kappa, tmp, k2)
            for j in range(dim):
                tmp[j] = y[j] + 0.5 * h * k2[j]
            _exact_field(family, a, b, kappa, tmp, k3)
            for j in range(dim):
                tmp[j] = y[j] + h * k3[j]
            _exact_field(family, a, b, kappa, tmp, k4)
            for j in range(dim):
                y[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for j in range(dim):
            states[i + 1, j] = y[j]
    return states


# ---------------------------------------------------------------------------
# learned-field rollout
# ---------------------------------------------------------------------------


@njit(cache=True)
def _learned_field(flavor, theta, sizes, offs, y, A, D, out, g, f):
    n0 = sizes[0]
    d = n0 // 2
    for j in range(n0):
        A[0, j] = y[j]
    _forward_ws(theta, sizes, A, out)
    if flavor == 0:
        for j in range(n0):
            f[j] = out[j]
    else:
        _input_grad_ws(theta, sizes, offs, A, D, g)
        for k in range(d):
            f[k] = g[d + k]
            f[d + k] = -g[k]


@njit(cache=True)
def learned_rollout(flavor, theta, sizes, y0, n_steps, dt, use_rk4, cap):
    """Fixed-step rollout of a learned field.

    Returns (states, n_valid). states has n_steps + 1 rows; rows at and
    beyond n_valid are unset because the state left the finite region
    (non-finite entry or max-norm above cap).
    """
    dim = y0.shape[0]
    nl = sizes.shape[0] - 1
    maxw = 0
    for s in sizes:
        maxw = max(maxw, s)
    offs = layer_offsets_nb(sizes)
    A = np.zeros((nl + 1, maxw))
    D = np.zeros((nl + 1, maxw))
    out = np.zeros(sizes[nl])
    g = np.zeros(dim)
    k1 = np.zeros(dim)
    k2 = np.zeros(dim)
    k3 = np.zeros(dim)
    k4 = np.zeros(dim)
    tmp = np.zeros(dim)
    states = np.empty((n_steps + 1, dim))
    y = y0.copy()
    for j in range(dim):
        states[0, j] = y[j]
    n_valid = 1
    for i in range(n_steps):
        if use_rk4:
            _learned_field(flavor, theta, sizes, offs, y, A, D, out, g, k1)
            for j in range(dim):
                tmp[j] = y[j] + 0.5 * dt * k1[j]
            _learned_field(flavor, theta, sizes, offs, tmp, A, D, out, g, k2)
            for j in range(dim):
                tmp[j] = y[j] + 0.5 * dt * k2[j]
            _learned_field(flavor, theta, sizes, offs, tmp, A, D, out, g, k3)
            for j in range(dim):
                tmp[j] = y[j] + dt * k3[j]
            _learned_field(flavor, theta, sizes, offs, tmp, A, D, out, g, k4)
            for j in range(dim):
                y[j] += (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        else:
            _learned_field(flavor, theta, sizes, offs, y, A, D, out, g, k1)
            for j in range(dim):
                y[j] += dt * k1[j]
        ok = True
        for j in range(dim):
            if not math.isfinite(y[j]) or abs(y[j]) > cap:
                ok = False
        if not ok:
            return states, n_valid
        for j in range(dim):
            states[i + 1, j] = y[j]
        n_valid += 1
    return states, n_valid


@njit(cache=True)
def learned_field_batch(flavor, theta, sizes, X):
    n = X.shape[0]
    dim = sizes[0]
    nl = sizes.shape[0] - 1
    maxw = 0
    for s in sizes:
        maxw = max(maxw, s)
    offs = layer_offsets_nb(sizes)
    A = np.zeros((nl + 1, maxw))
    D = np.zeros((nl + 1, maxw))
    out = np.zeros(sizes[nl])
    g = np.zeros(dim)
    f = np.zeros(dim)
    F = np.empty((n, dim))
    for r in range(n):
        _learned_field(flavor, theta, sizes, offs, X[r], A, D, out, g, f)
        for j in range(dim):
            F[r, j] = f[j]
    return F
