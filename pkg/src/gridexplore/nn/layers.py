"""Layer primitives with explicit forward/backward passes (NCHW layout).

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes the upstream gradient and the cache.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided

LEAK = 0.01


def same_padding(size: int, kernel: int, stride: int):
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2


def _im2col(xp, k, s, oh, ow):
    n, c = xp.shape[:2]
    sn, sc, sh, sw = xp.strides
    return as_strided(xp, (n, oh, ow, c, k, k), (sn, sh * s, sw * s, sc, sh, sw), writeable=False)


def _col2im(cols, shape, k, s):
    # cols: (N, oh, ow, C, k, k) -> summed into (N, C, H, W)
    out = np.zeros(shape, dtype=cols.dtype)
    _, oh, ow = cols.shape[:3]
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + s * oh:s, j:j + s * ow:s] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return out


def conv2d_forward(x, w, b, stride):
    """Same-padded convolution. ``w`` is (F, C, k, k)."""
    n, c, h, wd = x.shape
    f, _, k, _ = w.shape
    pt, pb = same_padding(h, k, stride)
    pl, pr = same_padding(wd, k, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    oh, ow = -(-h // stride), -(-wd // stride)
    cols = _im2col(xp, k, stride, oh, ow).reshape(n * oh * ow, c * k * k)
    out = cols @ w.reshape(f, -1).T + b
    out = out.reshape(n, oh, ow, f).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (x.shape, xp.shape, cols, (pt, pl), stride)


def conv2d_backward(dout, w, cache):
    x_shape, xp_shape, cols, (pt, pl), stride = cache
    n, f, oh, ow = dout.shape
    k = w.shape[2]
    d = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (d.T @ cols).reshape(w.shape)
    db = d.sum(axis=0)
    dcols = (d @ w.reshape(f, -1)).reshape(n, oh, ow, x_shape[1], k, k)
    dxp = _col2im(dcols, xp_shape, k, stride)
    dx = dxp[:, :, pt:pt + x_shape[2], pl:pl + x_shape[3]]
    return np.ascontiguousarray(dx), dw, db


def deconv2d_forward(x, w, b, stride, pad):
    """Transposed convolution. ``w`` is (C_in, C_out, k, k); output side is
    ``(in - 1) * stride + k - 2 * pad``."""
    n, cin, h, wd = x.shape
    _, cout, k, _ = w.shape
    xm = x.transpose(0, 2, 3, 1).reshape(-1, cin)
    cols = (xm @ w.reshape(cin, -1)).reshape(n, h, wd, cout, k, k)
    full_shape = (n, cout, (h - 1) * stride + k, (wd - 1) * stride + k)
    full = _col2im(cols, full_shape, k, stride)
    oh, ow = full_shape[2] - 2 * pad, full_shape[3] - 2 * pad
    out = full[:, :, pad:pad + oh, pad:pad + ow] + b[None, :, None, None]
    return np.ascontiguousarray(out), (x.shape, xm, full_shape, stride, pad)


def deconv2d_backward(dout, w, cache):
    x_shape, xm, full_shape, stride, pad = cache
    n, cin, h, wd = x_shape
    k = w.shape[2]
    dfull = np.zeros(full_shape, dtype=dout.dtype)
    dfull[:, :, pad:pad + dout.shape[2], pad:pad + dout.shape[3]] = dout
    dcols = _im2col(dfull, k, stride, h, wd).reshape(n * h * wd, -1)
    dx = (dcols @ w.reshape(cin, -1).T).reshape(n, h, wd, cin).transpose(0, 3, 1, 2)
    dw = (xm.T @ dcols).reshape(w.shape)
    db = dout.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(dx), dw, db


def leaky_relu_forward(x):
    return np.where(x > 0, x, LEAK * x), x


def leaky_relu_backward(dout, x):
    return np.where(x > 0, dout, LEAK * dout)


def global_maxpool_forward(x):
    n, c = x.shape[:2]
    flat = x.reshape(n, c, -1)
    idx = flat.argmax(axis=2)
    out = np.take_along_axis(flat, idx[..., None], axis=2)[..., 0]
    return out, (x.shape, idx)


def global_maxpool_backward(dout, cache):
    shape, idx = cache
    n, c = shape[:2]
    dx = np.zeros((n, c, int(np.prod(shape[2:]))), dtype=dout.dtype)
    np.put_along_axis(dx, idx[..., None], dout[..., None], axis=2)
    return dx.reshape(shape)


def linear_forward(x, w, b):
    return x @ w + b, x


def linear_backward(dout, w, x):
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def dueling_forward(adv_map, adv_terminal, value):
    """Q = V + (A - mean A) over all point actions plus the terminal action.

    Computed in float64 so that the advantages sum to zero to well below the
    float32 rounding of a wide action map.
    """
    n = adv_map.shape[0]
    adv = np.concatenate([adv_map.reshape(n, -1), adv_terminal[:, None]], axis=1).astype(np.float64)
    return np.asarray(value, dtype=np.float64)[:, None] + adv - adv.mean(axis=1, keepdims=True)


def dueling_backward(dq, map_shape):
    n, a = dq.shape
    dadv = dq - dq.sum(axis=1, keepdims=True) / a
    d_value = dq.sum(axis=1)
    return dadv[:, :-1].reshape(map_shape), dadv[:, -1], d_value


def td_mse_loss(q, actions, targets):
    """Mean squared TD error on the taken actions; returns (loss, dL/dq)."""
    n = q.shape[0]
    rows = np.arange(n)
    err = q[rows, actions] - targets
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / n
    return float(np.mean(err ** 2)), dq


def softmax_xent_loss(logits, labels):
    """Per-pixel softmax cross-entropy averaged over all pixels.

    ``logits`` is (N, M, H, W), ``labels`` (N, H, W) integer classes.
    """
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    onehot = np.eye(logits.shape[1], dtype=logits.dtype)[labels].transpose(0, 3, 1, 2)
    count = labels.size
    loss = -float((onehot * logp).sum()) / count
    dlogits = (np.exp(logp) - onehot) / count
    return loss, dlogits.astype(logits.dtype)
