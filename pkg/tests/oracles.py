"""Independent reference implementations used only by the tests.

Everything here is written as plain nested loops over scalars, straight
from the propagation definitions, deliberately sharing no code with the
package.  Slow and obvious beats fast and clever for an oracle.
"""

import numpy as np


def naive_forward(model, x):
    """Dumb per-element forward pass for any supported layer stack."""
    a = np.asarray(x, dtype=np.float64)
    for idx, layer in enumerate(model.layers):
        kind = layer.kind
        w = model.weights[idx]
        b = model.biases[idx]
        if kind == "Dense":
            out = np.zeros(layer["out_features"])
            for j in range(layer["out_features"]):
                s = 0.0
                for i in range(layer["in_features"]):
                    s += float(w[j, i]) * a[i]
                if b is not None:
                    s += float(b[j])
                out[j] = s
            a = out
        elif kind == "Conv2D":
            c_in, h, wd = a.shape
            s, p = layer["stride"], layer["padding"]
            kh, kw = layer["kernel_h"], layer["kernel_w"]
            oh = (h + 2 * p - kh) // s + 1
            ow = (wd + 2 * p - kw) // s + 1
            out = np.zeros((layer["out_ch"], oh, ow))
            for o in range(layer["out_ch"]):
                for oy in range(oh):
                    for ox in range(ow):
                        acc = 0.0
                        for c in range(c_in):
                            for u in range(kh):
                                for v in range(kw):
                                    y = oy * s + u - p
                                    xx = ox * s + v - p
                                    if 0 <= y < h and 0 <= xx < wd:
                                        acc += float(w[o, c, u, v]) * a[c, y, xx]
                        if b is not None:
                            acc += float(b[o])
                        out[o, oy, ox] = acc
            a = out
        elif kind == "ReLU":
            a = np.where(a > 0, a, 0.0)
        elif kind == "MaxPool2D":
            k, s = layer["kernel"], layer["stride"]
            c_in, h, wd = a.shape
            oh, ow = (h - k) // s + 1, (wd - k) // s + 1
            out = np.zeros((c_in, oh, ow))
            for c in range(c_in):
                for oy in range(oh):
                    for ox in range(ow):
                        best = -np.inf
                        for u in range(k):
                            for v in range(k):
                                val = a[c, oy * s + u, ox * s + v]
                                if val > best:
                                    best = val
                        out[c, oy, ox] = best
            a = out
        elif kind == "AvgPool2D":
            k, s = layer["kernel"], layer["stride"]
            c_in, h, wd = a.shape
            oh, ow = (h - k) // s + 1, (wd - k) // s + 1
            out = np.zeros((c_in, oh, ow))
            for c in range(c_in):
                for oy in range(oh):
                    for ox in range(ow):
                        acc = 0.0
                        for u in range(k):
                            for v in range(k):
                                acc += a[c, oy * s + u, ox * s + v]
                        out[c, oy, ox] = acc / (k * k)
            a = out
        elif kind == "GlobalAvgPool":
            c_in, h, wd = a.shape
            out = np.zeros(c_in)
            for c in range(c_in):
                acc = 0.0
                for y in range(h):
                    for xx in range(wd):
                        acc += a[c, y, xx]
                out[c] = acc / (h * wd)
            a = out
        elif kind == "Flatten":
            a = a.reshape(-1)
        else:
            raise AssertionError(f"oracle cannot run layer {kind}")
    return a


def batchnorm_forward(x, gamma, beta, mean, var, eps):
    """Explicit per-channel batchnorm, for checking load-time folding."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for c in range(x.shape[0]):
        scale = float(gamma[c]) / np.sqrt(float(var[c]) + eps)
        out[c] = (x[c] - float(mean[c])) * scale + float(beta[c])
    return out


def _mlp_forward(ws, bs, x):
    """Forward for a Dense/ReLU/.../Dense stack; returns inputs per Dense.

    Activations are rounded to 32-bit at layer boundaries, matching the
    storage convention of the engine under test; the propagation
    arithmetic everywhere else stays 64-bit.
    """
    acts = [np.asarray(x, dtype=np.float64)]
    for l, (w, b) in enumerate(zip(ws, bs)):
        a = acts[-1]
        z = np.zeros(w.shape[0])
        for j in range(w.shape[0]):
            s = 0.0
            for i in range(w.shape[1]):
                s += float(w[j, i]) * a[i]
            if b is not None:
                s += float(b[j])
            z[j] = s
        if l < len(ws) - 1:
            z = np.where(z > 0, z, 0.0)
        acts.append(z.astype(np.float32).astype(np.float64))
    return acts


def lrp_mlp(ws, bs, x, target, alpha, beta):
    """Positive/negative split propagation on an MLP, per definition.

    Returns (f_target, rel) where rel[d] is the relevance at the input of
    Dense layer len(ws)-d for d >= 1 (rel[0] is the output relevance).
    """
    acts = _mlp_forward(ws, bs, x)
    f = acts[-1][target]
    R = np.zeros(len(acts[-1]))
    R[target] = f
    rel = [R.copy()]
    for l in reversed(range(len(ws))):
        w, m = ws[l], acts[l]
        lower = np.zeros(len(m))
        for i in range(len(m)):
            acc = 0.0
            for j in range(w.shape[0]):
                z = m[i] * float(w[j, i])
                sp = sum(max(m[q] * float(w[j, q]), 0.0) for q in range(len(m)))
                sn = sum(min(m[q] * float(w[j, q]), 0.0) for q in range(len(m)))
                if z > 0 and sp != 0.0:
                    acc += alpha * (z / sp) * R[j]
                if z < 0 and sn != 0.0:
                    acc -= beta * (z / sn) * R[j]
            lower[i] = acc
        R = lower
        rel.append(R.copy())
    return f, rel


def rap_mlp(ws, bs, x, target):
    """Three-stage relative attribution on an MLP, per definition."""
    acts = _mlp_forward(ws, bs, x)
    f = acts[-1][target]
    out_r = np.zeros(len(acts[-1]))
    out_r[target] = f
    rel = [out_r]

    # absolute influence normalization at the final layer
    m = acts[-2]
    w = ws[-1]
    z = np.array([m[i] * float(w[target, i]) for i in range(len(m))])
    tot = z.sum()
    if tot == 0.0:
        R = np.zeros(len(m))
    else:
        R = z * (f / tot)
        abs_sum = np.abs(R).sum()
        R = np.zeros(len(m)) if abs_sum == 0.0 else np.abs(R) * (R.sum() / abs_sum)
    rel.append(R.copy())

    for l in reversed(range(len(ws) - 1)):
        w, m = ws[l], acts[l]
        r_bar = np.zeros(len(m))
        r_neg = np.zeros(len(m))
        for j in range(w.shape[0]):
            zp = {i: max(m[i] * float(w[j, i]), 0.0) for i in range(len(m))}
            zn = {i: min(m[i] * float(w[j, i]), 0.0) for i in range(len(m))}
            sp, sn = sum(zp.values()), sum(zn.values())
            if sp != 0.0:
                for i in range(len(m)):
                    r_bar[i] += (zp[i] / sp) * R[j]
            denom = sp + abs(sn)
            scaled = R[j] * (abs(sn) / denom) if denom != 0.0 else 0.0
            if sn != 0.0:
                for i in range(len(m)):
                    share = (zn[i] / sn) * scaled
                    r_bar[i] += share
                    r_neg[i] += share
        gamma = sum(1 for i in range(len(m)) if m[i] > 0)
        if gamma > 0:
            shift = r_neg.sum() / gamma
            R = np.array([r_bar[i] - (shift if m[i] > 0 else 0.0)
                          for i in range(len(m))])
        else:
            R = r_bar
        rel.append(R.copy())
    return f, rel


def iou_bruteforce(mask, boxes):
    """Per-pixel counting of intersection and union against a box set."""
    h, w = mask.shape
    inter = union = 0
    for y in range(h):
        for x in range(w):
            in_box = False
            for box in boxes:
                if box.x <= x < box.x + box.w and box.y <= y < box.y + box.h:
                    in_box = True
                    break
            m = bool(mask[y, x])
            if m and in_box:
                inter += 1
            if m or in_box:
                union += 1
    return inter / union if union else 0.0


def cam_weighted_sum(feature_maps, weights):
    """Explicit loop version of the class-weighted feature-map sum."""
    c, h, w = feature_maps.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for k in range(c):
                acc += float(weights[k]) * float(feature_maps[k, y, x])
            out[y, x] = acc
    return out
