"""Independent loop-based reference implementations used as test oracles.

Everything here is written with plain Python loops over scalars so it shares
no code path with the vectorised library.
"""
import math


def conv2d(x, w, b, pad):
    c_in, h, wd = x.shape
    c_out, _, k, _ = w.shape
    out = [[[0.0] * wd for _ in range(h)] for _ in range(c_out)]
    for o in range(c_out):
        for i in range(h):
            for j in range(wd):
                acc = float(b[o])
                for c in range(c_in):
                    for di in range(k):
                        for dj in range(k):
                            yi, xj = i + di - pad, j + dj - pad
                            if 0 <= yi < h and 0 <= xj < wd:
                                acc += float(w[o, c, di, dj]) * float(x[c, yi, xj])
                out[o][i][j] = acc
    return out


def masked_pool(feats, mask):
    d, h, w = feats.shape
    out = []
    for c in range(d):
        s, n = 0.0, 0
        for i in range(h):
            for j in range(w):
                if mask[i][j]:
                    s += float(feats[c, i, j])
                    n += 1
        out.append(s / n)
    return out


def feature_difference(feats, mask):
    d, h, w = feats.shape
    out = []
    for c in range(d):
        fg = bg = 0.0
        nf = nb = 0
        for i in range(h):
            for j in range(w):
                if mask[i][j]:
                    fg += float(feats[c, i, j])
                    nf += 1
                else:
                    bg += float(feats[c, i, j])
                    nb += 1
        out.append(fg / nf - bg / nb)
    return out


def cosine_at(f, col, eps=1e-8):
    num = sum(a * b for a, b in zip(f, col))
    na = math.sqrt(sum(a * a for a in f))
    nb = math.sqrt(sum(b * b for b in col))
    return num / (na * nb + eps)


def weighted_cosine_map(f, feats, r):
    d, h, w = feats.shape
    fr = [float(f[c]) * float(r[c]) for c in range(d)]
    return [[cosine_at(fr, [float(feats[c, i, j]) * float(r[c]) for c in range(d)]) for j in range(w)] for i in range(h)]


def cross_entropy(logits, target):
    _, h, w = logits.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            a, b = float(logits[0, i, j]), float(logits[1, i, j])
            m = max(a, b)
            lse = m + math.log(math.exp(a - m) + math.exp(b - m))
            total += lse - (b if target[i][j] else a)
    return total / (h * w)


def iou(pred, gt):
    inter = union = 0
    for prow, grow in zip(pred, gt):
        for p, g in zip(prow, grow):
            inter += bool(p) and bool(g)
            union += bool(p) or bool(g)
    return 1.0 if union == 0 else inter / union


def fuse(prob_maps, rho):
    total = sum(rho)
    _, h, w = prob_maps[0].shape
    out = [[[0.0] * w for _ in range(h)] for _ in range(2)]
    for ch in range(2):
        for i in range(h):
            for j in range(w):
                out[ch][i][j] = sum(r * float(p[ch, i, j]) for r, p in zip(rho, prob_maps)) / total
    return out


def downsample(mask, h, w):
    big_h, big_w = len(mask), len(mask[0])
    sy, sx = big_h // h, big_w // w
    out = []
    for i in range(h):
        row = []
        for j in range(w):
            cnt = sum(mask[i * sy + a][j * sx + b] for a in range(sy) for b in range(sx))
            row.append(1 if cnt / (sy * sx) >= 0.5 else 0)
        out.append(row)
    return out
