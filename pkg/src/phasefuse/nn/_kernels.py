"""Direct-loop convolution kernels for small channel counts (numba)."""
from __future__ import annotations

import numba


@numba.njit(cache=True, fastmath=True)
def conv_forward(xp, w, bias, sh, sw, out):
    b_n, c_n = xp.shape[0], xp.shape[1]
    o_n, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    ho, wo = out.shape[2], out.shape[3]
    for b in range(b_n):
        for o in range(o_n):
            acc = out[b, o]
            acc[:, :] = bias[o]
            for c in range(c_n):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[o, c, i, j]
                        for h in range(ho):
                            row = xp[b, c, h * sh + i]
                            dst = acc[h]
                            for q in range(wo):
                                dst[q] += wv * row[q * sw + j]


@numba.njit(cache=True, fastmath=True)
def conv_backward_input(g, w, sh, sw, gxp):
    b_n, o_n, ho, wo = g.shape
    c_n, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    for b in range(b_n):
        for c in range(c_n):
            dst_plane = gxp[b, c]
            for o in range(o_n):
                src = g[b, o]
                for i in range(kh):
                    for j in range(kw):
                        wv = w[o, c, i, j]
                        for h in range(ho):
                            dst = dst_plane[h * sh + i]
                            row = src[h]
                            for q in range(wo):
                                dst[q * sw + j] += wv * row[q]


@numba.njit(cache=True, fastmath=True)
def conv_backward_weight(g, xp, sh, sw, gw):
    b_n, o_n, ho, wo = g.shape
    c_n, kh, kw = gw.shape[1], gw.shape[2], gw.shape[3]
    for o in range(o_n):
        for c in range(c_n):
            for i in range(kh):
                for j in range(kw):
                    s = 0.0
                    for b in range(b_n):
                        for h in range(ho):
                            row = xp[b, c, h * sh + i]
                            grow = g[b, o, h]
                            for q in range(wo):
                                s += grow[q] * row[q * sw + j]
                    gw[o, c, i, j] += s


@numba.njit(cache=True, fastmath=True)
def conv_forward_s1(xp, w, bias, out):
    b_n, c_n = xp.shape[0], xp.shape[1]
    o_n, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    ho, wo = out.shape[2], out.shape[3]
    for b in range(b_n):
        for o in range(o_n):
            for h in range(ho):
                for q in range(wo):
                    out[b, o, h, q] = bias[o]
            for c in range(c_n):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[o, c, i, j]
                        for h in range(ho):
                            for q in range(wo):
                                out[b, o, h, q] += wv * xp[b, c, h + i, q + j]


@numba.njit(cache=True, fastmath=True)
def conv_backward_input_s1(g, w, gxp):
    b_n, o_n, ho, wo = g.shape
    c_n, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    for b in range(b_n):
        for c in range(c_n):
            for o in range(o_n):
                for i in range(kh):
                    for j in range(kw):
                        wv = w[o, c, i, j]
                        for h in range(ho):
                            for q in range(wo):
                                gxp[b, c, h + i, q + j] += wv * g[b, o, h, q]


@numba.njit(cache=True, fastmath=True)
def conv_backward_weight_s1(g, xp, gw):
    b_n, o_n, ho, wo = g.shape
    c_n, kh, kw = gw.shape[1], gw.shape[2], gw.shape[3]
    for o in range(o_n):
        for c in range(c_n):
            for i in range(kh):
                for j in range(kw):
                    s = 0.0
                    for b in range(b_n):
                        for h in range(ho):
                            for q in range(wo):
                                s += g[b, o, h, q] * xp[b, c, h + i, q + j]
                    gw[o, c, i, j] += s
