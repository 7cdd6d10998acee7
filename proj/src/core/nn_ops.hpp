#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "autodiff.hpp"

namespace stegograph {

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// elementwise and structural ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw InvalidArgument("add: shape mismatch");
    Tensor<T> out(a->value.shape());
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = a->value[i] + b->value[i];
    return make_op<T>(std::move(out), "add", {a, b}, [a, b](Node<T>& self) {
        a->accumulate(self.grad);
        b->accumulate(self.grad);
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw InvalidArgument("mul: shape mismatch");
    Tensor<T> out(a->value.shape());
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = a->value[i] * b->value[i];
    return make_op<T>(std::move(out), "mul", {a, b}, [a, b](Node<T>& self) {
        const std::int64_t n = self.grad.numel();
        if (a->requires_grad) {
            Tensor<T> ga(a->value.shape());
            for (std::int64_t i = 0; i < n; ++i) ga[i] = b->value[i] * self.grad[i];
            a->accumulate(ga);
        }
        if (b->requires_grad) {
            Tensor<T> gb(b->value.shape());
            for (std::int64_t i = 0; i < n; ++i) gb[i] = a->value[i] * self.grad[i];
            b->accumulate(gb);
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T c) {
    Tensor<T> out(a->value.shape());
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = a->value[i] * c;
    return make_op<T>(std::move(out), "scale", {a}, [a, c](Node<T>& self) {
        Tensor<T> ga(a->value.shape());
        const std::int64_t n = ga.numel();
        for (std::int64_t i = 0; i < n; ++i) ga[i] = self.grad[i] * c;
        a->accumulate(ga);
    });
}

template <typename T>
Var<T> sum_all(const Var<T>& a) {
    double acc = 0;
    const std::int64_t n = a->value.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(a->value[i]);
    Tensor<T> out(Shape{1});
    out[0] = static_cast<T>(acc);
    return make_op<T>(std::move(out), "sum_all", {a}, [a](Node<T>& self) {
        Tensor<T> ga(a->value.shape(), self.grad[0]);
        a->accumulate(ga);
    });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape new_shape) {
    Tensor<T> out = a->value.reshaped(std::move(new_shape));
    return make_op<T>(std::move(out), "reshape", {a}, [a](Node<T>& self) {
        a->accumulate(self.grad.reshaped(a->value.shape()));
    });
}

// rows [begin, begin+count) of a 2-d tensor
template <typename T>
Var<T> slice_rows(const Var<T>& a, std::int64_t begin, std::int64_t count) {
    require_rank(a->value, 2, "slice_rows");
    const std::int64_t rows = a->value.dim(0), cols = a->value.dim(1);
    if (begin < 0 || count < 1 || begin + count > rows) throw InvalidArgument("slice_rows: range out of bounds");
    Tensor<T> out(Shape{count, cols});
    std::memcpy(out.data(), a->value.data() + begin * cols, static_cast<std::size_t>(count * cols) * sizeof(T));
    return make_op<T>(std::move(out), "slice_rows", {a}, [a, begin, count, cols](Node<T>& self) {
        Tensor<T> ga(a->value.shape());
        std::memcpy(ga.data() + begin * cols, self.grad.data(), static_cast<std::size_t>(count * cols) * sizeof(T));
        a->accumulate(ga);
    });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
    const std::int64_t cols = parts[0]->value.dim(1);
    std::int64_t rows = 0;
    for (const auto& p : parts) {
        require_rank(p->value, 2, "concat_rows");
        if (p->value.dim(1) != cols) throw InvalidArgument("concat_rows: column mismatch");
        rows += p->value.dim(0);
    }
    Tensor<T> out(Shape{rows, cols});
    std::int64_t at = 0;
    for (const auto& p : parts) {
        std::memcpy(out.data() + at * cols, p->value.data(),
                    static_cast<std::size_t>(p->value.numel()) * sizeof(T));
        at += p->value.dim(0);
    }
    return make_op<T>(std::move(out), "concat_rows", parts, [parts, cols](Node<T>& self) {
        std::int64_t at = 0;
        for (const auto& p : parts) {
            const std::int64_t r = p->value.dim(0);
            if (p->requires_grad) {
                Tensor<T> gp(p->value.shape());
                std::memcpy(gp.data(), self.grad.data() + at * cols,
                            static_cast<std::size_t>(r * cols) * sizeof(T));
                p->accumulate(gp);
            }
            at += r;
        }
    });
}

// column means: [R,C] -> [1,C]; the average readout is this over node rows
template <typename T>
Var<T> mean_rows(const Var<T>& a) {
    require_rank(a->value, 2, "mean_rows");
    const std::int64_t rows = a->value.dim(0), cols = a->value.dim(1);
    Tensor<T> out(Shape{1, cols});
    for (std::int64_t c = 0; c < cols; ++c) {
        double acc = 0;
        for (std::int64_t r = 0; r < rows; ++r) acc += static_cast<double>(a->value.at(r, c));
        out[c] = static_cast<T>(acc / static_cast<double>(rows));
    }
    return make_op<T>(std::move(out), "mean_rows", {a}, [a, rows, cols](Node<T>& self) {
        Tensor<T> ga(a->value.shape());
        const T inv = T(1) / static_cast<T>(rows);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c) ga.at(r, c) = self.grad[c] * inv;
        a->accumulate(ga);
    });
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

// abs'(0)=0 and relu'(0)=0 by convention.
template <typename T>
Var<T> abs_act(const Var<T>& x) {
    Tensor<T> out(x->value.shape());
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = std::abs(x->value[i]);
    return make_op<T>(std::move(out), "abs", {x}, [x](Node<T>& self) {
        Tensor<T> gx(x->value.shape());
        const std::int64_t n = gx.numel();
        for (std::int64_t i = 0; i < n; ++i) {
            const T v = x->value[i];
            gx[i] = v > T(0) ? self.grad[i] : (v < T(0) ? -self.grad[i] : T(0));
        }
        x->accumulate(gx);
    });
}

template <typename T>
Var<T> tanh_act(const Var<T>& x) {
    Tensor<T> out(x->value.shape());
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = std::tanh(x->value[i]);
    return make_op<T>(std::move(out), "tanh", {x}, [x](Node<T>& self) {
        Tensor<T> gx(x->value.shape());
        const std::int64_t n = gx.numel();
        for (std::int64_t i = 0; i < n; ++i) {
            const T y = std::tanh(x->value[i]);
            gx[i] = self.grad[i] * (T(1) - y * y);
        }
        x->accumulate(gx);
    });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    Tensor<T> out(x->value.shape());
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = x->value[i] > T(0) ? x->value[i] : T(0);
    return make_op<T>(std::move(out), "relu", {x}, [x](Node<T>& self) {
        Tensor<T> gx(x->value.shape());
        const std::int64_t n = gx.numel();
        for (std::int64_t i = 0; i < n; ++i) gx[i] = x->value[i] > T(0) ? self.grad[i] : T(0);
        x->accumulate(gx);
    });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.2)) {
    Tensor<T> out(x->value.shape());
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = x->value[i] > T(0) ? x->value[i] : slope * x->value[i];
    return make_op<T>(std::move(out), "leaky_relu", {x}, [x, slope](Node<T>& self) {
        Tensor<T> gx(x->value.shape());
        const std::int64_t n = gx.numel();
        for (std::int64_t i = 0; i < n; ++i) gx[i] = x->value[i] > T(0) ? self.grad[i] : slope * self.grad[i];
        x->accumulate(gx);
    });
}

template <typename T>
Var<T> elu(const Var<T>& x, T alpha = T(1)) {
    Tensor<T> out(x->value.shape());
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i)
        out[i] = x->value[i] > T(0) ? x->value[i] : alpha * (std::exp(x->value[i]) - T(1));
    return make_op<T>(std::move(out), "elu", {x}, [x, alpha](Node<T>& self) {
        Tensor<T> gx(x->value.shape());
        const std::int64_t n = gx.numel();
        for (std::int64_t i = 0; i < n; ++i) {
            const T v = x->value[i];
            gx[i] = self.grad[i] * (v > T(0) ? T(1) : alpha * std::exp(v));
        }
        x->accumulate(gx);
    });
}

// ---------------------------------------------------------------------------
// dense linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    require_rank(a->value, 2, "matmul lhs");
    require_rank(b->value, 2, "matmul rhs");
    const std::int64_t m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
    if (b->value.dim(0) != k)
        throw InvalidArgument("matmul: inner dimensions " + shape_to_string(a->value.shape()) + " vs " +
                              shape_to_string(b->value.shape()));
    Tensor<T> out(Shape{m, n});
    for (std::int64_t i = 0; i < m; ++i) {
        T* orow = out.data() + i * n;
        const T* arow = a->value.data() + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b->value.data() + p * n;
            for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return make_op<T>(std::move(out), "matmul", {a, b}, [a, b, m, k, n](Node<T>& self) {
        if (a->requires_grad) { // dA = dY * B^T
            Tensor<T> ga(a->value.shape());
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t p = 0; p < k; ++p) {
                    const T* grow = self.grad.data() + i * n;
                    const T* brow = b->value.data() + p * n;
                    T acc = T(0);
                    for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    ga.at(i, p) = acc;
                }
            a->accumulate(ga);
        }
        if (b->requires_grad) { // dB = A^T * dY
            Tensor<T> gb(b->value.shape());
            for (std::int64_t i = 0; i < m; ++i) {
                const T* arow = a->value.data() + i * k;
                const T* grow = self.grad.data() + i * n;
                for (std::int64_t p = 0; p < k; ++p) {
                    const T av = arow[p];
                    T* gbrow = gb.data() + p * n;
                    for (std::int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
            }
            b->accumulate(gb);
        }
    });
}

// y = x * W + b with x:[N,d_in], W:[d_in,d_out], b:[d_out]
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
    require_rank(x->value, 2, "linear input");
    require_rank(weight->value, 2, "linear weight");
    const std::int64_t n = x->value.dim(0), din = x->value.dim(1), dout = weight->value.dim(1);
    if (weight->value.dim(0) != din)
        throw InvalidArgument("linear: input dim " + std::to_string(din) + " vs weight rows " +
                              std::to_string(weight->value.dim(0)));
    require_shape(bias->value, Shape{dout}, "linear bias");
    auto y = matmul(x, weight);
    Tensor<T> out(Shape{n, dout});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < dout; ++j) out.at(i, j) = y->value.at(i, j) + bias->value[j];
    return make_op<T>(std::move(out), "linear", {y, bias}, [y, bias, n, dout](Node<T>& self) {
        y->accumulate(self.grad);
        if (bias->requires_grad) {
            Tensor<T> gb(bias->value.shape());
            for (std::int64_t i = 0; i < n; ++i)
                for (std::int64_t j = 0; j < dout; ++j) gb[j] += self.grad.at(i, j);
            bias->accumulate(gb);
        }
    });
}

// ---------------------------------------------------------------------------
// convolution and pooling
// ---------------------------------------------------------------------------

namespace detail {

// zero-padded copy of one [C,H,W] image
template <typename T>
void pad_image(const T* src, std::int64_t c_count, std::int64_t h, std::int64_t w, std::int64_t pad, T* dst) {
    const std::int64_t hp = h + 2 * pad, wp = w + 2 * pad;
    std::fill(dst, dst + c_count * hp * wp, T(0));
    for (std::int64_t c = 0; c < c_count; ++c)
        for (std::int64_t y = 0; y < h; ++y)
            std::memcpy(dst + (c * hp + y + pad) * wp + pad, src + (c * h + y) * w,
                        static_cast<std::size_t>(w) * sizeof(T));
}

} // namespace detail

// Cross-correlation (no kernel flip), zero padding. H' = (H+2p-kh)/stride+1.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, std::int64_t stride = 1,
              std::int64_t padding = 0) {
    require_rank(x->value, 4, "conv2d input");
    require_rank(weight->value, 4, "conv2d kernel");
    const std::int64_t n = x->value.dim(0), cin = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
    const std::int64_t f = weight->value.dim(0), kh = weight->value.dim(2), kw = weight->value.dim(3);
    if (weight->value.dim(1) != cin)
        throw InvalidArgument("conv2d: input has " + std::to_string(cin) + " channels, kernel expects " +
                              std::to_string(weight->value.dim(1)));
    if (stride < 1 || padding < 0) throw InvalidArgument("conv2d: stride must be >=1 and padding >=0");
    if (kh > h + 2 * padding || kw > w + 2 * padding)
        throw InvalidArgument("conv2d: kernel larger than padded input");
    if (bias) require_shape(bias->value, Shape{f}, "conv2d bias");

    const std::int64_t hp = h + 2 * padding, wp = w + 2 * padding;
    const std::int64_t ho = (hp - kh) / stride + 1, wo = (wp - kw) / stride + 1;

    Tensor<T> out(Shape{n, f, ho, wo});
    std::vector<T> padbuf;
    const bool padded = padding > 0;
    if (padded) padbuf.resize(static_cast<std::size_t>(cin * hp * wp));

    for (std::int64_t img = 0; img < n; ++img) {
        const T* xin = x->value.data() + img * cin * h * w;
        if (padded) {
            detail::pad_image(xin, cin, h, w, padding, padbuf.data());
            xin = padbuf.data();
        }
        for (std::int64_t fo = 0; fo < f; ++fo) {
            T* oplane = out.data() + (img * f + fo) * ho * wo;
            if (bias) {
                const T bv = bias->value[fo];
                std::fill(oplane, oplane + ho * wo, bv);
            }
            const T* kbase = weight->value.data() + fo * cin * kh * kw;
            for (std::int64_t c = 0; c < cin; ++c) {
                const T* cplane = xin + c * hp * wp;
                for (std::int64_t ky = 0; ky < kh; ++ky)
                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                        const T kv = kbase[(c * kh + ky) * kw + kx];
                        for (std::int64_t oy = 0; oy < ho; ++oy) {
                            const T* irow = cplane + (oy * stride + ky) * wp + kx;
                            T* orow = oplane + oy * wo;
                            if (stride == 1) {
                                for (std::int64_t ox = 0; ox < wo; ++ox) orow[ox] += kv * irow[ox];
                            } else {
                                for (std::int64_t ox = 0; ox < wo; ++ox) orow[ox] += kv * irow[ox * stride];
                            }
                        }
                    }
            }
        }
    }

    std::vector<Var<T>> parents = bias ? std::vector<Var<T>>{x, weight, bias} : std::vector<Var<T>>{x, weight};
    return make_op<T>(std::move(out), "conv2d", std::move(parents),
                      [x, weight, bias, n, cin, h, w, f, kh, kw, stride, padding, hp, wp, ho, wo](Node<T>& self) {
        const Tensor<T>& dy = self.grad;
        std::vector<T> padbuf;
        const bool padded = padding > 0;
        if (padded) padbuf.resize(static_cast<std::size_t>(cin * hp * wp));

        if (bias && bias->requires_grad) {
            Tensor<T> db(bias->value.shape());
            for (std::int64_t img = 0; img < n; ++img)
                for (std::int64_t fo = 0; fo < f; ++fo) {
                    const T* dplane = dy.data() + (img * f + fo) * ho * wo;
                    double acc = 0;
                    for (std::int64_t i = 0; i < ho * wo; ++i) acc += static_cast<double>(dplane[i]);
                    db[fo] += static_cast<T>(acc);
                }
            bias->accumulate(db);
        }

        if (weight->requires_grad) {
            Tensor<T> dw(weight->value.shape());
            for (std::int64_t img = 0; img < n; ++img) {
                const T* xin = x->value.data() + img * cin * h * w;
                if (padded) {
                    detail::pad_image(xin, cin, h, w, padding, padbuf.data());
                    xin = padbuf.data();
                }
                for (std::int64_t fo = 0; fo < f; ++fo) {
                    const T* dplane = dy.data() + (img * f + fo) * ho * wo;
                    T* kbase = dw.data() + fo * cin * kh * kw;
                    for (std::int64_t c = 0; c < cin; ++c) {
                        const T* cplane = xin + c * hp * wp;
                        for (std::int64_t ky = 0; ky < kh; ++ky)
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                T acc = T(0);
                                for (std::int64_t oy = 0; oy < ho; ++oy) {
                                    const T* irow = cplane + (oy * stride + ky) * wp + kx;
                                    const T* drow = dplane + oy * wo;
                                    if (stride == 1) {
                                        for (std::int64_t ox = 0; ox < wo; ++ox) acc += irow[ox] * drow[ox];
                                    } else {
                                        for (std::int64_t ox = 0; ox < wo; ++ox) acc += irow[ox * stride] * drow[ox];
                                    }
                                }
                                kbase[(c * kh + ky) * kw + kx] += acc;
                            }
                    }
                }
            }
            weight->accumulate(dw);
        }

        if (x->requires_grad) {
            Tensor<T> dx(x->value.shape());
            std::vector<T> dxpad(padded ? static_cast<std::size_t>(cin * hp * wp) : 0);
            for (std::int64_t img = 0; img < n; ++img) {
                T* dxin = dx.data() + img * cin * h * w;
                T* target = dxin;
                if (padded) {
                    std::fill(dxpad.begin(), dxpad.end(), T(0));
                    target = dxpad.data();
                }
                for (std::int64_t fo = 0; fo < f; ++fo) {
                    const T* dplane = dy.data() + (img * f + fo) * ho * wo;
                    const T* kbase = weight->value.data() + fo * cin * kh * kw;
                    for (std::int64_t c = 0; c < cin; ++c) {
                        T* cplane = target + c * hp * wp;
                        for (std::int64_t ky = 0; ky < kh; ++ky)
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                const T kv = kbase[(c * kh + ky) * kw + kx];
                                for (std::int64_t oy = 0; oy < ho; ++oy) {
                                    T* irow = cplane + (oy * stride + ky) * wp + kx;
                                    const T* drow = dplane + oy * wo;
                                    if (stride == 1) {
                                        for (std::int64_t ox = 0; ox < wo; ++ox) irow[ox] += kv * drow[ox];
                                    } else {
                                        for (std::int64_t ox = 0; ox < wo; ++ox) irow[ox * stride] += kv * drow[ox];
                                    }
                                }
                            }
                    }
                }
                if (padded) { // drop the pad border
                    for (std::int64_t c = 0; c < cin; ++c)
                        for (std::int64_t y = 0; y < h; ++y) {
                            const T* src = dxpad.data() + (c * hp + y + padding) * wp + padding;
                            T* dst = dxin + (c * h + y) * w;
                            std::memcpy(dst, src, static_cast<std::size_t>(w) * sizeof(T));
                        }
                }
            }
            x->accumulate(dx);
        }
    });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, std::int64_t stride = 1, std::int64_t padding = 0) {
    return conv2d(x, weight, Var<T>{}, stride, padding);
}

// mean over window x window blocks, no padding
template <typename T>
Var<T> avg_pool2d(const Var<T>& x, std::int64_t window, std::int64_t stride) {
    require_rank(x->value, 4, "avg_pool2d input");
    const std::int64_t n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
    if (window < 1 || stride < 1) throw InvalidArgument("avg_pool2d: window and stride must be >=1");
    if (window > h || window > w) throw InvalidArgument("avg_pool2d: window larger than input");
    const std::int64_t ho = (h - window) / stride + 1, wo = (w - window) / stride + 1;
    const T inv = T(1) / static_cast<T>(window * window);

    Tensor<T> out(Shape{n, c, ho, wo});
    for (std::int64_t img = 0; img < n; ++img)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const T* plane = x->value.data() + (img * c + ch) * h * w;
            T* oplane = out.data() + (img * c + ch) * ho * wo;
            for (std::int64_t oy = 0; oy < ho; ++oy)
                for (std::int64_t ox = 0; ox < wo; ++ox) {
                    T acc = T(0);
                    for (std::int64_t ky = 0; ky < window; ++ky) {
                        const T* row = plane + (oy * stride + ky) * w + ox * stride;
                        for (std::int64_t kx = 0; kx < window; ++kx) acc += row[kx];
                    }
                    oplane[oy * wo + ox] = acc * inv;
                }
        }
    return make_op<T>(std::move(out), "avg_pool2d", {x}, [x, n, c, h, w, ho, wo, window, stride, inv](Node<T>& self) {
        Tensor<T> dx(x->value.shape());
        for (std::int64_t img = 0; img < n; ++img)
            for (std::int64_t ch = 0; ch < c; ++ch) {
                T* plane = dx.data() + (img * c + ch) * h * w;
                const T* dplane = self.grad.data() + (img * c + ch) * ho * wo;
                for (std::int64_t oy = 0; oy < ho; ++oy)
                    for (std::int64_t ox = 0; ox < wo; ++ox) {
                        const T g = dplane[oy * wo + ox] * inv;
                        for (std::int64_t ky = 0; ky < window; ++ky) {
                            T* row = plane + (oy * stride + ky) * w + ox * stride;
                            for (std::int64_t kx = 0; kx < window; ++kx) row[kx] += g;
                        }
                    }
            }
        x->accumulate(dx);
    });
}

// [N,C,H,W] -> [N,C]
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
    require_rank(x->value, 4, "global_avg_pool input");
    const std::int64_t n = x->value.dim(0), c = x->value.dim(1), hw = x->value.dim(2) * x->value.dim(3);
    Tensor<T> out(Shape{n, c});
    for (std::int64_t img = 0; img < n; ++img)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const T* plane = x->value.data() + (img * c + ch) * hw;
            double acc = 0;
            for (std::int64_t i = 0; i < hw; ++i) acc += static_cast<double>(plane[i]);
            out.at(img, ch) = static_cast<T>(acc / static_cast<double>(hw));
        }
    return make_op<T>(std::move(out), "global_avg_pool", {x}, [x, n, c, hw](Node<T>& self) {
        Tensor<T> dx(x->value.shape());
        const T inv = T(1) / static_cast<T>(hw);
        for (std::int64_t img = 0; img < n; ++img)
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T g = self.grad.at(img, ch) * inv;
                T* plane = dx.data() + (img * c + ch) * hw;
                for (std::int64_t i = 0; i < hw; ++i) plane[i] = g;
            }
        x->accumulate(dx);
    });
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

// x is [N,C,H,W] or [N,C]; gamma/beta/running stats are [C]. Train mode
// normalizes with batch statistics (biased variance) and updates the running
// buffers in place: r <- (1-momentum)*r + momentum*batch.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Var<T>& running_mean,
                  const Var<T>& running_var, Mode mode, T momentum = T(0.1), T eps = T(1e-5)) {
    const bool spatial = x->value.rank() == 4;
    if (!spatial) require_rank(x->value, 2, "batch_norm input");
    const std::int64_t n = x->value.dim(0);
    const std::int64_t c = x->value.dim(1);
    const std::int64_t hw = spatial ? x->value.dim(2) * x->value.dim(3) : 1;
    require_shape(gamma->value, Shape{c}, "batch_norm gamma");
    require_shape(beta->value, Shape{c}, "batch_norm beta");
    require_shape(running_mean->value, Shape{c}, "batch_norm running mean");
    require_shape(running_var->value, Shape{c}, "batch_norm running var");
    if (mode == Mode::Train && n < 2)
        throw InvalidArgument("batch_norm: train mode needs a batch of at least 2");

    const std::int64_t count = n * hw;
    std::vector<T> mean(static_cast<std::size_t>(c)), var(static_cast<std::size_t>(c));
    if (mode == Mode::Train) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            double acc = 0;
            for (std::int64_t img = 0; img < n; ++img) {
                const T* plane = x->value.data() + (img * c + ch) * hw;
                for (std::int64_t i = 0; i < hw; ++i) acc += static_cast<double>(plane[i]);
            }
            const double mu = acc / static_cast<double>(count);
            double vacc = 0;
            for (std::int64_t img = 0; img < n; ++img) {
                const T* plane = x->value.data() + (img * c + ch) * hw;
                for (std::int64_t i = 0; i < hw; ++i) {
                    const double d = static_cast<double>(plane[i]) - mu;
                    vacc += d * d;
                }
            }
            mean[static_cast<std::size_t>(ch)] = static_cast<T>(mu);
            var[static_cast<std::size_t>(ch)] = static_cast<T>(vacc / static_cast<double>(count));
        }
        for (std::int64_t ch = 0; ch < c; ++ch) {
            running_mean->value[ch] = (T(1) - momentum) * running_mean->value[ch] + momentum * mean[static_cast<std::size_t>(ch)];
            running_var->value[ch] = (T(1) - momentum) * running_var->value[ch] + momentum * var[static_cast<std::size_t>(ch)];
        }
    } else {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            mean[static_cast<std::size_t>(ch)] = running_mean->value[ch];
            var[static_cast<std::size_t>(ch)] = running_var->value[ch];
        }
    }

    std::vector<T> invstd(static_cast<std::size_t>(c));
    for (std::int64_t ch = 0; ch < c; ++ch)
        invstd[static_cast<std::size_t>(ch)] = T(1) / std::sqrt(var[static_cast<std::size_t>(ch)] + eps);

    Tensor<T> out(x->value.shape());
    for (std::int64_t img = 0; img < n; ++img)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const T mu = mean[static_cast<std::size_t>(ch)], is = invstd[static_cast<std::size_t>(ch)];
            const T g = gamma->value[ch], be = beta->value[ch];
            const T* plane = x->value.data() + (img * c + ch) * hw;
            T* oplane = out.data() + (img * c + ch) * hw;
            for (std::int64_t i = 0; i < hw; ++i) oplane[i] = (plane[i] - mu) * is * g + be;
        }

    const bool train = mode == Mode::Train;
    return make_op<T>(std::move(out), "batch_norm", {x, gamma, beta},
                      [x, gamma, beta, n, c, hw, count, mean, invstd, train](Node<T>& self) {
        // per channel: sum_dy and sum_dy_xhat
        std::vector<T> sum_dy(static_cast<std::size_t>(c), T(0)), sum_dy_xh(static_cast<std::size_t>(c), T(0));
        for (std::int64_t img = 0; img < n; ++img)
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T mu = mean[static_cast<std::size_t>(ch)], is = invstd[static_cast<std::size_t>(ch)];
                const T* plane = x->value.data() + (img * c + ch) * hw;
                const T* dplane = self.grad.data() + (img * c + ch) * hw;
                double s1 = 0, s2 = 0;
                for (std::int64_t i = 0; i < hw; ++i) {
                    s1 += static_cast<double>(dplane[i]);
                    s2 += static_cast<double>(dplane[i]) * static_cast<double>((plane[i] - mu) * is);
                }
                sum_dy[static_cast<std::size_t>(ch)] += static_cast<T>(s1);
                sum_dy_xh[static_cast<std::size_t>(ch)] += static_cast<T>(s2);
            }

        if (beta->requires_grad) {
            Tensor<T> gb(beta->value.shape());
            for (std::int64_t ch = 0; ch < c; ++ch) gb[ch] = sum_dy[static_cast<std::size_t>(ch)];
            beta->accumulate(gb);
        }
        if (gamma->requires_grad) {
            Tensor<T> gg(gamma->value.shape());
            for (std::int64_t ch = 0; ch < c; ++ch) gg[ch] = sum_dy_xh[static_cast<std::size_t>(ch)];
            gamma->accumulate(gg);
        }
        if (x->requires_grad) {
            Tensor<T> dx(x->value.shape());
            const T m = static_cast<T>(count);
            for (std::int64_t img = 0; img < n; ++img)
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const T mu = mean[static_cast<std::size_t>(ch)], is = invstd[static_cast<std::size_t>(ch)];
                    const T g = gamma->value[ch];
                    const T* plane = x->value.data() + (img * c + ch) * hw;
                    const T* dplane = self.grad.data() + (img * c + ch) * hw;
                    T* dxp = dx.data() + (img * c + ch) * hw;
                    if (train) {
                        const T sdy = sum_dy[static_cast<std::size_t>(ch)], sdyxh = sum_dy_xh[static_cast<std::size_t>(ch)];
                        for (std::int64_t i = 0; i < hw; ++i) {
                            const T xh = (plane[i] - mu) * is;
                            dxp[i] = (g * is / m) * (m * dplane[i] - sdy - xh * sdyxh);
                        }
                    } else {
                        for (std::int64_t i = 0; i < hw; ++i) dxp[i] = dplane[i] * g * is;
                    }
                }
            x->accumulate(dx);
        }
    });
}

// ---------------------------------------------------------------------------
// softmax family
// ---------------------------------------------------------------------------

// row-wise softmax with max-subtraction
template <typename T>
Var<T> row_softmax(const Var<T>& logits) {
    require_rank(logits->value, 2, "row_softmax input");
    const std::int64_t n = logits->value.dim(0), k = logits->value.dim(1);
    Tensor<T> out(logits->value.shape());
    for (std::int64_t i = 0; i < n; ++i) {
        const T* row = logits->value.data() + i * k;
        T mx = row[0];
        for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0;
        for (std::int64_t j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
        for (std::int64_t j = 0; j < k; ++j)
            out.at(i, j) = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / denom);
    }
    return make_op<T>(std::move(out), "row_softmax", {logits}, [logits, n, k](Node<T>& self) {
        Tensor<T> dx(logits->value.shape());
        for (std::int64_t i = 0; i < n; ++i) {
            T dot = T(0);
            for (std::int64_t j = 0; j < k; ++j) dot += self.grad.at(i, j) * self.value.at(i, j);
            for (std::int64_t j = 0; j < k; ++j)
                dx.at(i, j) = self.value.at(i, j) * (self.grad.at(i, j) - dot);
        }
        logits->accumulate(dx);
    });
}

// mean over the batch of -log softmax(logits)[label]
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const std::vector<int>& labels) {
    require_rank(logits->value, 2, "softmax_cross_entropy logits");
    const std::int64_t n = logits->value.dim(0), k = logits->value.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != n)
        throw InvalidArgument("softmax_cross_entropy: got " + std::to_string(labels.size()) + " labels for batch " +
                              std::to_string(n));
    for (int lbl : labels)
        if (lbl < 0 || lbl >= k) throw InvalidArgument("softmax_cross_entropy: label out of range");

    Tensor<T> probs(logits->value.shape());
    double loss = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const T* row = logits->value.data() + i * k;
        T mx = row[0];
        for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0;
        for (std::int64_t j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
        const double logdenom = std::log(denom);
        for (std::int64_t j = 0; j < k; ++j)
            probs.at(i, j) = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / denom);
        loss -= static_cast<double>(row[labels[static_cast<std::size_t>(i)]] - mx) - logdenom;
    }
    Tensor<T> out(Shape{1});
    out[0] = static_cast<T>(loss / static_cast<double>(n));

    return make_op<T>(std::move(out), "softmax_cross_entropy", {logits},
                      [logits, labels, probs = std::move(probs), n, k](Node<T>& self) {
        // d logits = (softmax - one_hot) / N
        Tensor<T> dx(logits->value.shape());
        const T scale = self.grad[0] / static_cast<T>(n);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < k; ++j) {
                T v = probs.at(i, j);
                if (j == labels[static_cast<std::size_t>(i)]) v -= T(1);
                dx.at(i, j) = v * scale;
            }
        logits->accumulate(dx);
    });
}

// Softmax per row restricted to mask!=0 entries; exact zeros elsewhere. The
// mask is a constant. Rows with empty support are rejected.
template <typename T>
Var<T> masked_row_softmax(const Var<T>& scores, const Tensor<T>& mask) {
    require_rank(scores->value, 2, "masked_row_softmax scores");
    if (mask.shape() != scores->value.shape()) throw InvalidArgument("masked_row_softmax: mask shape mismatch");
    const std::int64_t n = scores->value.dim(0), k = scores->value.dim(1);
    Tensor<T> out(scores->value.shape());
    for (std::int64_t i = 0; i < n; ++i) {
        T mx = T(0);
        bool any = false;
        for (std::int64_t j = 0; j < k; ++j)
            if (mask.at(i, j) != T(0)) {
                const T v = scores->value.at(i, j);
                mx = any ? std::max(mx, v) : v;
                any = true;
            }
        if (!any) throw InvalidArgument("masked_row_softmax: row " + std::to_string(i) + " has no support");
        double denom = 0;
        for (std::int64_t j = 0; j < k; ++j)
            if (mask.at(i, j) != T(0)) denom += std::exp(static_cast<double>(scores->value.at(i, j) - mx));
        for (std::int64_t j = 0; j < k; ++j)
            out.at(i, j) = mask.at(i, j) != T(0)
                               ? static_cast<T>(std::exp(static_cast<double>(scores->value.at(i, j) - mx)) / denom)
                               : T(0);
    }
    return make_op<T>(std::move(out), "masked_row_softmax", {scores}, [scores, mask, n, k](Node<T>& self) {
        Tensor<T> dx(scores->value.shape());
        for (std::int64_t i = 0; i < n; ++i) {
            T dot = T(0);
            for (std::int64_t j = 0; j < k; ++j) dot += self.grad.at(i, j) * self.value.at(i, j);
            for (std::int64_t j = 0; j < k; ++j)
                dx.at(i, j) = mask.at(i, j) != T(0) ? self.value.at(i, j) * (self.grad.at(i, j) - dot) : T(0);
        }
        scores->accumulate(dx);
    });
}

// e[i][j] = col[i] + row[j], the raw pairwise attention scores
template <typename T>
Var<T> pair_sum(const Var<T>& col, const Var<T>& row) {
    require_rank(col->value, 2, "pair_sum col");
    require_rank(row->value, 2, "pair_sum row");
    const std::int64_t n = col->value.dim(0);
    if (col->value.dim(1) != 1 || row->value.dim(1) != 1 || row->value.dim(0) != n)
        throw InvalidArgument("pair_sum expects two [n,1] vectors");
    Tensor<T> out(Shape{n, n});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j) out.at(i, j) = col->value[i] + row->value[j];
    return make_op<T>(std::move(out), "pair_sum", {col, row}, [col, row, n](Node<T>& self) {
        if (col->requires_grad) {
            Tensor<T> gc(col->value.shape());
            for (std::int64_t i = 0; i < n; ++i) {
                T acc = T(0);
                for (std::int64_t j = 0; j < n; ++j) acc += self.grad.at(i, j);
                gc[i] = acc;
            }
            col->accumulate(gc);
        }
        if (row->requires_grad) {
            Tensor<T> gr(row->value.shape());
            for (std::int64_t j = 0; j < n; ++j) {
                T acc = T(0);
                for (std::int64_t i = 0; i < n; ++i) acc += self.grad.at(i, j);
                gr[j] = acc;
            }
            row->accumulate(gr);
        }
    });
}

} // namespace stegograph
