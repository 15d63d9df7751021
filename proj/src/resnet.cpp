#include "hsi/resnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "hsi/rng.hpp"
#include "hsi/synthgen.hpp"

namespace hsi {

namespace {

// Shared per-item kernels are kept out-of-line so the serial and OpenMP
// drivers execute the same machine code and stay bit-identical.
#if defined(__GNUC__)
#define HSI_NOINLINE __attribute__((noinline))
#else
#define HSI_NOINLINE
#endif

struct BlockPlan {
    uint32_t in_ch = 0, out_ch = 0;
    bool has_proj = false;
    size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, wp = 0, bp = 0;
};

struct NetPlan {
    uint32_t n = 0, bands = 0, stem_ch = 0, stride = 1, s = 0, classes = 0;
    bool relu = true;
    size_t stem_w = 0, stem_b = 0;
    std::vector<BlockPlan> blocks;
    size_t fc_w = 0, fc_b = 0;
    size_t total = 0;
    uint32_t last_ch = 0;
    std::vector<float> in_mean, in_gain;  // empty = no input standardization
};

NetPlan make_plan(const NetConfig& cfg) {
    cfg.validate();
    NetPlan p;
    p.n = cfg.input_n;
    p.bands = cfg.input_bands;
    p.stem_ch = cfg.stem_channels;
    p.stride = cfg.stem_stride;
    p.classes = cfg.num_classes;
    p.relu = cfg.use_rectifier;
    p.in_mean = cfg.input_mean;
    p.in_gain = cfg.input_gain;
    p.s = (cfg.input_n - 1) / cfg.stem_stride + 1;  // 3x3 kernel, zero pad 1

    size_t off = 0;
    p.stem_w = off;
    off += 9ull * p.bands * p.stem_ch;
    p.stem_b = off;
    off += p.stem_ch;
    uint32_t in_ch = p.stem_ch;
    for (uint32_t i = 0; i < cfg.num_blocks; ++i) {
        BlockPlan b;
        b.in_ch = in_ch;
        b.out_ch = cfg.channels_per_stage[i];
        b.w1 = off;
        off += 9ull * b.in_ch * b.out_ch;
        b.b1 = off;
        off += b.out_ch;
        b.w2 = off;
        off += 9ull * b.out_ch * b.out_ch;
        b.b2 = off;
        off += b.out_ch;
        b.has_proj = b.in_ch != b.out_ch;
        if (b.has_proj) {
            b.wp = off;
            off += static_cast<size_t>(b.in_ch) * b.out_ch;
            b.bp = off;
            off += b.out_ch;
        }
        p.blocks.push_back(b);
        in_ch = b.out_ch;
    }
    p.last_ch = in_ch;
    p.fc_w = off;
    off += static_cast<size_t>(in_ch) * p.classes;
    p.fc_b = off;
    off += p.classes;
    p.total = off;
    return p;
}

std::vector<LayerSpan> make_layer_spans(const NetPlan& plan) {
    std::vector<LayerSpan> spans;
    const auto add = [&](std::string name, size_t w_off, size_t w_cnt, size_t b_off,
                         size_t b_cnt) {
        spans.push_back({std::move(name), w_off, w_cnt, b_off, b_cnt});
    };
    add("stem", plan.stem_w, 9ull * plan.bands * plan.stem_ch, plan.stem_b, plan.stem_ch);
    for (size_t i = 0; i < plan.blocks.size(); ++i) {
        const BlockPlan& b = plan.blocks[i];
        const std::string prefix = "block" + std::to_string(i);
        add(prefix + ".conv1", b.w1, 9ull * b.in_ch * b.out_ch, b.b1, b.out_ch);
        add(prefix + ".conv2", b.w2, 9ull * b.out_ch * b.out_ch, b.b2, b.out_ch);
        if (b.has_proj)
            add(prefix + ".proj", b.wp, static_cast<size_t>(b.in_ch) * b.out_ch, b.bp,
                b.out_ch);
    }
    add("head", plan.fc_w, static_cast<size_t>(plan.last_ch) * plan.classes, plan.fc_b,
        plan.classes);
    return spans;
}

// ---- layer kernels (templated so the gradient check can run in double) ----

template <typename T>
HSI_NOINLINE void conv3x3(const T* in, uint32_t s_in, uint32_t ci, const T* w, const T* bias,
                          uint32_t co, uint32_t stride, T* out, uint32_t s_out) {
    for (uint32_t r = 0; r < s_out; ++r) {
        for (uint32_t c = 0; c < s_out; ++c) {
            T* o = out + (static_cast<size_t>(r) * s_out + c) * co;
            for (uint32_t k = 0; k < co; ++k) o[k] = bias[k];
            const int64_t base_r = static_cast<int64_t>(r) * stride - 1;
            const int64_t base_c = static_cast<int64_t>(c) * stride - 1;
            for (uint32_t ky = 0; ky < 3; ++ky) {
                const int64_t ir = base_r + ky;
                if (ir < 0 || ir >= s_in) continue;
                for (uint32_t kx = 0; kx < 3; ++kx) {
                    const int64_t ic = base_c + kx;
                    if (ic < 0 || ic >= s_in) continue;
                    const T* px = in + (static_cast<size_t>(ir) * s_in + ic) * ci;
                    const T* wk = w + (static_cast<size_t>(ky) * 3 + kx) * ci * co;
                    for (uint32_t a = 0; a < ci; ++a) {
                        const T xv = px[a];
                        const T* wr = wk + static_cast<size_t>(a) * co;
                        for (uint32_t k = 0; k < co; ++k) o[k] += xv * wr[k];
                    }
                }
            }
        }
    }
}

template <typename T>
HSI_NOINLINE void conv1x1(const T* in, uint32_t s, uint32_t ci, const T* w, const T* bias,
                          uint32_t co, T* out) {
    const size_t pix = static_cast<size_t>(s) * s;
    for (size_t p = 0; p < pix; ++p) {
        const T* px = in + p * ci;
        T* o = out + p * co;
        for (uint32_t k = 0; k < co; ++k) o[k] = bias[k];
        for (uint32_t a = 0; a < ci; ++a) {
            const T xv = px[a];
            const T* wr = w + static_cast<size_t>(a) * co;
            for (uint32_t k = 0; k < co; ++k) o[k] += xv * wr[k];
        }
    }
}

// dW (same layout as W) and db accumulate.
template <typename T>
HSI_NOINLINE void conv3x3_grad_wb(const T* in, uint32_t s_in, uint32_t ci, const T* dy,
                                  uint32_t s_out, uint32_t co, uint32_t stride, T* dw, T* db) {
    for (uint32_t r = 0; r < s_out; ++r) {
        for (uint32_t c = 0; c < s_out; ++c) {
            const T* dyo = dy + (static_cast<size_t>(r) * s_out + c) * co;
            for (uint32_t k = 0; k < co; ++k) db[k] += dyo[k];
            const int64_t base_r = static_cast<int64_t>(r) * stride - 1;
            const int64_t base_c = static_cast<int64_t>(c) * stride - 1;
            for (uint32_t ky = 0; ky < 3; ++ky) {
                const int64_t ir = base_r + ky;
                if (ir < 0 || ir >= s_in) continue;
                for (uint32_t kx = 0; kx < 3; ++kx) {
                    const int64_t ic = base_c + kx;
                    if (ic < 0 || ic >= s_in) continue;
                    const T* px = in + (static_cast<size_t>(ir) * s_in + ic) * ci;
                    T* dwk = dw + (static_cast<size_t>(ky) * 3 + kx) * ci * co;
                    for (uint32_t a = 0; a < ci; ++a) {
                        const T xv = px[a];
                        T* dwr = dwk + static_cast<size_t>(a) * co;
                        for (uint32_t k = 0; k < co; ++k) dwr[k] += xv * dyo[k];
                    }
                }
            }
        }
    }
}

// dx accumulates; wt is the transposed weight [ky][kx][co][ci].
template <typename T>
HSI_NOINLINE void conv3x3_grad_x(const T* dy, uint32_t s_out, uint32_t co, const T* wt,
                                 uint32_t ci, uint32_t s_in, uint32_t stride, T* dx) {
    for (uint32_t r = 0; r < s_out; ++r) {
        for (uint32_t c = 0; c < s_out; ++c) {
            const T* dyo = dy + (static_cast<size_t>(r) * s_out + c) * co;
            const int64_t base_r = static_cast<int64_t>(r) * stride - 1;
            const int64_t base_c = static_cast<int64_t>(c) * stride - 1;
            for (uint32_t ky = 0; ky < 3; ++ky) {
                const int64_t ir = base_r + ky;
                if (ir < 0 || ir >= s_in) continue;
                for (uint32_t kx = 0; kx < 3; ++kx) {
                    const int64_t ic = base_c + kx;
                    if (ic < 0 || ic >= s_in) continue;
                    T* dxp = dx + (static_cast<size_t>(ir) * s_in + ic) * ci;
                    const T* wtk = wt + (static_cast<size_t>(ky) * 3 + kx) * co * ci;
                    for (uint32_t k = 0; k < co; ++k) {
                        const T g = dyo[k];
                        const T* wr = wtk + static_cast<size_t>(k) * ci;
                        for (uint32_t a = 0; a < ci; ++a) dxp[a] += g * wr[a];
                    }
                }
            }
        }
    }
}

template <typename T>
HSI_NOINLINE void conv1x1_grad(const T* in, uint32_t s, uint32_t ci, const T* dy, uint32_t co,
                               const T* wt, T* dx, T* dw, T* db) {
    const size_t pix = static_cast<size_t>(s) * s;
    for (size_t p = 0; p < pix; ++p) {
        const T* px = in + p * ci;
        const T* dyo = dy + p * co;
        T* dxp = dx + p * ci;
        for (uint32_t k = 0; k < co; ++k) db[k] += dyo[k];
        for (uint32_t a = 0; a < ci; ++a) {
            const T xv = px[a];
            T* dwr = dw + static_cast<size_t>(a) * co;
            for (uint32_t k = 0; k < co; ++k) dwr[k] += xv * dyo[k];
        }
        for (uint32_t k = 0; k < co; ++k) {
            const T g = dyo[k];
            const T* wr = wt + static_cast<size_t>(k) * ci;
            for (uint32_t a = 0; a < ci; ++a) dxp[a] += g * wr[a];
        }
    }
}

template <typename T>
void relu_inplace(std::vector<T>& x) {
    for (T& v : x)
        if (v < T(0)) v = T(0);
}

// Transposed copy of every conv weight (same offsets); the head is unused.
template <typename T>
std::vector<T> transpose_weights(const NetPlan& plan, const T* params) {
    std::vector<T> wt(plan.total, T(0));
    const auto t3 = [&](size_t off, uint32_t ci, uint32_t co) {
        for (int tap = 0; tap < 9; ++tap)
            for (uint32_t a = 0; a < ci; ++a)
                for (uint32_t k = 0; k < co; ++k)
                    wt[off + (static_cast<size_t>(tap) * co + k) * ci + a] =
                        params[off + (static_cast<size_t>(tap) * ci + a) * co + k];
    };
    t3(plan.stem_w, plan.bands, plan.stem_ch);
    for (const BlockPlan& b : plan.blocks) {
        t3(b.w1, b.in_ch, b.out_ch);
        t3(b.w2, b.out_ch, b.out_ch);
        if (b.has_proj)
            for (uint32_t a = 0; a < b.in_ch; ++a)
                for (uint32_t k = 0; k < b.out_ch; ++k)
                    wt[b.wp + static_cast<size_t>(k) * b.in_ch + a] =
                        params[b.wp + static_cast<size_t>(a) * b.out_ch + k];
    }
    return wt;
}

template <typename T>
struct BlockAct {
    std::vector<T> z1, a1, z2, sum, out;
};

template <typename T>
struct ItemWork {
    std::vector<T> input, stem_z, stem_a;
    std::vector<BlockAct<T>> blocks;
    std::vector<T> gap, logits, probs;
};

template <typename T>
void forward_item(const NetPlan& plan, const T* P, const float* patch, ItemWork<T>& w) {
    const size_t in_sz = static_cast<size_t>(plan.n) * plan.n * plan.bands;
    w.input.resize(in_sz);
    if (plan.in_mean.empty()) {
        for (size_t i = 0; i < in_sz; ++i) w.input[i] = static_cast<T>(patch[i]);
    } else {
        for (size_t i = 0; i < in_sz; ++i) {
            const uint32_t b = static_cast<uint32_t>(i % plan.bands);
            w.input[i] = (static_cast<T>(patch[i]) - static_cast<T>(plan.in_mean[b])) *
                         static_cast<T>(plan.in_gain[b]);
        }
    }

    const size_t pix = static_cast<size_t>(plan.s) * plan.s;
    w.stem_z.resize(pix * plan.stem_ch);
    conv3x3(w.input.data(), plan.n, plan.bands, P + plan.stem_w, P + plan.stem_b, plan.stem_ch,
            plan.stride, w.stem_z.data(), plan.s);
    w.stem_a = w.stem_z;
    if (plan.relu) relu_inplace(w.stem_a);

    const std::vector<T>* x = &w.stem_a;
    w.blocks.resize(plan.blocks.size());
    for (size_t i = 0; i < plan.blocks.size(); ++i) {
        const BlockPlan& b = plan.blocks[i];
        BlockAct<T>& act = w.blocks[i];
        act.z1.resize(pix * b.out_ch);
        conv3x3(x->data(), plan.s, b.in_ch, P + b.w1, P + b.b1, b.out_ch, 1, act.z1.data(),
                plan.s);
        act.a1 = act.z1;
        if (plan.relu) relu_inplace(act.a1);
        act.z2.resize(pix * b.out_ch);
        conv3x3(act.a1.data(), plan.s, b.out_ch, P + b.w2, P + b.b2, b.out_ch, 1, act.z2.data(),
                plan.s);
        act.sum = act.z2;
        if (b.has_proj) {
            std::vector<T> skip(pix * b.out_ch);
            conv1x1(x->data(), plan.s, b.in_ch, P + b.wp, P + b.bp, b.out_ch, skip.data());
            for (size_t q = 0; q < act.sum.size(); ++q) act.sum[q] += skip[q];
        } else {
            for (size_t q = 0; q < act.sum.size(); ++q) act.sum[q] += (*x)[q];
        }
        act.out = act.sum;
        if (plan.relu) relu_inplace(act.out);
        x = &act.out;
    }

    w.gap.assign(plan.last_ch, T(0));
    for (size_t p = 0; p < pix; ++p)
        for (uint32_t k = 0; k < plan.last_ch; ++k) w.gap[k] += (*x)[p * plan.last_ch + k];
    for (uint32_t k = 0; k < plan.last_ch; ++k) w.gap[k] /= static_cast<T>(pix);

    w.logits.assign(plan.classes, T(0));
    const T* FW = P + plan.fc_w;
    const T* FB = P + plan.fc_b;
    for (uint32_t k = 0; k < plan.classes; ++k) w.logits[k] = FB[k];
    for (uint32_t a = 0; a < plan.last_ch; ++a) {
        const T xv = w.gap[a];
        const T* wr = FW + static_cast<size_t>(a) * plan.classes;
        for (uint32_t k = 0; k < plan.classes; ++k) w.logits[k] += xv * wr[k];
    }
}

// Log-space softmax cross-entropy; fills w.probs.
template <typename T>
T softmax_ce(ItemWork<T>& w, int label_index) {
    T mx = w.logits[0];
    for (T v : w.logits) mx = std::max(mx, v);
    w.probs.resize(w.logits.size());
    T sum = T(0);
    for (size_t k = 0; k < w.logits.size(); ++k) {
        w.probs[k] = std::exp(w.logits[k] - mx);
        sum += w.probs[k];
    }
    for (T& p : w.probs) p /= sum;
    return std::log(sum) - (w.logits[label_index] - mx);
}

template <typename T>
int argmax_index(const T* values, uint32_t count) {
    int best = 0;
    for (uint32_t k = 1; k < count; ++k)
        if (values[k] > values[best]) best = static_cast<int>(k);
    return best;
}

// Per-item reverse pass; g is this item's gradient buffer (zeroed by caller).
template <typename T>
void backward_item(const NetPlan& plan, const T* P, const T* PT, ItemWork<T>& w,
                   int label_index, T* g) {
    const size_t pix = static_cast<size_t>(plan.s) * plan.s;
    std::vector<T> dlogits = w.probs;
    dlogits[label_index] -= T(1);

    T* gW = g + plan.fc_w;
    T* gB = g + plan.fc_b;
    for (uint32_t k = 0; k < plan.classes; ++k) gB[k] += dlogits[k];
    for (uint32_t a = 0; a < plan.last_ch; ++a) {
        const T xv = w.gap[a];
        T* gr = gW + static_cast<size_t>(a) * plan.classes;
        for (uint32_t k = 0; k < plan.classes; ++k) gr[k] += xv * dlogits[k];
    }
    std::vector<T> dgap(plan.last_ch, T(0));
    const T* FW = P + plan.fc_w;
    for (uint32_t a = 0; a < plan.last_ch; ++a) {
        const T* wr = FW + static_cast<size_t>(a) * plan.classes;
        T acc = T(0);
        for (uint32_t k = 0; k < plan.classes; ++k) acc += dlogits[k] * wr[k];
        dgap[a] = acc;
    }

    std::vector<T> dout(pix * plan.last_ch);
    const T inv_pix = T(1) / static_cast<T>(pix);
    for (size_t p = 0; p < pix; ++p)
        for (uint32_t k = 0; k < plan.last_ch; ++k)
            dout[p * plan.last_ch + k] = dgap[k] * inv_pix;

    for (size_t i = plan.blocks.size(); i-- > 0;) {
        const BlockPlan& b = plan.blocks[i];
        BlockAct<T>& act = w.blocks[i];
        if (plan.relu)
            for (size_t q = 0; q < dout.size(); ++q)
                if (act.sum[q] <= T(0)) dout[q] = T(0);

        const std::vector<T>& x = i == 0 ? w.stem_a : w.blocks[i - 1].out;
        std::vector<T> dx(pix * b.in_ch, T(0));
        if (b.has_proj) {
            conv1x1_grad(x.data(), plan.s, b.in_ch, dout.data(), b.out_ch, PT + b.wp, dx.data(),
                         g + b.wp, g + b.bp);
        } else {
            for (size_t q = 0; q < dout.size(); ++q) dx[q] += dout[q];
        }

        std::vector<T> da1(pix * b.out_ch, T(0));
        conv3x3_grad_wb(act.a1.data(), plan.s, b.out_ch, dout.data(), plan.s, b.out_ch, 1,
                        g + b.w2, g + b.b2);
        conv3x3_grad_x(dout.data(), plan.s, b.out_ch, PT + b.w2, b.out_ch, plan.s, 1,
                       da1.data());
        if (plan.relu)
            for (size_t q = 0; q < da1.size(); ++q)
                if (act.z1[q] <= T(0)) da1[q] = T(0);
        conv3x3_grad_wb(x.data(), plan.s, b.in_ch, da1.data(), plan.s, b.out_ch, 1, g + b.w1,
                        g + b.b1);
        conv3x3_grad_x(da1.data(), plan.s, b.out_ch, PT + b.w1, b.in_ch, plan.s, 1, dx.data());
        dout = std::move(dx);
    }

    if (plan.relu)
        for (size_t q = 0; q < dout.size(); ++q)
            if (w.stem_z[q] <= T(0)) dout[q] = T(0);
    conv3x3_grad_wb(w.input.data(), plan.n, plan.bands, dout.data(), plan.s, plan.stem_ch,
                    plan.stride, g + plan.stem_w, g + plan.stem_b);
}

std::vector<int> label_indices(const std::vector<int>& labels) {
    std::vector<int> idx(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) idx[i] = class_index(labels[i]);
    return idx;
}

void check_batch(const NetPlan& plan, const PatchSet& batch) {
    if (batch.patches.empty()) fail(errc::empty_input, "empty batch");
    if (batch.n != plan.n || batch.bands != plan.bands)
        fail(errc::dim_mismatch, "patch dimensions differ from net config");
}

// Shared float-precision batch driver. Per-item gradients land in per-item
// slots; the reduction over items is serial and in item order.
struct BatchResult {
    double loss = 0.0;
    uint64_t correct = 0;
    std::vector<float> grad;
    std::vector<int> predictions;
};

BatchResult run_batch(const NetPlan& plan, const float* params,
                      const std::vector<const float*>& items, const std::vector<int>& label_idx,
                      bool want_grad, bool parallel) {
    const int64_t m = static_cast<int64_t>(items.size());
    std::vector<float> wt;
    if (want_grad) wt = transpose_weights(plan, params);

    std::vector<double> item_loss(m, 0.0);
    std::vector<int> preds(m, 0);
    std::vector<float> item_grads;
    if (want_grad) item_grads.assign(static_cast<size_t>(m) * plan.total, 0.0f);

    const auto body = [&](int64_t i) {
        ItemWork<float> w;
        forward_item(plan, params, items[i], w);
        if (!label_idx.empty()) item_loss[i] = softmax_ce(w, label_idx[i]);
        preds[i] = argmax_index(w.logits.data(), plan.classes);
        if (want_grad)
            backward_item(plan, params, wt.data(), w, label_idx[i],
                          item_grads.data() + static_cast<size_t>(i) * plan.total);
    };
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int64_t i = 0; i < m; ++i) body(i);
    } else {
        for (int64_t i = 0; i < m; ++i) body(i);
    }

    BatchResult res;
    res.predictions = std::move(preds);
    for (int64_t i = 0; i < m; ++i) {
        res.loss += item_loss[i];
        if (!label_idx.empty() && res.predictions[i] == label_idx[i]) ++res.correct;
    }
    res.loss /= static_cast<double>(m);
    if (want_grad) {
        std::vector<double> acc(plan.total, 0.0);
        for (int64_t i = 0; i < m; ++i) {
            const float* gi = item_grads.data() + static_cast<size_t>(i) * plan.total;
            for (size_t k = 0; k < plan.total; ++k) acc[k] += gi[k];
        }
        res.grad.resize(plan.total);
        for (size_t k = 0; k < plan.total; ++k)
            res.grad[k] = static_cast<float>(acc[k] / static_cast<double>(m));
    }
    return res;
}

std::vector<const float*> item_pointers(const PatchSet& batch) {
    std::vector<const float*> items(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) items[i] = batch.patches[i].data.data();
    return items;
}

}  // namespace

void NetConfig::validate() const {
    if (input_n == 0 || input_bands == 0) fail(errc::bad_argument, "input dims must be nonzero");
    if (stem_channels < 1) fail(errc::bad_argument, "stem_channels must be >= 1");
    if (stem_stride < 1) fail(errc::bad_argument, "stem_stride must be >= 1");
    if (num_blocks < 1) fail(errc::bad_argument, "num_blocks must be >= 1");
    if (channels_per_stage.size() != num_blocks)
        fail(errc::dim_mismatch, "channels_per_stage length != num_blocks");
    for (uint32_t c : channels_per_stage)
        if (c < 1) fail(errc::bad_argument, "channel counts must be >= 1");
    if (num_classes != kRatingClasses.size())
        fail(errc::bad_argument, "num_classes must match the rating vocabulary");
    if (input_mean.size() != input_gain.size())
        fail(errc::dim_mismatch, "input_mean and input_gain lengths differ");
    if (!input_mean.empty() && input_mean.size() != input_bands)
        fail(errc::dim_mismatch, "input standardization length != input_bands");
}

size_t expected_param_count(const NetConfig& config) {
    config.validate();
    size_t total = 9ull * config.input_bands * config.stem_channels + config.stem_channels;
    uint32_t in_ch = config.stem_channels;
    for (uint32_t i = 0; i < config.num_blocks; ++i) {
        const uint32_t out_ch = config.channels_per_stage[i];
        total += 9ull * in_ch * out_ch + out_ch;    // conv1
        total += 9ull * out_ch * out_ch + out_ch;   // conv2
        if (in_ch != out_ch) total += static_cast<size_t>(in_ch) * out_ch + out_ch;  // proj
        in_ch = out_ch;
    }
    total += static_cast<size_t>(in_ch) * config.num_classes + config.num_classes;
    return total;
}

ResidualNet init_net(const NetConfig& config) {
    const NetPlan plan = make_plan(config);
    ResidualNet net;
    net.config = config;
    net.layers = make_layer_spans(plan);
    net.params.assign(plan.total, 0.0f);

    Rng rng(config.seed);
    for (const LayerSpan& layer : net.layers) {
        // weight_count / bias_count = kernel taps * input channels = fan-in,
        // for 3x3 convs, 1x1 projections, and the head alike.
        const size_t fan_in = layer.weight_count / layer.bias_count;
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (size_t k = 0; k < layer.weight_count; ++k)
            net.params[layer.weight_offset + k] = static_cast<float>(scale * rng.normal());
        // biases stay zero
    }
    return net;
}

std::vector<float> residual_block_forward(const ResidualNet& net, size_t block_index,
                                          const std::vector<float>& x, uint32_t spatial) {
    const NetPlan plan = make_plan(net.config);
    if (block_index >= plan.blocks.size()) fail(errc::index_out_of_range, "no such block");
    const BlockPlan& b = plan.blocks[block_index];
    const size_t pix = static_cast<size_t>(spatial) * spatial;
    if (x.size() != pix * b.in_ch)
        fail(errc::dim_mismatch, "input size != spatial^2 * block input channels");

    const float* P = net.params.data();
    std::vector<float> z1(pix * b.out_ch);
    conv3x3(x.data(), spatial, b.in_ch, P + b.w1, P + b.b1, b.out_ch, 1, z1.data(), spatial);
    std::vector<float> a1 = z1;
    if (plan.relu) relu_inplace(a1);
    std::vector<float> y(pix * b.out_ch);
    conv3x3(a1.data(), spatial, b.out_ch, P + b.w2, P + b.b2, b.out_ch, 1, y.data(), spatial);
    if (b.has_proj) {
        std::vector<float> skip(pix * b.out_ch);
        conv1x1(x.data(), spatial, b.in_ch, P + b.wp, P + b.bp, b.out_ch, skip.data());
        for (size_t q = 0; q < y.size(); ++q) y[q] += skip[q];
    } else {
        for (size_t q = 0; q < y.size(); ++q) y[q] += x[q];
    }
    if (plan.relu) relu_inplace(y);
    return y;
}

namespace {

std::vector<float> forward_impl(const ResidualNet& net, const PatchSet& batch, bool parallel) {
    const NetPlan plan = make_plan(net.config);
    check_batch(plan, batch);
    const auto items = item_pointers(batch);
    std::vector<float> logits(batch.size() * plan.classes);
    const int64_t m = static_cast<int64_t>(batch.size());
    const auto body = [&](int64_t i) {
        ItemWork<float> w;
        forward_item(plan, net.params.data(), items[i], w);
        std::copy(w.logits.begin(), w.logits.end(),
                  logits.begin() + static_cast<size_t>(i) * plan.classes);
    };
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int64_t i = 0; i < m; ++i) body(i);
    } else {
        for (int64_t i = 0; i < m; ++i) body(i);
    }
    return logits;
}

}  // namespace

std::vector<float> forward(const ResidualNet& net, const PatchSet& batch) {
    return forward_impl(net, batch, true);
}

std::vector<float> forward_serial(const ResidualNet& net, const PatchSet& batch) {
    return forward_impl(net, batch, false);
}

namespace {

std::pair<double, std::vector<float>> loss_and_grad_impl(const ResidualNet& net,
                                                         const PatchSet& batch,
                                                         const std::vector<int>& labels,
                                                         bool parallel) {
    const NetPlan plan = make_plan(net.config);
    check_batch(plan, batch);
    if (labels.size() != batch.size())
        fail(errc::dim_mismatch, "label count differs from batch size");
    BatchResult res = run_batch(plan, net.params.data(), item_pointers(batch),
                                label_indices(labels), true, parallel);
    return {res.loss, std::move(res.grad)};
}

}  // namespace

std::pair<double, std::vector<float>> loss_and_grad(const ResidualNet& net,
                                                    const PatchSet& batch,
                                                    const std::vector<int>& labels) {
    return loss_and_grad_impl(net, batch, labels, true);
}

std::pair<double, std::vector<float>> loss_and_grad_serial(const ResidualNet& net,
                                                           const PatchSet& batch,
                                                           const std::vector<int>& labels) {
    return loss_and_grad_impl(net, batch, labels, false);
}

double gradient_check(const ResidualNet& net, const PatchSet& batch, double step,
                      size_t corrupt_param) {
    const NetPlan plan = make_plan(net.config);
    check_batch(plan, batch);
    const auto items = item_pointers(batch);
    const auto idx = label_indices(set_labels(batch));
    const int64_t m = static_cast<int64_t>(batch.size());

    std::vector<double> params(net.params.begin(), net.params.end());
    const auto loss_at = [&](const double* P) {
        double total = 0.0;
        for (int64_t i = 0; i < m; ++i) {
            ItemWork<double> w;
            forward_item(plan, P, items[i], w);
            total += softmax_ce(w, idx[i]);
        }
        return total / static_cast<double>(m);
    };

    // Analytic gradient from the same double-instantiated layer code.
    const std::vector<double> wt = transpose_weights(plan, params.data());
    std::vector<double> analytic(plan.total, 0.0);
    {
        std::vector<double> g(plan.total);
        for (int64_t i = 0; i < m; ++i) {
            ItemWork<double> w;
            forward_item(plan, params.data(), items[i], w);
            softmax_ce(w, idx[i]);
            std::fill(g.begin(), g.end(), 0.0);
            backward_item(plan, params.data(), wt.data(), w, idx[i], g.data());
            for (size_t k = 0; k < plan.total; ++k) analytic[k] += g[k];
        }
        for (double& v : analytic) v /= static_cast<double>(m);
    }
    if (corrupt_param != SIZE_MAX) {
        if (corrupt_param >= plan.total) fail(errc::index_out_of_range, "corrupt_param index");
        analytic[corrupt_param] *= 1.1;
    }

    double max_rel = 0.0;
    for (size_t k = 0; k < plan.total; ++k) {
        const double saved = params[k];
        params[k] = saved + step;
        const double up = loss_at(params.data());
        params[k] = saved - step;
        const double down = loss_at(params.data());
        params[k] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double rel = std::abs(analytic[k] - numeric) /
                           std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

namespace {

double accuracy_on(const NetPlan& plan, const float* params, const PatchSet& set) {
    if (set.patches.empty()) return 0.0;
    const BatchResult res =
        run_batch(plan, params, item_pointers(set), label_indices(set_labels(set)), false, true);
    return static_cast<double>(res.correct) / static_cast<double>(set.size());
}

}  // namespace

namespace {

// Per-band mean and inverse standard deviation over every pixel of the set,
// accumulated serially in double so the result is thread-count independent.
void band_standardization(const PatchSet& set, std::vector<float>& mean,
                          std::vector<float>& gain) {
    const uint32_t bands = set.bands;
    std::vector<double> sum(bands, 0.0), sumsq(bands, 0.0);
    size_t count = 0;
    for (const Patch& p : set.patches) {
        for (size_t i = 0; i < p.data.size(); ++i) {
            const double v = p.data[i];
            sum[i % bands] += v;
            sumsq[i % bands] += v * v;
        }
        count += p.data.size() / bands;
    }
    mean.resize(bands);
    gain.resize(bands);
    for (uint32_t b = 0; b < bands; ++b) {
        const double m = sum[b] / static_cast<double>(count);
        const double var = std::max(0.0, sumsq[b] / static_cast<double>(count) - m * m);
        mean[b] = static_cast<float>(m);
        gain[b] = static_cast<float>(1.0 / std::max(std::sqrt(var), 1e-6));
    }
}

}  // namespace

std::pair<ResidualNet, TrainReport> train(ResidualNet net, const SplitResult& split,
                                          const TrainOptions& options) {
    if (net.config.input_mean.empty() && !split.train.patches.empty())
        band_standardization(split.train, net.config.input_mean, net.config.input_gain);
    const NetPlan plan = make_plan(net.config);
    check_batch(plan, split.train);
    if (options.batch_size < 1) fail(errc::bad_argument, "batch_size must be >= 1");
    const std::vector<const float*> items = item_pointers(split.train);
    const std::vector<int> idx = label_indices(set_labels(split.train));
    const size_t n = items.size();

    TrainReport report;
    std::vector<float> velocity(plan.total, 0.0f);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(options.seed);

    double lr = options.lr;
    const uint32_t milestone1 = static_cast<uint32_t>(0.60 * options.epochs);
    const uint32_t milestone2 = static_cast<uint32_t>(0.85 * options.epochs);

    for (uint32_t epoch = 0; epoch < options.epochs; ++epoch) {
        if (epoch > 0 && (epoch == milestone1 || epoch == milestone2)) lr *= options.lr_decay;
        rng.shuffle(order);

        double loss_sum = 0.0;
        uint64_t correct = 0;
        for (size_t start = 0; start < n; start += options.batch_size) {
            const size_t end = std::min(n, start + options.batch_size);
            std::vector<const float*> batch_items(end - start);
            std::vector<int> batch_idx(end - start);
            for (size_t i = start; i < end; ++i) {
                batch_items[i - start] = items[order[i]];
                batch_idx[i - start] = idx[order[i]];
            }
            BatchResult res =
                run_batch(plan, net.params.data(), batch_items, batch_idx, true, true);
            loss_sum += res.loss * static_cast<double>(end - start);
            correct += res.correct;

            const float lr_f = static_cast<float>(lr);
            const float mu = static_cast<float>(options.momentum);
            const int64_t total = static_cast<int64_t>(plan.total);
#pragma omp parallel for schedule(static)
            for (int64_t k = 0; k < total; ++k) {
                velocity[k] = mu * velocity[k] + res.grad[k];
                net.params[k] -= lr_f * velocity[k];
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
        rec.val_accuracy = accuracy_on(plan, net.params.data(), split.validation);
        report.epochs.push_back(rec);
    }
    report.final_test_accuracy = accuracy_on(plan, net.params.data(), split.test);
    return {std::move(net), std::move(report)};
}

std::vector<int> predict_net(const ResidualNet& net, const PatchSet& set) {
    const NetPlan plan = make_plan(net.config);
    check_batch(plan, set);
    const BatchResult res =
        run_batch(plan, net.params.data(), item_pointers(set), {}, false, true);
    std::vector<int> out(res.predictions.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = kRatingClasses[res.predictions[i]];
    return out;
}

EvalReport evaluate_net(const ResidualNet& net, const PatchSet& set) {
    const std::vector<int> preds = predict_net(net, set);
    std::vector<std::pair<int, int>> pairs(preds.size());
    for (size_t i = 0; i < preds.size(); ++i) pairs[i] = {set.patches[i].label, preds[i]};
    return evaluate(pairs);
}

std::string train_report_to_csv(const TrainReport& report) {
    std::string csv = "epoch,train_loss,train_acc,val_acc\n";
    char line[128];
    for (const EpochRecord& r : report.epochs) {
        std::snprintf(line, sizeof line, "%u,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss,
                      r.train_accuracy, r.val_accuracy);
        csv += line;
    }
    return csv;
}

namespace {

nlohmann::json config_json(const NetConfig& c) {
    nlohmann::json j{{"input_n", c.input_n},
                     {"input_bands", c.input_bands},
                     {"stem_channels", c.stem_channels},
                     {"stem_stride", c.stem_stride},
                     {"num_blocks", c.num_blocks},
                     {"channels_per_stage", c.channels_per_stage},
                     {"num_classes", c.num_classes},
                     {"use_rectifier", c.use_rectifier},
                     {"seed", c.seed}};
    if (!c.input_mean.empty()) {
        j["input_mean"] = c.input_mean;
        j["input_gain"] = c.input_gain;
    }
    return j;
}

NetConfig config_from_json(const nlohmann::json& j) {
    NetConfig c;
    if (j.contains("input_n")) c.input_n = j["input_n"].get<uint32_t>();
    if (j.contains("input_bands")) c.input_bands = j["input_bands"].get<uint32_t>();
    if (j.contains("stem_channels")) c.stem_channels = j["stem_channels"].get<uint32_t>();
    if (j.contains("stem_stride")) c.stem_stride = j["stem_stride"].get<uint32_t>();
    if (j.contains("num_blocks")) c.num_blocks = j["num_blocks"].get<uint32_t>();
    if (j.contains("channels_per_stage"))
        c.channels_per_stage = j["channels_per_stage"].get<std::vector<uint32_t>>();
    if (j.contains("num_classes")) c.num_classes = j["num_classes"].get<uint32_t>();
    if (j.contains("use_rectifier")) c.use_rectifier = j["use_rectifier"].get<bool>();
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    if (j.contains("input_mean")) c.input_mean = j["input_mean"].get<std::vector<float>>();
    if (j.contains("input_gain")) c.input_gain = j["input_gain"].get<std::vector<float>>();
    c.validate();
    return c;
}

constexpr char kNetMagic[4] = {'H', 'R', 'N', '1'};

}  // namespace

void save_net(const ResidualNet& net, const std::filesystem::path& path) {
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerSpan& l : net.layers)
        layers.push_back({{"name", l.name},
                          {"weight_offset", l.weight_offset},
                          {"weight_count", l.weight_count},
                          {"bias_offset", l.bias_offset},
                          {"bias_count", l.bias_count}});
    const std::string header =
        nlohmann::json{{"config", config_json(net.config)},
                       {"layers", layers},
                       {"param_count", net.params.size()}}
            .dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    out.write(kNetMagic, 4);
    const uint32_t len = static_cast<uint32_t>(header.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(net.params.data()),
              static_cast<std::streamsize>(net.params.size() * sizeof(float)));
    if (!out) fail(errc::io_failure, "write failed for " + path.string());
}

ResidualNet load_net(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_failure, "cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kNetMagic, 4) != 0)
        fail(errc::bad_magic, "not a network file (bad magic)");
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in) fail(errc::truncated, "file ended inside header length");
    std::string header(len, '\0');
    in.read(header.data(), len);
    if (!in) fail(errc::truncated, "file ended inside JSON header");

    const auto j = nlohmann::json::parse(header);
    ResidualNet net;
    net.config = config_from_json(j.at("config"));
    const size_t expect = expected_param_count(net.config);
    if (j.at("param_count").get<size_t>() != expect)
        fail(errc::dim_mismatch, "stored parameter count disagrees with config");
    net.layers = make_layer_spans(make_plan(net.config));
    net.params.resize(expect);
    in.read(reinterpret_cast<char*>(net.params.data()),
            static_cast<std::streamsize>(expect * sizeof(float)));
    if (!in) fail(errc::truncated, "file ended inside parameter blob");
    for (float v : net.params)
        if (!std::isfinite(v)) fail(errc::non_finite, "non-finite parameter in file");
    return net;
}

}  // namespace hsi
