#include "clmx/network.hpp"

#include <cmath>

#include "clmx/errors.hpp"
#include "clmx/rng.hpp"

namespace clmx {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void add_bias_rows(Matrix& m, const Matrix& bias) {
    for (int r = 0; r < m.rows; ++r) {
        double* row = m.row(r);
        const double* b = bias.row(0);
        for (int c = 0; c < m.cols; ++c) row[c] += b[c];
    }
}

Matrix dropout_mask(int rows, int cols, double p, Rng& rng) {
    Matrix m(rows, cols);
    double scale = 1.0 / (1.0 - p);
    for (double& x : m.v) x = rng.uniform() < p ? 0.0 : scale;
    return m;
}

void hadamard_into(Matrix& a, const Matrix& b) {
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] *= b.v[i];
}

}  // namespace

ModelParams::ModelParams(const Arch& a)
    : arch(a),
      embedding(a.vocab, a.embed),
      w_i(a.embed + a.hidden, a.hidden),
      w_f(a.embed + a.hidden, a.hidden),
      w_o(a.embed + a.hidden, a.hidden),
      w_g(a.embed + a.hidden, a.hidden),
      b_i(1, a.hidden),
      b_f(1, a.hidden),
      b_o(1, a.hidden),
      b_g(1, a.hidden),
      w_transform(a.hidden, a.hidden),
      w_linear(a.hidden, a.hidden),
      b_transform(1, a.hidden),
      b_linear(1, a.hidden),
      w_out(a.hidden, a.vocab),
      b_out(1, a.vocab) {}

std::vector<NamedTensor> ModelParams::tensors() {
    return {
        {"embedding", kLayerEmbedding, &embedding},
        {"lstm.w_i", kLayerLstm, &w_i},
        {"lstm.w_f", kLayerLstm, &w_f},
        {"lstm.w_o", kLayerLstm, &w_o},
        {"lstm.w_g", kLayerLstm, &w_g},
        {"lstm.b_i", kLayerLstm, &b_i},
        {"lstm.b_f", kLayerLstm, &b_f},
        {"lstm.b_o", kLayerLstm, &b_o},
        {"lstm.b_g", kLayerLstm, &b_g},
        {"highway.w_transform", kLayerHighway, &w_transform},
        {"highway.b_transform", kLayerHighway, &b_transform},
        {"highway.w_linear", kLayerHighway, &w_linear},
        {"highway.b_linear", kLayerHighway, &b_linear},
        {"output.w", kLayerOutput, &w_out},
        {"output.b", kLayerOutput, &b_out},
    };
}

std::vector<NamedTensor> ModelParams::tensors() const {
    return const_cast<ModelParams*>(this)->tensors();
}

ForwardResult forward(const ModelParams& params, const Batch& batch, const Mode& mode) {
    const Arch& arch = params.arch;
    const int B = batch.batch_size;
    const int T = batch.seq_len;
    const int E = arch.embed;
    const int H = arch.hidden;
    const int V = arch.vocab;
    const bool drop = mode.train && mode.dropout_p > 0.0;

    ForwardResult out;
    out.nll = Matrix(B, T);
    ForwardCache& cache = out.cache;
    cache.params = &params;
    cache.batch = batch;
    cache.mode = mode;
    cache.z.reserve(static_cast<std::size_t>(T));

    Rng drop_rng(mode.seed);
    Matrix h_prev(B, H);
    Matrix c_prev(B, H);

    for (int t = 0; t < T; ++t) {
        // z = [embedding(input), h_prev]
        Matrix z(B, E + H);
        for (int r = 0; r < B; ++r) {
            int id = batch.input(r, t);
            const double* emb = params.embedding.row(id);
            double* zr = z.row(r);
            for (int e = 0; e < E; ++e) zr[e] = emb[e];
            const double* hp = h_prev.row(r);
            for (int hh = 0; hh < H; ++hh) zr[E + hh] = hp[hh];
        }

        Matrix pi(B, H), pf(B, H), po(B, H), pg(B, H);
        matmul_accum(z, params.w_i, pi);
        matmul_accum(z, params.w_f, pf);
        matmul_accum(z, params.w_o, po);
        matmul_accum(z, params.w_g, pg);
        add_bias_rows(pi, params.b_i);
        add_bias_rows(pf, params.b_f);
        add_bias_rows(po, params.b_o);
        add_bias_rows(pg, params.b_g);
        for (double& x : pi.v) x = sigmoid(x);
        for (double& x : pf.v) x = sigmoid(x);
        for (double& x : po.v) x = sigmoid(x);
        for (double& x : pg.v) x = std::tanh(x);

        Matrix c(B, H), tc(B, H), h(B, H);
        for (std::size_t k = 0; k < c.v.size(); ++k) {
            c.v[k] = pf.v[k] * c_prev.v[k] + pi.v[k] * pg.v[k];
            tc.v[k] = std::tanh(c.v[k]);
            h.v[k] = po.v[k] * tc.v[k];
        }

        Matrix u = h;
        Matrix d1;
        if (drop) {
            d1 = dropout_mask(B, H, mode.dropout_p, drop_rng);
            hadamard_into(u, d1);
        }

        Matrix pre_t(B, H), pre_h(B, H);
        matmul_accum(u, params.w_transform, pre_t);
        matmul_accum(u, params.w_linear, pre_h);
        add_bias_rows(pre_t, params.b_transform);
        add_bias_rows(pre_h, params.b_linear);
        Matrix tg(B, H), hp(B, H), y(B, H);
        for (std::size_t k = 0; k < tg.v.size(); ++k) {
            tg.v[k] = sigmoid(pre_t.v[k]);
            hp.v[k] = pre_h.v[k] > 0.0 ? pre_h.v[k] : 0.0;
            y.v[k] = tg.v[k] * hp.v[k] + (1.0 - tg.v[k]) * u.v[k];
        }

        Matrix yd = y;
        Matrix d2;
        if (drop) {
            d2 = dropout_mask(B, H, mode.dropout_p, drop_rng);
            hadamard_into(yd, d2);
        }

        Matrix logits(B, V);
        matmul_accum(yd, params.w_out, logits);
        add_bias_rows(logits, params.b_out);

        // log-sum-exp stabilized softmax; pr becomes probabilities in place
        Matrix pr = logits;
        for (int r = 0; r < B; ++r) {
            double* row = pr.row(r);
            double mx = row[0];
            for (int c2 = 1; c2 < V; ++c2) mx = std::max(mx, row[c2]);
            double sum = 0.0;
            for (int c2 = 0; c2 < V; ++c2) sum += std::exp(row[c2] - mx);
            double lse = mx + std::log(sum);
            if (batch.masked_in(r, t)) {
                double nll = lse - row[batch.target(r, t)];
                if (!std::isfinite(nll)) throw NonFinite("non-finite NLL in forward");
                out.nll.at(r, t) = nll;
            }
            for (int c2 = 0; c2 < V; ++c2) row[c2] = std::exp(row[c2] - lse);
        }

        cache.z.push_back(std::move(z));
        cache.gate_i.push_back(std::move(pi));
        cache.gate_f.push_back(std::move(pf));
        cache.gate_o.push_back(std::move(po));
        cache.gate_g.push_back(std::move(pg));
        cache.cell.push_back(c);
        cache.tanh_cell.push_back(std::move(tc));
        cache.hidden.push_back(std::move(h));
        cache.drop1.push_back(std::move(d1));
        cache.highway_in.push_back(std::move(u));
        cache.tgate.push_back(std::move(tg));
        cache.hpath.push_back(std::move(hp));
        cache.highway_out.push_back(std::move(y));
        cache.drop2.push_back(std::move(d2));
        cache.probs.push_back(std::move(pr));

        h_prev = cache.hidden.back();
        c_prev = std::move(c);
    }
    return out;
}

ModelParams backward(const ModelParams& params, const ForwardCache& cache) {
    const Arch& arch = params.arch;
    const Batch& batch = cache.batch;
    const int B = batch.batch_size;
    const int T = batch.seq_len;
    const int E = arch.embed;
    const int H = arch.hidden;
    const int V = arch.vocab;
    const bool drop = cache.mode.train && cache.mode.dropout_p > 0.0;

    ModelParams g(arch);
    Matrix dh_next(B, H);
    Matrix dc_next(B, H);

    for (int t = T - 1; t >= 0; --t) {
        // softmax + NLL
        Matrix dlogits = cache.probs[static_cast<std::size_t>(t)];
        for (int r = 0; r < B; ++r) {
            double* row = dlogits.row(r);
            if (!batch.masked_in(r, t)) {
                for (int c = 0; c < V; ++c) row[c] = 0.0;
            } else {
                row[batch.target(r, t)] -= 1.0;
            }
        }
        const Matrix& yd_src = cache.highway_out[static_cast<std::size_t>(t)];
        Matrix yd = yd_src;
        if (drop) hadamard_into(yd, cache.drop2[static_cast<std::size_t>(t)]);
        matmul_accum_at(yd, dlogits, g.w_out);
        for (int r = 0; r < B; ++r) {
            const double* row = dlogits.row(r);
            double* gb = g.b_out.row(0);
            for (int c = 0; c < V; ++c) gb[c] += row[c];
        }

        Matrix dy(B, H);
        matmul_accum_bt(dlogits, params.w_out, dy);
        if (drop) hadamard_into(dy, cache.drop2[static_cast<std::size_t>(t)]);

        // highway
        const Matrix& u = cache.highway_in[static_cast<std::size_t>(t)];
        const Matrix& tg = cache.tgate[static_cast<std::size_t>(t)];
        const Matrix& hp = cache.hpath[static_cast<std::size_t>(t)];
        Matrix dpre_t(B, H), dpre_h(B, H), du(B, H);
        for (std::size_t k = 0; k < dy.v.size(); ++k) {
            double dyk = dy.v[k];
            double dtg = dyk * (hp.v[k] - u.v[k]);
            dpre_t.v[k] = dtg * tg.v[k] * (1.0 - tg.v[k]);
            dpre_h.v[k] = hp.v[k] > 0.0 ? dyk * tg.v[k] : 0.0;
            du.v[k] = dyk * (1.0 - tg.v[k]);
        }
        matmul_accum_at(u, dpre_t, g.w_transform);
        matmul_accum_at(u, dpre_h, g.w_linear);
        for (int r = 0; r < B; ++r) {
            for (int c = 0; c < H; ++c) {
                g.b_transform.at(0, c) += dpre_t.at(r, c);
                g.b_linear.at(0, c) += dpre_h.at(r, c);
            }
        }
        matmul_accum_bt(dpre_t, params.w_transform, du);
        matmul_accum_bt(dpre_h, params.w_linear, du);

        // through dropout 1 back to the LSTM hidden state
        Matrix dh = du;
        if (drop) hadamard_into(dh, cache.drop1[static_cast<std::size_t>(t)]);
        for (std::size_t k = 0; k < dh.v.size(); ++k) dh.v[k] += dh_next.v[k];

        // LSTM cell
        const Matrix& pi = cache.gate_i[static_cast<std::size_t>(t)];
        const Matrix& pf = cache.gate_f[static_cast<std::size_t>(t)];
        const Matrix& po = cache.gate_o[static_cast<std::size_t>(t)];
        const Matrix& pg = cache.gate_g[static_cast<std::size_t>(t)];
        const Matrix& tc = cache.tanh_cell[static_cast<std::size_t>(t)];
        const Matrix* c_prev = t > 0 ? &cache.cell[static_cast<std::size_t>(t - 1)] : nullptr;

        Matrix dpre_i(B, H), dpre_f(B, H), dpre_o(B, H), dpre_g(B, H), dc_prev(B, H);
        for (std::size_t k = 0; k < dh.v.size(); ++k) {
            double dc = dh.v[k] * po.v[k] * (1.0 - tc.v[k] * tc.v[k]) + dc_next.v[k];
            double cp = c_prev ? c_prev->v[k] : 0.0;
            dpre_o.v[k] = dh.v[k] * tc.v[k] * po.v[k] * (1.0 - po.v[k]);
            dpre_i.v[k] = dc * pg.v[k] * pi.v[k] * (1.0 - pi.v[k]);
            dpre_f.v[k] = dc * cp * pf.v[k] * (1.0 - pf.v[k]);
            dpre_g.v[k] = dc * pi.v[k] * (1.0 - pg.v[k] * pg.v[k]);
            dc_prev.v[k] = dc * pf.v[k];
        }

        const Matrix& z = cache.z[static_cast<std::size_t>(t)];
        matmul_accum_at(z, dpre_i, g.w_i);
        matmul_accum_at(z, dpre_f, g.w_f);
        matmul_accum_at(z, dpre_o, g.w_o);
        matmul_accum_at(z, dpre_g, g.w_g);
        for (int r = 0; r < B; ++r) {
            for (int c = 0; c < H; ++c) {
                g.b_i.at(0, c) += dpre_i.at(r, c);
                g.b_f.at(0, c) += dpre_f.at(r, c);
                g.b_o.at(0, c) += dpre_o.at(r, c);
                g.b_g.at(0, c) += dpre_g.at(r, c);
            }
        }

        Matrix dz(B, E + H);
        matmul_accum_bt(dpre_i, params.w_i, dz);
        matmul_accum_bt(dpre_f, params.w_f, dz);
        matmul_accum_bt(dpre_o, params.w_o, dz);
        matmul_accum_bt(dpre_g, params.w_g, dz);

        // scatter the embedding part, keep the rest as dh for step t-1
        for (int r = 0; r < B; ++r) {
            int id = batch.input(r, t);
            double* grow = g.embedding.row(id);
            const double* dzr = dz.row(r);
            for (int e = 0; e < E; ++e) grow[e] += dzr[e];
            double* dhn = dh_next.row(r);
            for (int hh = 0; hh < H; ++hh) dhn[hh] = dzr[E + hh];
        }
        dc_next = std::move(dc_prev);
    }

    for (const NamedTensor& nt : g.tensors()) {
        if (!all_finite(*nt.tensor)) throw NonFinite("non-finite gradient: " + nt.name);
    }
    return g;
}

double masked_nll_sum(const Matrix& nll, const Batch& batch) {
    // Neumaier-compensated sum: gradient checking divides loss differences
    // by 2*epsilon, so plain summation roundoff would be amplified there.
    double sum = 0.0;
    double comp = 0.0;
    for (int r = 0; r < batch.batch_size; ++r) {
        for (int t = 0; t < batch.seq_len; ++t) {
            if (!batch.masked_in(r, t)) continue;
            double x = nll.at(r, t);
            double next = sum + x;
            if (std::fabs(sum) >= std::fabs(x)) {
                comp += (sum - next) + x;
            } else {
                comp += (x - next) + sum;
            }
            sum = next;
        }
    }
    return sum + comp;
}

double finite_difference_check(ModelParams& params, const Batch& batch, double epsilon,
                               int samples, std::uint64_t seed) {
    if (epsilon <= 0.0) throw Error("epsilon must be positive");
    Mode mode = Mode::eval();
    ForwardResult fr = forward(params, batch, mode);
    ModelParams analytic = backward(params, fr.cache);

    auto tensors = params.tensors();
    auto grads = analytic.tensors();
    std::size_t total = 0;
    for (const NamedTensor& nt : tensors) total += nt.tensor->size();

    Rng rng(seed);
    double max_rel = 0.0;
    for (int s = 0; s < samples; ++s) {
        std::size_t flat = rng.uniform_int(total);
        std::size_t ti = 0;
        while (flat >= tensors[ti].tensor->size()) {
            flat -= tensors[ti].tensor->size();
            ++ti;
        }
        double& theta = tensors[ti].tensor->v[flat];
        double orig = theta;

        theta = orig + epsilon;
        double lp = masked_nll_sum(forward(params, batch, mode).nll, batch);
        theta = orig - epsilon;
        double lm = masked_nll_sum(forward(params, batch, mode).nll, batch);
        theta = orig;

        double numeric = (lp - lm) / (2.0 * epsilon);
        double a = grads[ti].tensor->v[flat];
        double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
    return max_rel;
}

}  // namespace clmx
