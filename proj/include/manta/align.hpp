#pragma once
// Cross-modal alignment: linear visual/audio projections trained with the
// bidirectional contrastive loss, plus a finite-difference gradient check.
// Projected vectors are L2-normalized before similarity.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "manta/index.hpp" // detail::put_le / get_le for params serialization

namespace manta {

struct AlignError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Row-major d_in x d_out matrices.
struct ProjectionParams {
    std::size_t d_in = 0;
    std::size_t d_out = 0;
    std::vector<double> visual;
    std::vector<double> audio;

    static ProjectionParams random_init(std::size_t d_in, std::size_t d_out, std::uint64_t seed) {
        ProjectionParams p;
        p.d_in = d_in;
        p.d_out = d_out;
        p.visual.resize(d_in * d_out);
        p.audio.resize(d_in * d_out);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(d_in)));
        for (auto& v : p.visual) v = dist(rng);
        for (auto& v : p.audio) v = dist(rng);
        return p;
    }
};

struct AlignBatch {
    // pairs[i] = (visual embedding, audio embedding), both d_in
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
};

struct TrainSchedule {
    double base_eta = 0.1;
    std::size_t steps = 2000;
    double temperature = 0.07;
    std::uint64_t seed = 0;
    std::size_t batch_size = 8;
};

struct LossGrads {
    double loss = 0.0;
    std::vector<double> d_visual;
    std::vector<double> d_audio;
};

namespace detail_align {

inline std::vector<double> project(const std::vector<double>& x, const std::vector<double>& w,
                                   std::size_t d_in, std::size_t d_out) {
    std::vector<double> u(d_out, 0.0);
    for (std::size_t d = 0; d < d_in; ++d) {
        double xv = x[d];
        if (xv == 0.0) continue;
        const double* row = &w[d * d_out];
        for (std::size_t o = 0; o < d_out; ++o) u[o] += xv * row[o];
    }
    return u;
}

inline double normalize_inplace(std::vector<double>& u) {
    double n = 0.0;
    for (double v : u) n += v * v;
    n = std::sqrt(n);
    if (n > 1e-12)
        for (double& v : u) v /= n;
    return n;
}

} // namespace detail_align

// Bidirectional contrastive loss over a batch; the positive pair appears
// in both denominator sums, so each term is bounded below by ln 2.
inline LossGrads contrastive_loss(const AlignBatch& batch, const ProjectionParams& params,
                                  double tau) {
    if (tau <= 0.0) throw AlignError("temperature must be positive");
    if (batch.pairs.empty()) throw AlignError("empty batch");
    const std::size_t B = batch.pairs.size();
    const std::size_t d_in = params.d_in, d_out = params.d_out;

    std::vector<std::vector<double>> c(B), t(B);
    std::vector<double> cnorm(B), tnorm(B);
    for (std::size_t i = 0; i < B; ++i) {
        c[i] = detail_align::project(batch.pairs[i].first, params.visual, d_in, d_out);
        t[i] = detail_align::project(batch.pairs[i].second, params.audio, d_in, d_out);
        cnorm[i] = detail_align::normalize_inplace(c[i]);
        tnorm[i] = detail_align::normalize_inplace(t[i]);
    }

    std::vector<double> sim(B * B, 0.0);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < B; ++j) {
            double s = 0.0;
            for (std::size_t o = 0; o < d_out; ++o) s += c[i][o] * t[j][o];
            sim[i * B + j] = s / tau;
        }

    std::vector<double> denom(B, 0.0);
    for (std::size_t i = 0; i < B; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < B; ++j) d += std::exp(sim[i * B + j]); // c_i vs all t_j
        for (std::size_t k = 0; k < B; ++k) d += std::exp(sim[k * B + i]); // all c_k vs t_i
        denom[i] = d;
    }

    LossGrads out;
    for (std::size_t i = 0; i < B; ++i) out.loss += -sim[i * B + i] + std::log(denom[i]);

    // dL/dsim[a][b]
    std::vector<double> gsim(B * B, 0.0);
    for (std::size_t a = 0; a < B; ++a)
        for (std::size_t b = 0; b < B; ++b) {
            double e = std::exp(sim[a * B + b]);
            double g = e / denom[a] + e / denom[b];
            if (a == b) g -= 1.0;
            gsim[a * B + b] = g;
        }

    out.d_visual.assign(d_in * d_out, 0.0);
    out.d_audio.assign(d_in * d_out, 0.0);
    std::vector<double> gc(d_out), gt(d_out), gu(d_out);
    for (std::size_t a = 0; a < B; ++a) {
        std::fill(gc.begin(), gc.end(), 0.0);
        for (std::size_t b = 0; b < B; ++b) {
            double g = gsim[a * B + b] / tau;
            for (std::size_t o = 0; o < d_out; ++o) gc[o] += g * t[b][o];
        }
        // through c = u/||u||
        double gdotc = 0.0;
        for (std::size_t o = 0; o < d_out; ++o) gdotc += gc[o] * c[a][o];
        for (std::size_t o = 0; o < d_out; ++o)
            gu[o] = cnorm[a] > 1e-12 ? (gc[o] - gdotc * c[a][o]) / cnorm[a] : 0.0;
        const auto& x = batch.pairs[a].first;
        for (std::size_t d = 0; d < d_in; ++d) {
            if (x[d] == 0.0) continue;
            double* row = &out.d_visual[d * d_out];
            for (std::size_t o = 0; o < d_out; ++o) row[o] += x[d] * gu[o];
        }
    }
    for (std::size_t b = 0; b < B; ++b) {
        std::fill(gt.begin(), gt.end(), 0.0);
        for (std::size_t a = 0; a < B; ++a) {
            double g = gsim[a * B + b] / tau;
            for (std::size_t o = 0; o < d_out; ++o) gt[o] += g * c[a][o];
        }
        double gdott = 0.0;
        for (std::size_t o = 0; o < d_out; ++o) gdott += gt[o] * t[b][o];
        for (std::size_t o = 0; o < d_out; ++o)
            gu[o] = tnorm[b] > 1e-12 ? (gt[o] - gdott * t[b][o]) / tnorm[b] : 0.0;
        const auto& y = batch.pairs[b].second;
        for (std::size_t d = 0; d < d_in; ++d) {
            if (y[d] == 0.0) continue;
            double* row = &out.d_audio[d * d_out];
            for (std::size_t o = 0; o < d_out; ++o) row[o] += y[d] * gu[o];
        }
    }
    return out;
}

// Central finite differences over every parameter entry; returns the max
// relative error against the analytic gradient.
inline double grad_check(const ProjectionParams& params, const AlignBatch& batch, double tau,
                         double epsilon) {
    if (epsilon <= 0.0) throw AlignError("epsilon must be positive");
    LossGrads analytic = contrastive_loss(batch, params, tau);
    double scale = 1.0;
    for (double g : analytic.d_visual) scale = std::max(scale, std::abs(g));
    for (double g : analytic.d_audio) scale = std::max(scale, std::abs(g));

    ProjectionParams p = params;
    double max_err = 0.0;
    auto check_matrix = [&](std::vector<double>& w, const std::vector<double>& grad) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            double orig = w[i];
            w[i] = orig + epsilon;
            double lp = contrastive_loss(batch, p, tau).loss;
            w[i] = orig - epsilon;
            double lm = contrastive_loss(batch, p, tau).loss;
            w[i] = orig;
            double numeric = (lp - lm) / (2.0 * epsilon);
            max_err = std::max(max_err, std::abs(numeric - grad[i]) / scale);
        }
    };
    check_matrix(p.visual, analytic.d_visual);
    check_matrix(p.audio, analytic.d_audio);
    return max_err;
}

struct TrainResult {
    ProjectionParams params;
    std::vector<double> loss_trace; // minibatch loss at each step
};

// Plain SGD with eta_t = base_eta / sqrt(t) over seeded minibatches.
inline TrainResult train_alignment(const AlignBatch& corpus, const TrainSchedule& schedule,
                                   const ProjectionParams& initial) {
    if (corpus.pairs.size() < 2 && schedule.steps > 0)
        throw AlignError("need at least 2 pairs to train");
    TrainResult result;
    result.params = initial;
    std::mt19937_64 rng(schedule.seed);
    std::vector<std::size_t> order(corpus.pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t step = 1; step <= schedule.steps; ++step) {
        // distinct pairs per minibatch: a within-batch duplicate makes the
        // positive indistinguishable from one of its negatives and puts a
        // constant floor above B ln 2 on the loss
        AlignBatch batch;
        std::size_t bs = std::min(schedule.batch_size, corpus.pairs.size());
        for (std::size_t b = 0; b < bs; ++b) {
            std::uniform_int_distribution<std::size_t> pick(b, order.size() - 1);
            std::swap(order[b], order[pick(rng)]);
            batch.pairs.push_back(corpus.pairs[order[b]]);
        }
        LossGrads lg = contrastive_loss(batch, result.params, schedule.temperature);
        if (!std::isfinite(lg.loss))
            throw AlignError("training diverged at step " + std::to_string(step));
        double eta = schedule.base_eta / std::sqrt(static_cast<double>(step));
        for (std::size_t i = 0; i < lg.d_visual.size(); ++i)
            result.params.visual[i] -= eta * lg.d_visual[i];
        for (std::size_t i = 0; i < lg.d_audio.size(); ++i)
            result.params.audio[i] -= eta * lg.d_audio[i];
        result.loss_trace.push_back(lg.loss);
    }
    return result;
}

inline TrainResult train_alignment(const AlignBatch& corpus, const TrainSchedule& schedule) {
    std::size_t d_in = corpus.pairs.empty() ? 0 : corpus.pairs.front().first.size();
    return train_alignment(corpus, schedule,
                           ProjectionParams::random_init(d_in, 32, schedule.seed ^ 0x9e3779b97f4a7c15ull));
}

// Mean cosine of projected positive pairs minus projected mismatched pairs.
inline std::pair<double, double> positive_negative_cosines(const AlignBatch& corpus,
                                                           const ProjectionParams& params) {
    const std::size_t n = corpus.pairs.size();
    std::vector<std::vector<double>> c(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
        c[i] = detail_align::project(corpus.pairs[i].first, params.visual, params.d_in, params.d_out);
        t[i] = detail_align::project(corpus.pairs[i].second, params.audio, params.d_in, params.d_out);
        detail_align::normalize_inplace(c[i]);
        detail_align::normalize_inplace(t[i]);
    }
    double pos = 0.0, neg = 0.0;
    std::size_t nneg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t o = 0; o < params.d_out; ++o) s += c[i][o] * t[j][o];
            if (i == j) {
                pos += s;
            } else {
                neg += s;
                ++nneg;
            }
        }
    }
    return {pos / static_cast<double>(n), nneg ? neg / static_cast<double>(nneg) : 0.0};
}

// Versioned binary params file: magic, version, d_in, d_out, both matrices.
inline void save_params(const ProjectionParams& p, const std::string& path) {
    std::vector<std::uint8_t> buf;
    const char magic[8] = {'M', 'A', 'N', 'T', 'A', 'P', 'R', 'J'};
    buf.insert(buf.end(), magic, magic + 8);
    detail::put_le<std::uint32_t>(buf, 1u);
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(p.d_in));
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(p.d_out));
    auto put_matrix = [&](const std::vector<double>& m) {
        for (double v : m) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            detail::put_le<std::uint64_t>(buf, bits);
        }
    };
    put_matrix(p.visual);
    put_matrix(p.audio);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw AlignError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline ProjectionParams load_params(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw AlignError("cannot open " + path);
    std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (raw.size() < 20 || std::memcmp(raw.data(), "MANTAPRJ", 8) != 0)
        throw AlignError("not a projection params file");
    const std::uint8_t* q = raw.data() + 8;
    auto version = detail::get_le<std::uint32_t>(q); q += 4;
    if (version != 1) throw AlignError("unsupported params version " + std::to_string(version));
    ProjectionParams p;
    p.d_in = detail::get_le<std::uint32_t>(q); q += 4;
    p.d_out = detail::get_le<std::uint32_t>(q); q += 4;
    std::size_t need = 2 * p.d_in * p.d_out * 8;
    if (raw.size() - 20 != need) throw AlignError("params file truncated");
    auto get_matrix = [&](std::vector<double>& m) {
        m.resize(p.d_in * p.d_out);
        for (auto& v : m) {
            auto bits = detail::get_le<std::uint64_t>(q);
            q += 8;
            std::memcpy(&v, &bits, sizeof(double));
        }
    };
    get_matrix(p.visual);
    get_matrix(p.audio);
    return p;
}

} // namespace manta
