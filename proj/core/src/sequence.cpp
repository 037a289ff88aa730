#include "ratemb/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "ratemb/error.hpp"
#include "ratemb/textio.hpp"

namespace ratemb::sequence {

using nn::Activation;
using nn::LossKind;

void RnnParams::validate() const {
    const std::size_t p = wx.rank() == 2 ? wx.dim(0) : 0;
    const std::size_t l = wx.rank() == 2 ? wx.dim(1) : 0;
    const std::size_t j = wo.rank() == 2 ? wo.dim(1) : 0;
    const bool ok = p > 0 && l > 0 && j > 0 && bx.shape() == Shape{l} && wh.shape() == Shape{l, l} &&
                    bh.shape() == Shape{l} && wo.shape() == Shape{l, j} && bo.shape() == Shape{j};
    if (!ok)
        throw ShapeError("rnn parameters inconsistent: Wx " + shape_string(wx.shape()) + ", bx " +
                         shape_string(bx.shape()) + ", Wh " + shape_string(wh.shape()) + ", bh " +
                         shape_string(bh.shape()) + ", Wo " + shape_string(wo.shape()) + ", bo " +
                         shape_string(bo.shape()));
}

RnnParams RnnParams::zeros(std::size_t p, std::size_t l, std::size_t j) {
    return {Tensor({p, l}), Tensor({l}), Tensor({l, l}), Tensor({l}), Tensor({l, j}), Tensor({j})};
}

RnnParams RnnParams::random(std::size_t p, std::size_t l, std::size_t j, SeededRng& rng) {
    return {nn::uniform_init({p, l}, p, rng), nn::uniform_init({l}, p, rng),
            nn::uniform_init({l, l}, l, rng), nn::uniform_init({l}, l, rng),
            nn::uniform_init({l, j}, l, rng), nn::uniform_init({j}, l, rng)};
}

std::vector<Tensor*> RnnParams::tensors() { return {&wx, &bx, &wh, &bh, &wo, &bo}; }
std::vector<const Tensor*> RnnParams::tensors() const { return {&wx, &bx, &wh, &bh, &wo, &bo}; }

void Sequence::validate() const {
    if (steps.empty()) throw ArgumentError("empty sequence");
    const std::size_t p = steps.front().size();
    if (p == 0) throw ArgumentError("sequence steps must be non-empty vectors");
    for (std::size_t t = 1; t < steps.size(); ++t)
        if (steps[t].size() != p)
            throw ArgumentError("sequence step " + std::to_string(t) + " has length " + std::to_string(steps[t].size()) +
                                ", expected " + std::to_string(p));
}

std::vector<double> rnn_step(std::span<const double> x, std::span<const double> h_prev, const RnnParams& params) {
    const std::size_t p = params.input_dim(), l = params.state_dim();
    if (x.size() != p || h_prev.size() != l)
        throw ShapeError("rnn_step: got x of length " + std::to_string(x.size()) + " and state of length " +
                         std::to_string(h_prev.size()) + ", parameters expect " + std::to_string(p) + " and " +
                         std::to_string(l));
    std::vector<double> h(l);
    for (std::size_t k = 0; k < l; ++k) h[k] = params.bx[k] + params.bh[k];
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < l; ++k) h[k] += x[i] * params.wx.at(i, k);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t k = 0; k < l; ++k) h[k] += h_prev[i] * params.wh.at(i, k);
    for (auto& v : h) v = nn::activate(params.hidden_activation, v);
    return h;
}

namespace {

std::vector<double> output_head(std::span<const double> h, const RnnParams& params) {
    const std::size_t l = params.state_dim(), j = params.output_dim();
    std::vector<double> o(params.bo.values().begin(), params.bo.values().end());
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t k = 0; k < j; ++k) o[k] += h[i] * params.wo.at(i, k);
    for (auto& v : o) v = nn::activate(params.output_activation, v);
    return o;
}

}  // namespace

RnnTrace rnn_forward(const Sequence& seq, const RnnParams& params, std::span<const double> h0) {
    seq.validate();
    params.validate();
    RnnTrace tr;
    std::vector<double> h(h0.begin(), h0.end());
    for (const auto& x : seq.steps) {
        h = rnn_step(x, h, params);
        tr.outputs.push_back(output_head(h, params));
        tr.hidden.push_back(h);
    }
    return tr;
}

std::vector<double> sequence_embed(const Sequence& seq, const RnnParams& params) {
    seq.validate();
    params.validate();
    std::vector<double> h(params.state_dim(), 0.0);
    for (const auto& x : seq.steps) h = rnn_step(x, h, params);
    return h;
}

std::vector<double> rnn_predict(const Sequence& seq, const RnnParams& params) {
    return output_head(sequence_embed(seq, params), params);
}

double rnn_loss(const Sequence& seq, std::span<const double> target, const RnnParams& params, LossKind loss) {
    const auto o = rnn_predict(seq, params);
    return nn::loss_value(loss, Tensor::vector(o), Tensor::vector({target.begin(), target.end()}));
}

RnnParams rnn_gradient(const Sequence& seq, std::span<const double> target, const RnnParams& params, LossKind loss) {
    const std::size_t p = params.input_dim(), l = params.state_dim(), j = params.output_dim();
    const std::vector<double> h0(l, 0.0);
    const auto tr = rnn_forward(seq, params, h0);
    RnnParams g = RnnParams::zeros(p, l, j);
    g.hidden_activation = params.hidden_activation;
    g.output_activation = params.output_activation;

    const auto& o = tr.outputs.back();
    const Tensor dout = nn::loss_gradient(loss, Tensor::vector(o), Tensor::vector({target.begin(), target.end()}));
    std::vector<double> dzo(j);
    for (std::size_t k = 0; k < j; ++k) dzo[k] = dout[k] * nn::activation_slope(params.output_activation, o[k]);

    const auto& h_last = tr.hidden.back();
    std::vector<double> dh(l, 0.0);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t k = 0; k < j; ++k) {
            g.wo.at(i, k) += h_last[i] * dzo[k];
            dh[i] += params.wo.at(i, k) * dzo[k];
        }
    for (std::size_t k = 0; k < j; ++k) g.bo[k] += dzo[k];

    std::vector<double> dz(l);
    for (std::size_t t = seq.length(); t-- > 0;) {
        const auto& h = tr.hidden[t];
        const std::span<const double> h_prev = t == 0 ? std::span<const double>(h0) : std::span<const double>(tr.hidden[t - 1]);
        for (std::size_t k = 0; k < l; ++k) dz[k] = dh[k] * nn::activation_slope(params.hidden_activation, h[k]);
        const auto& x = seq.steps[t];
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t k = 0; k < l; ++k) g.wx.at(i, k) += x[i] * dz[k];
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t i = 0; i < l; ++i)
            for (std::size_t k = 0; k < l; ++k) {
                g.wh.at(i, k) += h_prev[i] * dz[k];
                dh[i] += params.wh.at(i, k) * dz[k];
            }
        for (std::size_t k = 0; k < l; ++k) {
            g.bx[k] += dz[k];
            g.bh[k] += dz[k];
        }
    }
    return g;
}

double rnn_grad_check(const Sequence& seq, std::span<const double> target, const RnnParams& params, LossKind loss,
                      double epsilon) {
    if (!(epsilon > 0.0)) throw ArgumentError("rnn_grad_check: epsilon must be positive");
    const RnnParams analytic = rnn_gradient(seq, target, params, loss);
    RnnParams probe = params;
    const auto a_tensors = analytic.tensors();
    const auto p_tensors = probe.tensors();
    double worst = 0.0;
    for (std::size_t t = 0; t < p_tensors.size(); ++t) {
        Tensor& theta = *p_tensors[t];
        for (std::size_t e = 0; e < theta.size(); ++e) {
            const double orig = theta[e];
            theta[e] = orig + epsilon;
            const double up = rnn_loss(seq, target, probe, loss);
            theta[e] = orig - epsilon;
            const double down = rnn_loss(seq, target, probe, loss);
            theta[e] = orig;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double a = (*a_tensors[t])[e];
            worst = std::max(worst, std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric)));
        }
    }
    return worst;
}

ManyToOneResult many_to_one_fit(std::span<const Sequence> seqs, std::span<const std::vector<double>> labels,
                                const nn::TrainConfig& cfg, const ManyToOneOptions& opts) {
    if (seqs.empty()) throw ArgumentError("many_to_one_fit: empty dataset");
    if (seqs.size() != labels.size())
        throw ArgumentError("many_to_one_fit: " + std::to_string(seqs.size()) + " sequences but " +
                            std::to_string(labels.size()) + " labels");
    if (opts.state_dim == 0 || opts.output_dim == 0) throw ArgumentError("many_to_one_fit: sizes must be positive");
    const std::size_t p = seqs.front().steps.empty() ? 0 : seqs.front().steps.front().size();
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        seqs[i].validate();
        if (seqs[i].steps.front().size() != p)
            throw ArgumentError("sequence " + std::to_string(i) + " has step length " +
                                std::to_string(seqs[i].steps.front().size()) + ", expected " + std::to_string(p));
        if (labels[i].size() != opts.output_dim)
            throw ArgumentError("label " + std::to_string(i) + " has length " + std::to_string(labels[i].size()) +
                                ", expected " + std::to_string(opts.output_dim));
        if (opts.loss == LossKind::binary_cross_entropy)
            for (double v : labels[i])
                if (v != 0.0 && v != 1.0)
                    throw ArgumentError("label " + std::to_string(i) + " is " + format_double(v) +
                                        "; cross-entropy needs labels in {0, 1}");
    }

    SeededRng init(SeededRng::derive(cfg.seed(), 0x5E0));
    RnnParams params = RnnParams::random(p, opts.state_dim, opts.output_dim, init);
    params.output_activation =
        opts.loss == LossKind::binary_cross_entropy ? Activation::sigmoid : Activation::identity;

    SeededRng rng(cfg.seed());
    const std::size_t n = seqs.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::vector<double> history;
    for (std::size_t epoch = 0; epoch < cfg.epochs(); ++epoch) {
        if (cfg.shuffle()) order = rng.permutation(n);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size()) {
            const std::size_t stop = std::min(n, start + cfg.batch_size());
            RnnParams acc = RnnParams::zeros(p, opts.state_dim, opts.output_dim);
            for (std::size_t b = start; b < stop; ++b) {
                const auto idx = order[b];
                total += rnn_loss(seqs[idx], labels[idx], params, opts.loss);
                const RnnParams g = rnn_gradient(seqs[idx], labels[idx], params, opts.loss);
                auto at = acc.tensors();
                auto gt = g.tensors();
                for (std::size_t t = 0; t < at.size(); ++t)
                    for (std::size_t e = 0; e < at[t]->size(); ++e) (*at[t])[e] += (*gt[t])[e];
            }
            double scale = cfg.learning_rate() / static_cast<double>(stop - start);
            if (opts.clip_norm > 0.0) {
                double sq = 0.0;
                for (const Tensor* t : std::as_const(acc).tensors())
                    for (double v : t->values()) sq += v * v;
                const double norm = std::sqrt(sq) / static_cast<double>(stop - start);
                if (norm > opts.clip_norm) scale *= opts.clip_norm / norm;
            }
            auto pt = params.tensors();
            auto at = acc.tensors();
            for (std::size_t t = 0; t < pt.size(); ++t)
                for (std::size_t e = 0; e < pt[t]->size(); ++e) (*pt[t])[e] -= scale * (*at[t])[e];
        }
        const double mean = total / static_cast<double>(n);
        if (!std::isfinite(mean))
            throw Error("many_to_one_fit: loss became non-finite at epoch " + std::to_string(epoch));
        history.push_back(mean);
    }
    return {std::move(params), std::move(history)};
}

EmbeddingTable embed_sequences(std::span<const Sequence> seqs, const RnnParams& params,
                               std::span<const std::string> ids) {
    if (!ids.empty() && ids.size() != seqs.size()) throw ArgumentError("embed_sequences: id count mismatch");
    EmbeddingTable table(params.state_dim());
    for (std::size_t i = 0; i < seqs.size(); ++i) table.add(ids.empty() ? std::to_string(i) : ids[i], sequence_embed(seqs[i], params));
    return table;
}

SequenceDataset read_sequences(std::istream& is) {
    SequenceDataset data;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto body = trim(line);
        if (body.empty()) continue;
        std::string steps_part = body;
        std::optional<std::vector<double>> label;
        if (auto bar = body.find('|'); bar != std::string::npos) {
            steps_part = trim(std::string_view(body).substr(0, bar));
            std::vector<double> lv;
            for (const auto& tok : split(std::string_view(body).substr(bar + 1), ','))
                lv.push_back(parse_double(trim(tok), lineno));
            label = std::move(lv);
        }
        Sequence seq;
        for (const auto& step : split(steps_part, ';')) {
            std::vector<double> v;
            for (const auto& tok : split(step, ',')) v.push_back(parse_double(trim(tok), lineno));
            seq.steps.push_back(std::move(v));
        }
        try {
            seq.validate();
        } catch (const ArgumentError& e) {
            throw ParseError(e.what(), lineno);
        }
        if (!data.sequences.empty() && seq.steps.front().size() != data.sequences.front().steps.front().size())
            throw ParseError("step length differs from earlier records", lineno);
        data.ids.push_back(std::to_string(data.sequences.size()));
        data.sequences.push_back(std::move(seq));
        data.labels.push_back(std::move(label));
    }
    return data;
}

SequenceDataset read_sequences(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ArgumentError("cannot open '" + path + "' for reading");
    return read_sequences(is);
}

void write_sequences(const SequenceDataset& data, std::ostream& os) {
    for (std::size_t i = 0; i < data.sequences.size(); ++i) {
        const auto& steps = data.sequences[i].steps;
        for (std::size_t t = 0; t < steps.size(); ++t) {
            if (t) os << ';';
            for (std::size_t k = 0; k < steps[t].size(); ++k) os << (k ? "," : "") << format_double(steps[t][k]);
        }
        if (i < data.labels.size() && data.labels[i]) {
            os << '|';
            const auto& lv = *data.labels[i];
            for (std::size_t k = 0; k < lv.size(); ++k) os << (k ? "," : "") << format_double(lv[k]);
        }
        os << '\n';
    }
}

void save_rnn(const RnnParams& params, std::ostream& os) {
    params.validate();
    os << "ratemb-rnn 1\n"
       << "dims " << params.input_dim() << ' ' << params.state_dim() << ' ' << params.output_dim() << '\n'
       << "activations " << nn::to_string(params.hidden_activation) << ' ' << nn::to_string(params.output_activation)
       << '\n';
    const char* names[] = {"wx", "bx", "wh", "bh", "wo", "bo"};
    const auto ts = params.tensors();
    for (std::size_t t = 0; t < ts.size(); ++t) {
        os << names[t] << ' ';
        write_values(os, ts[t]->values());
    }
}

RnnParams load_rnn(std::istream& is) {
    TokenReader r(is);
    r.expect("ratemb-rnn");
    r.expect("1");
    r.expect("dims");
    const auto p = r.next_size(), l = r.next_size(), j = r.next_size();
    if (p == 0 || l == 0 || j == 0) throw ParseError("rnn dimensions must be positive", r.line());
    r.expect("activations");
    RnnParams params = RnnParams::zeros(p, l, j);
    params.hidden_activation = nn::parse_activation(r.next());
    params.output_activation = nn::parse_activation(r.next());
    const char* names[] = {"wx", "bx", "wh", "bh", "wo", "bo"};
    auto ts = params.tensors();
    for (std::size_t t = 0; t < ts.size(); ++t) {
        r.expect(names[t]);
        auto values = r.next_doubles(ts[t]->size());
        std::copy(values.begin(), values.end(), ts[t]->values().begin());
    }
    return params;
}

}  // namespace ratemb::sequence
