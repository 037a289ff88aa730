#include <benchmark/benchmark.h>

#include <cmath>

#include "ratemb/dimred.hpp"
#include "ratemb/evaluate.hpp"
#include "ratemb/geo.hpp"
#include "ratemb/glm.hpp"
#include "ratemb/nn.hpp"
#include "ratemb/synth.hpp"
#include "ratemb/tensor.hpp"
#include "ratemb/text.hpp"

using namespace ratemb;

namespace {

Tensor noise(Shape shape, SeededRng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_Conv2dValid(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    SeededRng rng(1);
    const Tensor in = noise({side, side, 3}, rng), filters = noise({3, 3, 3, 8}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(conv2d_valid(in, filters));
}
BENCHMARK(BM_Conv2dValid)->Arg(16)->Arg(32)->Arg(64);

void BM_DenseForwardBackward(benchmark::State& state) {
    const auto width = static_cast<std::size_t>(state.range(0));
    SeededRng rng(2);
    nn::Network::LayerList layers;
    layers.push_back(std::make_unique<nn::DenseLayer>(width, width, nn::Activation::tanh, rng));
    layers.push_back(std::make_unique<nn::DenseLayer>(width, 1, nn::Activation::identity, rng));
    const nn::Network net({width}, std::move(layers));
    const Tensor x = noise({width}, rng), y = noise({1}, rng);
    for (auto _ : state) {
        const auto acts = net.forward(x);
        benchmark::DoNotOptimize(net.backward(x, acts, y));
    }
}
BENCHMARK(BM_DenseForwardBackward)->Arg(16)->Arg(64)->Arg(256);

void BM_PcaFit(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    SeededRng rng(3);
    const Tensor x = noise({n, 20}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(dimred::pca_fit(x, 5));
}
BENCHMARK(BM_PcaFit)->Arg(1000)->Arg(10000);

void BM_AttachFeatures(benchmark::State& state) {
    const auto q = static_cast<std::size_t>(state.range(0));
    const auto pts = synth::smooth_geo_field({2000, 4, 0.5}, 4);
    const geo::SourceIndex index(pts);
    const double spacing = geo::default_spacing(pts);
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& p = pts[i++ % pts.size()];
        benchmark::DoNotOptimize(geo::attach_features(geo::span_grid(p.x, p.y, q, spacing), pts, index, {}));
    }
}
BENCHMARK(BM_AttachFeatures)->Arg(5)->Arg(9)->Arg(17);

void BM_Word2VecEpoch(benchmark::State& state) {
    const auto corpus = synth::cluster_corpus({500, 20, 2, 8}, 5);
    const auto vocab = text::Vocabulary::build(corpus);
    text::Word2VecOptions opts;
    opts.mode = state.range(0) == 0 ? text::Word2VecMode::cbow : text::Word2VecMode::skipgram;
    for (auto _ : state)
        benchmark::DoNotOptimize(text::word2vec_train(corpus, vocab, opts, nn::TrainConfig(0.025, 1, 1, 3)));
}
BENCHMARK(BM_Word2VecEpoch)->Arg(0)->Arg(1);

void BM_GlmFitPoisson(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    SeededRng rng(6);
    const Tensor block = noise({n, 8}, rng);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<double>(synth::poisson(std::exp(0.3 * block.at(i, 0)), rng));
    const std::vector<glm::FeatureBlock> blocks = {{"x", block}};
    const auto design = glm::assemble_features(blocks);
    for (auto _ : state) benchmark::DoNotOptimize(glm::glm_fit(design, y, glm::GlmFamily(glm::Family::poisson)));
}
BENCHMARK(BM_GlmFitPoisson)->Arg(1000)->Arg(10000);

void BM_NearestNeighbors(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    SeededRng rng(7);
    EmbeddingTable table(16);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(16);
        for (auto& x : v) x = rng.normal();
        table.add(std::to_string(i), v);
    }
    for (auto _ : state) benchmark::DoNotOptimize(evaluate::nearest_neighbors(table, "0", 10));
}
BENCHMARK(BM_NearestNeighbors)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
