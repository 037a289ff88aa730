#include "ratemb/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include "ratemb/autoencode.hpp"
#include "ratemb/dimred.hpp"
#include "ratemb/embedding.hpp"
#include "ratemb/evaluate.hpp"
#include "ratemb/geo.hpp"
#include "ratemb/glm.hpp"
#include "ratemb/image_io.hpp"
#include "ratemb/nn.hpp"
#include "ratemb/rng.hpp"
#include "ratemb/sequence.hpp"
#include "ratemb/synth.hpp"
#include "ratemb/text.hpp"
#include "ratemb/textio.hpp"

namespace ratemb::pipeline {

namespace fs = std::filesystem;

namespace {

bool valid_name(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_' || c == '.';
    });
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    for (const auto& part : split(s, ',')) out.push_back(trim(part));
    return out;
}

std::optional<bool> parse_flag(std::string_view s) {
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    return std::nullopt;
}

bool parses_as_size(std::string_view s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) return false;
    return s.size() < 19;
}

bool parses_as_real(std::string_view s) {
    try {
        return !std::isnan(parse_double(s, 0));
    } catch (const Error&) {
        return false;
    }
}

// ---- key tables ------------------------------------------------------------

KeySpec in(std::string name, bool required, std::string help, ValueType t = ValueType::path) {
    return {std::move(name), Role::input, t, required, "", {}, std::move(help)};
}
KeySpec out(std::string name, bool required, std::string help, ValueType t = ValueType::path) {
    return {std::move(name), Role::output, t, required, "", {}, std::move(help)};
}
KeySpec par(std::string name, ValueType t, std::string fallback, std::string help, std::vector<std::string> choices = {},
            bool required = false) {
    return {std::move(name), Role::param, t, required, std::move(fallback), std::move(choices), std::move(help)};
}
KeySpec need(std::string name, ValueType t, std::string help) {
    return {std::move(name), Role::param, t, true, "", {}, std::move(help)};
}

std::vector<KeySpec> training(const std::string& lr, const std::string& epochs, const std::string& batch) {
    return {par("lr", ValueType::real, lr, "learning rate"), par("epochs", ValueType::size, epochs, "training epochs"),
            par("batch", ValueType::size, batch, "minibatch size")};
}

std::vector<KeySpec> with(std::vector<KeySpec> a, const std::vector<KeySpec>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

const std::vector<std::string> kFamilies = {"gaussian", "poisson", "gamma", "binomial"};
const std::vector<std::string> kLinks = {"identity", "log", "logit"};
const std::vector<std::string> kActivations = {"identity", "tanh", "sigmoid", "relu"};
const std::vector<std::string> kGenerators = {"tabular-latent", "marker-sequences", "cluster-corpus", "square-images",
                                              "smooth-geo-field"};

struct KindInfo {
    std::string summary;
    std::vector<KeySpec> keys;
};

const std::map<std::string, KindInfo>& kinds() {
    static const std::map<std::string, KindInfo> table = [] {
        std::map<std::string, KindInfo> t;
        t["standardize"] = {"center and scale every column of an embedding table",
                            {in("input", true, "embedding table"), out("output", true, "standardized table"),
                             out("stats", false, "table with rows 'mean' and 'stddev'")}};
        t["pca"] = {"principal component embeddings of an embedding table",
                    {in("input", true, "embedding table"), out("output", true, "component scores"),
                     out("model", false, "saved PCA model"), need("dim", ValueType::size, "number of components"),
                     par("standardize", ValueType::flag, "false", "standardize columns first")}};
        t["ae"] = {"bottleneck of a fully connected autoencoder",
                   with({in("input", true, "embedding table"), out("output", true, "bottleneck embeddings"),
                         out("model", false, "saved encoder network"), need("dim", ValueType::size, "bottleneck width"),
                         par("hidden", ValueType::size_list, "", "hidden widths, comma separated"),
                         par("activation", ValueType::text, "tanh", "hidden and bottleneck activation", kActivations),
                         par("output-activation", ValueType::text, "identity", "reconstruction activation",
                             kActivations)},
                        training("0.01", "200", "10"))};
        t["conv-ae"] = {"bottleneck of a convolutional autoencoder over images",
                        with({in("images", true, "image list", ValueType::image_list),
                              out("output", true, "embeddings keyed by list position"),
                              out("model", false, "saved encoder network"),
                              need("dim", ValueType::size, "bottleneck width")},
                             training("0.01", "30", "8"))};
        t["word2vec"] = {"word vectors by negative sampling",
                         with({in("corpus", true, "one document per line"), out("output", true, "word vectors"),
                               par("mode", ValueType::text, "skipgram", "model variant", {"cbow", "skipgram"}),
                               par("window", ValueType::size, "2", "context half width"),
                               par("dim", ValueType::size, "10", "vector length"),
                               par("negatives", ValueType::size, "5", "noise words per pair"),
                               par("min-count", ValueType::size, "1", "drop rarer tokens"),
                               par("tokenize", ValueType::flag, "true", "lowercase and split on punctuation")},
                              training("0.025", "5", "1"))};
        t["doc-embed"] = {"document centroids of word vectors",
                          {in("corpus", true, "one document per line"), in("vectors", true, "word vectors"),
                           out("output", true, "document embeddings keyed by line index"),
                           par("tokenize", ValueType::flag, "true", "lowercase and split on punctuation")}};
        t["rnn-embed"] = {"final hidden state of a many-to-one recurrent network",
                          with({in("sequences", true, "labelled sequences"), out("output", true, "sequence embeddings"),
                                out("model", false, "saved recurrent network"),
                                par("dim", ValueType::size, "8", "hidden state width"),
                                par("loss", ValueType::text, "bce", "training loss", {"bce", "mse"}),
                                par("clip", ValueType::real, "0", "gradient norm clip, 0 disables")},
                               training("0.5", "60", "10"))};
        t["crae"] = {"convolutional regional autoencoder embeddings of geo points",
                     with({in("points", true, "geo CSV"), out("output", true, "embeddings keyed by point id"),
                           out("model", false, "saved encoder network"),
                           out("report", false, "smoothness report"), par("dim", ValueType::size, "4", "embedding length"),
                           par("q", ValueType::size, "9", "grid side, odd"),
                           par("spacing", ValueType::real, "", "cell spacing; default diameter/64"),
                           par("cutoff", ValueType::real, "", "max source distance; default none"),
                           par("mask", ValueType::flag, "true", "append a mask channel"),
                           par("k", ValueType::size, "5", "neighbors in the smoothness report")},
                          training("0.002", "60", "8"))};
        t["assemble"] = {"join embedding tables by id into one wide table",
                         {in("blocks", true, "tables, comma separated", ValueType::path_list),
                          out("output", true, "joined table")}};
        t["glm-fit"] = {"fit a generalized linear model on joined feature blocks",
                        {in("features", false, "feature tables, comma separated", ValueType::path_list),
                         in("response", true, "one-column table"), in("offset", false, "one-column offset table"),
                         out("model", true, "saved model"), out("report", false, "coefficient report"),
                         par("family", ValueType::text, "poisson", "response family", kFamilies),
                         par("link", ValueType::text, "", "link; default canonical", kLinks),
                         par("max-iterations", ValueType::size, "25", "IRLS iteration limit"),
                         par("tolerance", ValueType::real, "1e-8", "relative deviance change")}};
        t["glm-predict"] = {"mean predictions of a fitted model",
                            {in("model", true, "saved model"),
                             in("features", true, "feature tables, comma separated", ValueType::path_list),
                             in("offset", false, "one-column offset table"),
                             out("output", true, "predicted means keyed by id")}};
        t["eval-intrinsic"] = {"cosine nearest neighbors of one id",
                               {in("input", true, "embedding table"), out("output", true, "report"),
                                need("query", ValueType::text, "id to query"),
                                par("k", ValueType::size, "5", "neighbors to list")}};
        t["eval-extrinsic"] = {"holdout deviance of a GLM with and without extra blocks",
                               {in("baseline", false, "baseline tables, comma separated", ValueType::path_list),
                                in("augmented", true, "augmented tables, comma separated", ValueType::path_list),
                                in("response", true, "one-column table"), in("offset", false, "one-column offset table"),
                                out("output", true, "report"),
                                par("family", ValueType::text, "poisson", "response family", kFamilies),
                                par("link", ValueType::text, "", "link; default canonical", kLinks),
                                par("train-fraction", ValueType::real, "0.7", "holdout split"),
                                par("folds", ValueType::size, "0", "k-fold count; 0 uses the holdout split")}};
        t["synth"] = {"synthetic datasets with planted structure",
                      {par("generator", ValueType::text, "", "dataset kind", kGenerators, true),
                       out("rating", false, "tabular-latent rating columns"),
                       out("census", false, "tabular-latent census columns"),
                       out("response", false, "tabular-latent claim counts"),
                       out("sequences", false, "marker-sequences output"), out("corpus", false, "cluster-corpus output"),
                       out("images", false, "square-images list", ValueType::image_list),
                       out("points", false, "smooth-geo-field CSV"),
                       par("count", ValueType::size, "", "rows, sequences, documents, images or points"),
                       par("rating-columns", ValueType::size, "", "tabular-latent"),
                       par("census-columns", ValueType::size, "", "tabular-latent"),
                       par("noise", ValueType::real, "", "tabular-latent, smooth-geo-field"),
                       par("latent-effect", ValueType::real, "", "tabular-latent"),
                       par("min-length", ValueType::size, "", "marker-sequences"),
                       par("max-length", ValueType::size, "", "marker-sequences"),
                       par("vocabulary", ValueType::size, "", "cluster-corpus"),
                       par("clusters", ValueType::size, "", "cluster-corpus"),
                       par("length", ValueType::size, "", "cluster-corpus document length"),
                       par("size", ValueType::size, "", "square-images side"),
                       par("min-side", ValueType::size, "", "square-images"),
                       par("max-side", ValueType::size, "", "square-images"),
                       par("features", ValueType::size, "", "smooth-geo-field")}};
        for (auto& [name, info] : t)
            info.keys.push_back(par("seed", ValueType::size, "", "overrides the derived stage seed"));
        return t;
    }();
    return table;
}

const std::map<std::string, std::vector<std::string>>& generator_keys() {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"tabular-latent", {"rating", "census", "response", "count", "rating-columns", "census-columns", "noise",
                            "latent-effect"}},
        {"marker-sequences", {"sequences", "count", "min-length", "max-length"}},
        {"cluster-corpus", {"corpus", "count", "vocabulary", "clusters", "length"}},
        {"square-images", {"images", "count", "size", "min-side", "max-side"}},
        {"smooth-geo-field", {"points", "count", "features", "noise"}},
    };
    return table;
}

const std::map<std::string, std::vector<std::string>>& generator_outputs() {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"tabular-latent", {"rating", "census", "response"}},
        {"marker-sequences", {"sequences"}},
        {"cluster-corpus", {"corpus"}},
        {"square-images", {"images"}},
        {"smooth-geo-field", {"points"}},
    };
    return table;
}

const KeySpec* find_key(const std::vector<KeySpec>& keys, std::string_view name) {
    for (const auto& k : keys)
        if (k.name == name) return &k;
    return nullptr;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal();
}

// ---- stage context ---------------------------------------------------------

class Context {
public:
    Context(const StageConfig& cfg, const fs::path& base, std::uint64_t seed)
        : cfg_(cfg), base_(base), seed_(seed), keys_(stage_keys(cfg.kind)) {}

    std::uint64_t seed() const { return seed_; }

    bool has(const std::string& key) const { return !text(key).empty(); }

    std::string text(const std::string& key) const {
        const auto it = cfg_.params.find(key);
        if (it != cfg_.params.end()) return it->second;
        const auto* spec = find_key(keys_, key);
        return spec ? spec->fallback : std::string();
    }

    std::size_t size(const std::string& key) const { return parse_size(text(key), cfg_.line); }
    double real(const std::string& key) const { return parse_double(text(key), cfg_.line); }
    bool flag(const std::string& key) const { return *parse_flag(text(key)); }

    std::vector<std::size_t> sizes(const std::string& key) const {
        std::vector<std::size_t> out;
        for (const auto& s : split_list(text(key))) out.push_back(parse_size(s, cfg_.line));
        return out;
    }

    fs::path path(const std::string& key) const { return resolve(base_, text(key)); }

    std::vector<fs::path> paths(const std::string& key) const {
        std::vector<fs::path> out;
        for (const auto& s : split_list(text(key))) out.push_back(resolve(base_, s));
        return out;
    }

    nn::TrainConfig train() const { return nn::TrainConfig(real("lr"), size("epochs"), size("batch"), seed_); }

private:
    const StageConfig& cfg_;
    fs::path base_;
    std::uint64_t seed_;
    const std::vector<KeySpec>& keys_;
};

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_with(const fs::path& p, const std::function<void(std::ostream&)>& body) {
    ensure_parent(p);
    std::ostringstream os;
    body(os);
    write_file(p.string(), os.str());
}

void save_table(const EmbeddingTable& table, const fs::path& p) {
    write_with(p, [&](std::ostream& os) { write_embeddings(table, os); });
}

EmbeddingTable load_table(const fs::path& p) { return read_embeddings(p.string()); }

EmbeddingTable from_rows(const Tensor& x, const EmbeddingTable& ids_from) {
    EmbeddingTable out(x.dim(1));
    for (std::size_t i = 0; i < x.dim(0); ++i)
        out.add(ids_from.id(i), std::span<const double>(x.values().data() + i * x.dim(1), x.dim(1)));
    return out;
}

// Feature blocks with rows aligned to the given ids.
std::vector<glm::FeatureBlock> load_blocks(const std::vector<fs::path>& paths, const std::vector<std::string>& ids) {
    std::vector<glm::FeatureBlock> blocks;
    for (const auto& p : paths) {
        const auto table = load_table(p);
        Tensor rows({ids.size(), table.dimension()});
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto at = table.find(ids[i]);
            if (!at) throw ArgumentError("id '" + ids[i] + "' is missing from " + p.string());
            const auto r = table.row(*at);
            std::copy(r.begin(), r.end(), rows.values().begin() + static_cast<std::ptrdiff_t>(i * table.dimension()));
        }
        blocks.push_back({p.stem().string(), std::move(rows)});
    }
    return blocks;
}

struct Column {
    std::vector<std::string> ids;
    std::vector<double> values;
};

Column load_column(const fs::path& p) {
    const auto table = load_table(p);
    if (table.dimension() != 1)
        throw ShapeError(p.string() + " must have one column, has " + std::to_string(table.dimension()));
    Column c;
    c.ids = table.ids();
    for (std::size_t i = 0; i < table.size(); ++i) c.values.push_back(table.row(i)[0]);
    return c;
}

std::vector<double> aligned_column(const fs::path& p, const std::vector<std::string>& ids) {
    const auto table = load_table(p);
    if (table.dimension() != 1)
        throw ShapeError(p.string() + " must have one column, has " + std::to_string(table.dimension()));
    std::vector<double> out;
    for (const auto& id : ids) {
        const auto at = table.find(id);
        if (!at) throw ArgumentError("id '" + id + "' is missing from " + p.string());
        out.push_back(table.row(*at)[0]);
    }
    return out;
}

glm::GlmFamily family_of(const Context& c) {
    const auto f = glm::parse_family(c.text("family"));
    return c.has("link") ? glm::GlmFamily(f, glm::parse_link(c.text("link"))) : glm::GlmFamily(f);
}

text::Corpus load_corpus(const Context& c) { return text::read_corpus(c.path("corpus").string(), c.flag("tokenize")); }

// ---- stage runners ---------------------------------------------------------

void run_standardize(const Context& c) {
    const auto table = load_table(c.path("input"));
    const auto st = dimred::standardize(table.matrix());
    save_table(from_rows(st.data, table), c.path("output"));
    if (c.has("stats")) {
        EmbeddingTable stats(table.dimension());
        stats.add("mean", st.mean);
        stats.add("stddev", st.stddev);
        save_table(stats, c.path("stats"));
    }
}

void run_pca(const Context& c) {
    const auto table = load_table(c.path("input"));
    Tensor x = table.matrix();
    if (c.flag("standardize")) x = dimred::standardize(x).data;
    const auto model = dimred::pca_fit(x, c.size("dim"));
    EmbeddingTable outt(c.size("dim"));
    for (std::size_t i = 0; i < table.size(); ++i)
        outt.add(table.id(i), dimred::pca_encode(model, std::span<const double>(x.values().data() + i * x.dim(1), x.dim(1))));
    save_table(outt, c.path("output"));
    if (c.has("model")) write_with(c.path("model"), [&](std::ostream& os) { dimred::save_pca(model, os); });
}

void run_ae(const Context& c) {
    const auto table = load_table(c.path("input"));
    auto spec = autoencode::AutoencoderSpec::dense(table.dimension(), c.sizes("hidden"), c.size("dim"));
    spec.hidden_activation = spec.bottleneck_activation = nn::parse_activation(c.text("activation"));
    spec.output_activation = nn::parse_activation(c.text("output-activation"));
    const auto ae = autoencode::ae_fit(table.matrix(), spec, c.train());
    std::vector<Tensor> rows;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto r = table.row(i);
        rows.emplace_back(Shape{r.size()}, std::vector<double>(r.begin(), r.end()));
    }
    save_table(autoencode::encode_batch(ae.encoder, rows, table.ids()), c.path("output"));
    if (c.has("model")) write_with(c.path("model"), [&](std::ostream& os) { nn::save_network(ae.encoder, os); });
}

void run_conv_ae(const Context& c) {
    std::vector<Tensor> images;
    for (const auto& p : read_image_list(c.path("images"))) images.push_back(read_image(p.string()));
    if (images.empty()) throw ArgumentError("image list is empty");
    const auto spec = autoencode::AutoencoderSpec::conv_default(images.front().shape(), c.size("dim"));
    const auto ae = autoencode::conv_ae_fit(images, spec, c.train());
    save_table(autoencode::encode_batch(ae.encoder, images), c.path("output"));
    if (c.has("model")) write_with(c.path("model"), [&](std::ostream& os) { nn::save_network(ae.encoder, os); });
}

void run_word2vec(const Context& c) {
    const auto corpus = load_corpus(c);
    const auto vocab = text::Vocabulary::build(corpus, c.size("min-count"));
    text::Word2VecOptions opts;
    opts.mode = text::parse_word2vec_mode(c.text("mode"));
    opts.window = c.size("window");
    opts.dimension = c.size("dim");
    opts.negatives = c.size("negatives");
    const auto r = text::word2vec_train(corpus, vocab, opts, c.train());
    save_table(r.table, c.path("output"));
}

void run_doc_embed(const Context& c) {
    const auto corpus = load_corpus(c);
    const auto vectors = load_table(c.path("vectors"));
    const auto vocab = text::Vocabulary::build({vectors.ids()});
    save_table(text::doc_embeddings(corpus, vectors, vocab), c.path("output"));
}

void run_rnn_embed(const Context& c) {
    const auto data = sequence::read_sequences(c.path("sequences").string());
    std::vector<sequence::Sequence> seqs;
    std::vector<std::vector<double>> labels;
    for (std::size_t i = 0; i < data.sequences.size(); ++i)
        if (data.labels[i]) {
            seqs.push_back(data.sequences[i]);
            labels.push_back(*data.labels[i]);
        }
    if (seqs.empty()) throw ArgumentError("no labelled sequence to train on");
    sequence::ManyToOneOptions opts;
    opts.state_dim = c.size("dim");
    opts.output_dim = labels.front().size();
    opts.loss = nn::parse_loss(c.text("loss"));
    opts.clip_norm = c.real("clip");
    const auto fit = sequence::many_to_one_fit(seqs, labels, c.train(), opts);
    save_table(sequence::embed_sequences(data.sequences, fit.params, data.ids), c.path("output"));
    if (c.has("model")) write_with(c.path("model"), [&](std::ostream& os) { sequence::save_rnn(fit.params, os); });
}

void run_crae(const Context& c) {
    const auto pts = geo::read_geo_csv(c.path("points").string());
    geo::AttachOptions attach;
    if (c.has("cutoff")) attach.cutoff = c.real("cutoff");
    attach.mask = c.flag("mask");
    const double spacing = c.has("spacing") ? c.real("spacing") : geo::default_spacing(pts);
    const auto cuboids = geo::build_cuboids(pts, c.size("q"), spacing, attach);
    if (cuboids.empty()) throw ArgumentError("no points");
    const auto spec = geo::crae_default_spec(cuboids.front().values.shape(), c.size("dim"));
    const auto model = geo::crae_fit(cuboids, spec, c.train());
    const auto table = geo::crae_embed_all(model.encoder, cuboids);
    save_table(table, c.path("output"));
    if (c.has("model")) write_with(c.path("model"), [&](std::ostream& os) { nn::save_network(model.encoder, os); });
    if (c.has("report")) {
        std::vector<std::pair<double, double>> coords;
        for (const auto& p : pts.points()) coords.emplace_back(p.x, p.y);
        const double score = geo::smoothness_score(table, coords, c.size("k"));
        write_with(c.path("report"), [&](std::ostream& os) {
            os << "points: " << pts.size() << "\nk: " << c.size("k") << "\nspacing: " << format_double(spacing)
               << "\nsmoothness: " << format_double(score) << '\n';
        });
    }
}

void run_assemble(const Context& c) {
    const auto paths = c.paths("blocks");
    const auto first = load_table(paths.front());
    const auto blocks = load_blocks(paths, first.ids());
    std::size_t width = 0;
    for (const auto& b : blocks) width += b.rows.dim(1);
    EmbeddingTable outt(width);
    std::vector<double> row(width);
    for (std::size_t i = 0; i < first.size(); ++i) {
        std::size_t k = 0;
        for (const auto& b : blocks)
            for (std::size_t j = 0; j < b.rows.dim(1); ++j) row[k++] = b.rows.at(i, j);
        outt.add(first.id(i), row);
    }
    save_table(outt, c.path("output"));
}

void run_glm_fit(const Context& c) {
    const auto y = load_column(c.path("response"));
    const auto blocks = load_blocks(c.paths("features"), y.ids);
    const auto design = glm::assemble_features(blocks, y.ids.size());
    std::vector<double> offset;
    if (c.has("offset")) offset = aligned_column(c.path("offset"), y.ids);
    glm::GlmOptions opts;
    opts.max_iterations = c.size("max-iterations");
    opts.tolerance = c.real("tolerance");
    const auto model = glm::glm_fit(design, y.values, family_of(c), offset, opts);
    write_with(c.path("model"), [&](std::ostream& os) { glm::save_glm(model, os); });
    if (c.has("report")) write_with(c.path("report"), [&](std::ostream& os) { os << glm::coefficient_report(model); });
}

void run_glm_predict(const Context& c) {
    std::ifstream is(c.path("model"));
    if (!is) throw ArgumentError("cannot open " + c.path("model").string());
    const auto model = glm::load_glm(is);
    const auto paths = c.paths("features");
    const auto ids = load_table(paths.front()).ids();
    const auto design = glm::assemble_features(load_blocks(paths, ids), ids.size());
    std::vector<double> offset;
    if (c.has("offset")) offset = aligned_column(c.path("offset"), ids);
    const auto mu = glm::glm_predict(model, design, offset);
    EmbeddingTable outt(1);
    for (std::size_t i = 0; i < ids.size(); ++i) outt.add(ids[i], std::span<const double>(&mu[i], 1));
    save_table(outt, c.path("output"));
}

void run_eval_intrinsic(const Context& c) {
    const auto report = evaluate::nearest_neighbors(load_table(c.path("input")), c.text("query"), c.size("k"));
    write_with(c.path("output"), [&](std::ostream& os) { os << evaluate::format_report(report, true); });
}

void run_eval_extrinsic(const Context& c) {
    const auto y = load_column(c.path("response"));
    const auto base = load_blocks(c.paths("baseline"), y.ids);
    const auto aug = load_blocks(c.paths("augmented"), y.ids);
    std::vector<double> offset;
    if (c.has("offset")) offset = aligned_column(c.path("offset"), y.ids);
    evaluate::SplitOptions split;
    split.train_fraction = c.real("train-fraction");
    split.folds = c.size("folds");
    split.seed = c.seed();
    const auto report = evaluate::extrinsic_compare(base, aug, y.values, family_of(c), split, offset);
    write_with(c.path("output"), [&](std::ostream& os) { os << evaluate::format_report(report, true); });
}

template <class Params>
void set_size(const Context& c, const char* key, std::size_t Params::*field, Params& p) {
    if (c.has(key)) p.*field = c.size(key);
}

template <class Params>
void set_real(const Context& c, const char* key, double Params::*field, Params& p) {
    if (c.has(key)) p.*field = c.real(key);
}

void run_synth(const Context& c) {
    const auto gen = c.text("generator");
    if (gen == "tabular-latent") {
        synth::TabularLatentParams p;
        set_size(c, "count", &synth::TabularLatentParams::rows, p);
        set_size(c, "rating-columns", &synth::TabularLatentParams::rating_columns, p);
        set_size(c, "census-columns", &synth::TabularLatentParams::census_columns, p);
        set_real(c, "noise", &synth::TabularLatentParams::census_noise, p);
        set_real(c, "latent-effect", &synth::TabularLatentParams::latent_effect, p);
        const auto d = synth::tabular_latent(p, c.seed());
        save_table(d.rating, c.path("rating"));
        save_table(d.census, c.path("census"));
        save_table(d.response, c.path("response"));
    } else if (gen == "marker-sequences") {
        synth::MarkerParams p;
        set_size(c, "count", &synth::MarkerParams::sequences, p);
        set_size(c, "min-length", &synth::MarkerParams::min_length, p);
        set_size(c, "max-length", &synth::MarkerParams::max_length, p);
        const auto d = synth::marker_sequences(p, c.seed());
        write_with(c.path("sequences"), [&](std::ostream& os) { sequence::write_sequences(d, os); });
    } else if (gen == "cluster-corpus") {
        synth::ClusterCorpusParams p;
        set_size(c, "count", &synth::ClusterCorpusParams::documents, p);
        set_size(c, "vocabulary", &synth::ClusterCorpusParams::vocabulary, p);
        set_size(c, "clusters", &synth::ClusterCorpusParams::clusters, p);
        set_size(c, "length", &synth::ClusterCorpusParams::document_length, p);
        const auto d = synth::cluster_corpus(p, c.seed());
        write_with(c.path("corpus"), [&](std::ostream& os) { text::write_corpus(d, os); });
    } else if (gen == "square-images") {
        synth::SquareImageParams p;
        set_size(c, "count", &synth::SquareImageParams::images, p);
        set_size(c, "size", &synth::SquareImageParams::size, p);
        set_size(c, "min-side", &synth::SquareImageParams::min_side, p);
        set_size(c, "max-side", &synth::SquareImageParams::max_side, p);
        const auto images = synth::square_images(p, c.seed());
        const auto list = c.path("images");
        const std::string dir = list.stem().string() + "_images";
        fs::create_directories(list.parent_path() / dir);
        std::ostringstream names;
        for (std::size_t i = 0; i < images.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "%05zu.pgm", i);
            write_image(images[i], (list.parent_path() / dir / name).string());
            names << dir << '/' << name << '\n';
        }
        write_with(list, [&](std::ostream& os) { os << names.str(); });
    } else {
        synth::GeoFieldParams p;
        set_size(c, "count", &synth::GeoFieldParams::points, p);
        set_size(c, "features", &synth::GeoFieldParams::features, p);
        set_real(c, "noise", &synth::GeoFieldParams::noise, p);
        const auto pts = synth::smooth_geo_field(p, c.seed());
        write_with(c.path("points"), [&](std::ostream& os) { geo::write_geo_csv(pts, os); });
    }
}

using Runner = void (*)(const Context&);

Runner runner_for(const std::string& kind) {
    static const std::map<std::string, Runner> table = {
        {"standardize", run_standardize},       {"pca", run_pca},
        {"ae", run_ae},                         {"conv-ae", run_conv_ae},
        {"word2vec", run_word2vec},             {"doc-embed", run_doc_embed},
        {"rnn-embed", run_rnn_embed},           {"crae", run_crae},
        {"assemble", run_assemble},             {"glm-fit", run_glm_fit},
        {"glm-predict", run_glm_predict},       {"eval-intrinsic", run_eval_intrinsic},
        {"eval-extrinsic", run_eval_extrinsic}, {"synth", run_synth},
    };
    return table.at(kind);
}

// ---- validation helpers ----------------------------------------------------

[[noreturn]] void invalid(const StageConfig& s, const std::string& what) {
    const std::string where = s.line ? " (line " + std::to_string(s.line) + ")" : "";
    throw ValidationError("stage '" + s.name + "'" + where + ": " + what);
}

void check_value(const StageConfig& s, const KeySpec& k, const std::string& v) {
    const auto bad = [&](const std::string& expected) {
        invalid(s, "'" + k.name + "' must be " + expected + ", got '" + v + "'");
    };
    switch (k.type) {
        case ValueType::path:
        case ValueType::image_list:
            if (v.empty() || std::any_of(v.begin(), v.end(), [](unsigned char ch) { return std::isspace(ch); }))
                bad("a path without spaces");
            break;
        case ValueType::path_list:
            for (const auto& part : split_list(v))
                if (part.empty() || std::any_of(part.begin(), part.end(), [](unsigned char ch) { return std::isspace(ch); }))
                    bad("a comma separated list of paths");
            break;
        case ValueType::size:
            if (!parses_as_size(v)) bad("a non-negative integer");
            break;
        case ValueType::size_list:
            for (const auto& part : split_list(v))
                if (!parses_as_size(part)) bad("a comma separated list of non-negative integers");
            break;
        case ValueType::real:
            if (!parses_as_real(v)) bad("a number");
            break;
        case ValueType::flag:
            if (!parse_flag(v)) bad("true or false");
            break;
        case ValueType::text:
            if (v.empty()) bad("non-empty");
            break;
    }
    if (!k.choices.empty() && std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) {
        std::string list;
        for (const auto& ch : k.choices) list += (list.empty() ? "" : ", ") + ch;
        bad("one of " + list);
    }
}

void check_stage(const StageConfig& s) {
    if (!kinds().count(s.kind)) invalid(s, "unknown kind '" + s.kind + "'");
    const auto& keys = stage_keys(s.kind);
    for (const auto& [key, value] : s.params) {
        const auto* spec = find_key(keys, key);
        if (!spec) invalid(s, "unknown key '" + key + "' for kind " + s.kind);
        check_value(s, *spec, value);
    }
    for (const auto& k : keys)
        if (k.required && !s.params.count(k.name)) invalid(s, "missing required key '" + k.name + "'");

    const auto get = [&](const std::string& key) { return s.params.count(key) ? s.params.at(key) : std::string(); };
    if (s.kind == "synth") {
        const auto gen = get("generator");
        const auto& allowed = generator_keys().at(gen);
        for (const auto& [key, value] : s.params) {
            if (key == "generator" || key == "seed") continue;
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                invalid(s, "key '" + key + "' does not apply to generator " + gen);
        }
        for (const auto& o : generator_outputs().at(gen))
            if (!s.params.count(o)) invalid(s, "generator " + gen + " needs output '" + o + "'");
    }
    if ((s.kind == "glm-fit" || s.kind == "eval-extrinsic") && s.params.count("link")) {
        try {
            glm::GlmFamily(glm::parse_family(get("family").empty() ? "poisson" : get("family")),
                           glm::parse_link(get("link")));
        } catch (const Error& e) {
            invalid(s, e.what());
        }
    }
    if (s.kind == "crae" && s.params.count("q") && std::stoull(get("q")) % 2 == 0) invalid(s, "q must be odd");
    for (const char* key : {"dim", "epochs", "batch", "k"})
        if (s.params.count(key) && find_key(keys, key) && std::stoull(get(key)) == 0)
            invalid(s, std::string("'") + key + "' must be positive");
    if (s.params.count("lr") && !(std::stod(get("lr")) > 0.0)) invalid(s, "'lr' must be positive");
}

struct StageIo {
    std::vector<std::pair<std::string, std::string>> inputs;   // key, path as written
    std::vector<std::pair<std::string, std::string>> outputs;  // key, path as written
};

StageIo stage_io(const StageConfig& s) {
    StageIo io;
    for (const auto& k : stage_keys(s.kind)) {
        const auto it = s.params.find(k.name);
        if (it == s.params.end() || k.role == Role::param) continue;
        auto& dst = k.role == Role::input ? io.inputs : io.outputs;
        if (k.type == ValueType::path_list) {
            for (const auto& p : split_list(it->second)) dst.emplace_back(k.name, p);
        } else {
            dst.emplace_back(k.name, it->second);
        }
    }
    return io;
}

ValueType type_of(const StageConfig& s, const std::string& key) {
    const auto* k = find_key(stage_keys(s.kind), key);
    return k ? k->type : ValueType::path;
}

}  // namespace

// ---- config ------------------------------------------------------------------

std::string PipelineConfig::canonical() const {
    std::ostringstream os;
    os << "seed = " << seed << '\n';
    for (const auto& s : stages) {
        os << '[' << s.name << "]\nkind = " << s.kind << '\n';
        for (const auto& [k, v] : s.params) os << k << " = " << v << '\n';
    }
    return os.str();
}

PipelineConfig parse_config(std::istream& is) {
    PipelineConfig cfg;
    std::set<std::string> names;
    std::set<std::string> globals;
    std::string raw;
    std::size_t line = 0;
    StageConfig* current = nullptr;
    while (std::getline(is, raw)) {
        ++line;
        const auto s = trim(raw);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError("unterminated section header", line);
            const auto name = trim(std::string_view(s).substr(1, s.size() - 2));
            if (!valid_name(name)) throw ParseError("bad stage name '" + name + "'", line);
            if (!names.insert(name).second) throw ParseError("duplicate stage '" + name + "'", line);
            cfg.stages.push_back({name, "", {}, line});
            current = &cfg.stages.back();
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
        const auto key = trim(std::string_view(s).substr(0, eq));
        const auto value = trim(std::string_view(s).substr(eq + 1));
        if (!valid_name(key)) throw ParseError("bad key '" + key + "'", line);
        if (!current) {
            if (!globals.insert(key).second) throw ParseError("duplicate key '" + key + "'", line);
            if (key == "seed") {
                if (!parses_as_size(value)) throw ParseError("seed must be a non-negative integer", line);
                cfg.seed = std::stoull(value);
            } else if (key == "manifest") {
                cfg.manifest = value;
            } else {
                throw ParseError("unknown global key '" + key + "'", line);
            }
            continue;
        }
        if (key == "kind") {
            if (!current->kind.empty()) throw ParseError("duplicate key 'kind'", line);
            current->kind = value;
        } else if (!current->params.emplace(key, value).second) {
            throw ParseError("duplicate key '" + key + "'", line);
        }
    }
    for (const auto& st : cfg.stages)
        if (st.kind.empty()) throw ParseError("stage '" + st.name + "' has no kind", st.line);
    return cfg;
}

PipelineConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ArgumentError("cannot open config " + path);
    return parse_config(is);
}

const std::vector<std::string>& stage_kinds() {
    static const std::vector<std::string> order = {"synth",      "standardize", "pca",         "ae",
                                                   "conv-ae",    "word2vec",    "doc-embed",   "rnn-embed",
                                                   "crae",       "assemble",    "glm-fit",     "glm-predict",
                                                   "eval-intrinsic", "eval-extrinsic"};
    return order;
}

const std::vector<KeySpec>& stage_keys(const std::string& kind) {
    const auto it = kinds().find(kind);
    if (it == kinds().end()) throw ValidationError("unknown stage kind '" + kind + "'");
    return it->second.keys;
}

std::string_view stage_summary(const std::string& kind) {
    const auto it = kinds().find(kind);
    if (it == kinds().end()) throw ValidationError("unknown stage kind '" + kind + "'");
    return it->second.summary;
}

std::uint64_t stage_seed(std::uint64_t global_seed, const std::string& stage_name) {
    return SeededRng::derive(global_seed, fnv1a64(stage_name));
}

// ---- files -------------------------------------------------------------------

std::vector<fs::path> read_image_list(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ArgumentError("cannot open image list " + path.string());
    std::vector<fs::path> out;
    std::string raw;
    while (std::getline(is, raw)) {
        const auto s = trim(raw);
        if (s.empty() || s[0] == '#') continue;
        out.push_back(resolve(path.parent_path(), s));
    }
    return out;
}

std::string file_checksum(const fs::path& path, ValueType type) {
    const auto bytes = read_file(path.string());
    std::uint64_t h = fnv1a64(bytes);
    if (type == ValueType::image_list)
        for (const auto& p : read_image_list(path)) h = fnv1a64(read_file(p.string()), h);
    return hex64(h);
}

// ---- manifest ----------------------------------------------------------------

namespace {

std::string manifest_body(const RunManifest& m, bool with_times) {
    std::ostringstream os;
    os << "ratemb-manifest 1\nconfig " << m.config_checksum << "\nseed " << m.seed << "\nstages " << m.stages.size()
       << '\n';
    for (const auto& s : m.stages) {
        os << "stage " << s.name << ' ' << s.kind << "\nstage-seed " << s.seed << "\nparams " << s.params_checksum
           << '\n';
        for (const auto& f : s.inputs) os << "input " << f.key << ' ' << f.path << ' ' << f.checksum << '\n';
        for (const auto& f : s.outputs) os << "output " << f.key << ' ' << f.path << ' ' << f.checksum << '\n';
        if (with_times) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.3f", s.seconds);
            os << "seconds " << buf << '\n';
        }
    }
    return os.str();
}

}  // namespace

std::string RunManifest::digest() const { return hex64(fnv1a64(manifest_body(*this, false))); }

std::string RunManifest::to_text() const { return manifest_body(*this, true) + "digest " + digest() + '\n'; }

void write_manifest(const RunManifest& manifest, const fs::path& path) {
    ensure_parent(path);
    write_file(path.string(), manifest.to_text());
}

// ---- validation and execution ------------------------------------------------

std::vector<std::size_t> validate(const PipelineConfig& config, const fs::path& base_dir) {
    for (const auto& s : config.stages) check_stage(s);

    std::map<fs::path, std::size_t> producer;
    for (std::size_t i = 0; i < config.stages.size(); ++i) {
        const auto& s = config.stages[i];
        for (const auto& [key, p] : stage_io(s).outputs) {
            const auto r = resolve(base_dir, p);
            const auto [it, fresh] = producer.emplace(r, i);
            if (!fresh)
                invalid(s, "output '" + p + "' is also written by stage '" + config.stages[it->second].name + "'");
        }
    }

    std::vector<std::set<std::size_t>> deps(config.stages.size());
    for (std::size_t i = 0; i < config.stages.size(); ++i) {
        const auto& s = config.stages[i];
        for (const auto& [key, p] : stage_io(s).inputs) {
            const auto r = resolve(base_dir, p);
            const auto it = producer.find(r);
            if (it != producer.end()) {
                if (it->second == i) invalid(s, "'" + p + "' is both an input and an output");
                deps[i].insert(it->second);
            } else if (!fs::is_regular_file(r)) {
                invalid(s, "input '" + p + "' does not exist and no stage writes it");
            }
        }
    }

    std::vector<std::size_t> order, remaining(config.stages.size());
    std::vector<bool> done(config.stages.size(), false);
    for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = deps[i].size();
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < remaining.size(); ++i)
        if (remaining[i] == 0) ready.insert(i);
    while (!ready.empty()) {
        const auto i = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(i);
        done[i] = true;
        for (std::size_t j = 0; j < deps.size(); ++j)
            if (!done[j] && deps[j].count(i) && --remaining[j] == 0) ready.insert(j);
    }
    if (order.size() != config.stages.size()) {
        std::string cycle;
        for (std::size_t i = 0; i < done.size(); ++i)
            if (!done[i]) cycle += (cycle.empty() ? "" : ", ") + config.stages[i].name;
        throw ValidationError("stage graph has a cycle through: " + cycle);
    }
    return order;
}

RunManifest run_pipeline(const PipelineConfig& config_in, const RunOptions& options) {
    PipelineConfig config = config_in;
    if (options.seed) config.seed = *options.seed;
    const auto order = validate(config, options.base_dir);

    RunManifest manifest;
    manifest.config_checksum = hex64(fnv1a64(config.canonical()));
    manifest.seed = config.seed;

    for (const auto i : order) {
        const auto& s = config.stages[i];
        StageRecord rec;
        rec.name = s.name;
        rec.kind = s.kind;
        rec.seed = s.params.count("seed") ? std::stoull(s.params.at("seed")) : stage_seed(config.seed, s.name);
        std::string params = s.kind + '\n';
        for (const auto& [k, v] : s.params) params += k + " = " + v + '\n';
        params += "stage-seed = " + std::to_string(rec.seed) + '\n';
        rec.params_checksum = hex64(fnv1a64(params));

        const auto io = stage_io(s);
        try {
            for (const auto& [key, p] : io.inputs)
                rec.inputs.push_back({key, p, file_checksum(resolve(options.base_dir, p), type_of(s, key))});
            if (options.log) *options.log << "[" << s.name << "] " << s.kind << " ..." << std::flush;
            const auto t0 = std::chrono::steady_clock::now();
            runner_for(s.kind)(Context(s, options.base_dir, rec.seed));
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            for (const auto& [key, p] : io.outputs)
                rec.outputs.push_back({key, p, file_checksum(resolve(options.base_dir, p), type_of(s, key))});
        } catch (const std::exception& e) {
            if (options.log) *options.log << " failed\n";
            throw StageError(s.name, e.what(), std::current_exception());
        }
        if (options.log) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f", rec.seconds);
            *options.log << " done in " << buf << " s\n";
        }
        manifest.stages.push_back(std::move(rec));
    }
    if (!config.manifest.empty()) write_manifest(manifest, resolve(options.base_dir, config.manifest));
    return manifest;
}

}  // namespace ratemb::pipeline
