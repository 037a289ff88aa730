#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "ratemb/embedding.hpp"
#include "ratemb/error.hpp"
#include "ratemb/geo.hpp"
#include "ratemb/pipeline.hpp"
#include "ratemb/textio.hpp"
#include "test_support.hpp"

using namespace ratemb;
using namespace ratemb::pipeline;
using ratemb::testing::TempDir;

namespace {

PipelineConfig config_of(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

RunManifest run_in(const std::string& text, const std::filesystem::path& dir) {
    RunOptions opts;
    opts.base_dir = dir;
    return run_pipeline(config_of(text), opts);
}

const char* kTabular = R"(seed = 3

[data]
kind = synth
generator = tabular-latent
count = 400
census-columns = 4
rating = rating.emb
census = census.emb
response = y.emb

[census-pca]
kind = pca
input = census.emb
output = census_pca.emb
dim = 1

[design]
kind = assemble
blocks = rating.emb, census_pca.emb
output = design.emb

[fit]
kind = glm-fit
features = design.emb
response = y.emb
model = fit.glm
report = fit.txt
)";

const FileDigest& output_of(const RunManifest& m, const std::string& stage, const std::string& key) {
    for (const auto& s : m.stages)
        if (s.name == stage)
            for (const auto& f : s.outputs)
                if (f.key == key) return f;
    throw std::runtime_error("no output " + stage + "." + key);
}

const StageRecord& stage_of(const RunManifest& m, const std::string& stage) {
    for (const auto& s : m.stages)
        if (s.name == stage) return s;
    throw std::runtime_error("no stage " + stage);
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto at = s.find(from);
    if (at == std::string::npos) throw std::runtime_error("pattern not found: " + from);
    return s.replace(at, from.size(), to);
}

}  // namespace

TEST(EmbeddingFile, RoundTripIsBitExact) {
    SeededRng rng(4);
    EmbeddingTable t(4);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> v(4);
        for (auto& x : v) x = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
        t.add("row" + std::to_string(i), v);
    }
    std::ostringstream out;
    write_embeddings(t, out);
    std::istringstream in(out.str());
    const auto back = read_embeddings(in);
    EXPECT_TRUE(back == t);
    std::ostringstream again;
    write_embeddings(back, again);
    EXPECT_EQ(again.str(), out.str());
}

TEST(EmbeddingFile, MalformedRowsReportTheLine) {
    std::istringstream wide("3 2\na 1 2\nb 1 2 3\nc 1 2\n");
    try {
        read_embeddings(wide);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    std::istringstream short_file("2 2\na 1 2\n");
    EXPECT_THROW(read_embeddings(short_file), ParseError);
    std::istringstream bad_header("x 2\n");
    EXPECT_THROW(read_embeddings(bad_header), ParseError);
}

TEST(EmbeddingFile, EmptyTable) {
    std::istringstream in("0 5\n");
    const auto t = read_embeddings(in);
    EXPECT_EQ(t.size(), 0u);
    EXPECT_EQ(t.dimension(), 5u);
    std::ostringstream out;
    write_embeddings(t, out);
    EXPECT_EQ(out.str(), "0 5\n");
}

TEST(Config, ParsesSectionsAndGlobals) {
    const auto c = config_of("# comment\nseed = 9\nmanifest = m.txt\n\n[a]\nkind = pca\ndim = 2\n  input = x.emb  \n");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.manifest, "m.txt");
    ASSERT_EQ(c.stages.size(), 1u);
    EXPECT_EQ(c.stages[0].kind, "pca");
    EXPECT_EQ(c.stages[0].params.at("input"), "x.emb");
    EXPECT_EQ(c.stages[0].line, 5u);
}

TEST(Config, SyntaxErrorsCarryLines) {
    const auto line_of = [](const std::string& text) {
        try {
            config_of(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return std::size_t{0};
    };
    EXPECT_EQ(line_of("[a]\nkind = pca\n[a]\nkind = pca\n"), 3u);
    EXPECT_EQ(line_of("[a]\nkind = pca\nnot a pair\n"), 3u);
    EXPECT_EQ(line_of("[a]\ndim = 1\n"), 1u);
    EXPECT_EQ(line_of("[a]\nkind = pca\ndim = 1\ndim = 2\n"), 4u);
    EXPECT_EQ(line_of("color = red\n"), 1u);
    EXPECT_EQ(line_of("seed = -1\n"), 1u);
    EXPECT_EQ(line_of("[a b]\n"), 1u);
}

TEST(Config, CanonicalFormIgnoresKeyOrderAndLayout) {
    const auto a = config_of("seed = 1\n[s]\nkind = pca\ndim = 1\ninput = x\n");
    const auto b = config_of("seed=1\n\n[s]\n  input = x\nkind=pca\n# note\ndim = 1\n");
    EXPECT_EQ(a.canonical(), b.canonical());
    EXPECT_NE(a.canonical(), config_of("seed = 2\n[s]\nkind = pca\ndim = 1\ninput = x\n").canonical());
}

TEST(Validate, EmptyPipelineIsANoOp) {
    TempDir dir("empty");
    const auto m = run_in("seed = 5\n", dir.path());
    EXPECT_TRUE(m.stages.empty());
    EXPECT_EQ(m.seed, 5u);
    EXPECT_NE(m.to_text().find("stages 0"), std::string::npos);
}

TEST(Validate, RejectsBadStagesBeforeRunning) {
    TempDir dir("invalid");
    write_file((dir / "x.emb").string(), "1 1\na 1\n");
    const auto rejects = [&](const std::string& text, const std::string& fragment) {
        try {
            validate(config_of(text), dir.path());
            ADD_FAILURE() << "accepted:\n" << text;
        } catch (const ValidationError& e) {
            EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
        }
    };
    rejects("[a]\nkind = magic\n", "unknown kind");
    rejects("[a]\nkind = pca\ninput = x.emb\noutput = y.emb\n", "missing required key 'dim'");
    rejects("[a]\nkind = pca\ninput = x.emb\noutput = y.emb\ndim = 1\ncolour = 2\n", "unknown key 'colour'");
    rejects("[a]\nkind = pca\ninput = x.emb\noutput = y.emb\ndim = two\n", "'dim' must be");
    rejects("[a]\nkind = pca\ninput = x.emb\noutput = y.emb\ndim = 0\n", "must be positive");
    rejects("[a]\nkind = pca\ninput = missing.emb\noutput = y.emb\ndim = 1\n", "does not exist");
    rejects("[a]\nkind = glm-fit\nresponse = x.emb\nmodel = m\nfamily = binomial\nlink = log\n", "binomial");
    rejects("[a]\nkind = glm-fit\nresponse = x.emb\nmodel = m\nfamily = tweedie\n", "one of");
    rejects("[a]\nkind = crae\npoints = x.emb\noutput = o\nq = 4\n", "odd");
    rejects("[a]\nkind = synth\ngenerator = cluster-corpus\n", "needs output 'corpus'");
    rejects("[a]\nkind = synth\ngenerator = cluster-corpus\ncorpus = c.txt\nrating = r.emb\n", "does not apply");
    rejects("[a]\nkind = standardize\ninput = x.emb\noutput = y.emb\n[b]\nkind = standardize\ninput = x.emb\n"
            "output = y.emb\n",
            "also written");
    rejects("[a]\nkind = standardize\ninput = y.emb\noutput = y.emb\n", "both an input and an output");
    rejects("[a]\nkind = standardize\ninput = b.emb\noutput = a.emb\n[b]\nkind = standardize\ninput = a.emb\n"
            "output = b.emb\n",
            "cycle");
}

TEST(Validate, FailsBeforeAnyStageRuns) {
    TempDir dir("early");
    const std::string text =
        "[data]\nkind = synth\ngenerator = cluster-corpus\ncorpus = c.txt\n"
        "[later]\nkind = word2vec\ncorpus = c.txt\noutput = w.emb\nwindow = wide\n";
    EXPECT_THROW(run_in(text, dir.path()), ValidationError);
    EXPECT_FALSE(std::filesystem::exists(dir / "c.txt"));
}

TEST(Validate, OrdersByDependencyThenConfigOrder) {
    TempDir dir("order");
    const auto c = config_of(
        "[fit]\nkind = glm-fit\nresponse = y.emb\nfeatures = z.emb\nmodel = m.glm\n"
        "[pca]\nkind = pca\ninput = census.emb\noutput = z.emb\ndim = 1\n"
        "[data]\nkind = synth\ngenerator = tabular-latent\nrating = r.emb\ncensus = census.emb\nresponse = y.emb\n"
        "[words]\nkind = synth\ngenerator = cluster-corpus\ncorpus = c.txt\n");
    const auto order = validate(c, dir.path());
    std::vector<std::string> names;
    for (auto i : order) names.push_back(c.stages[i].name);
    EXPECT_EQ(names, (std::vector<std::string>{"data", "pca", "fit", "words"}));
}

TEST(Run, PcaAssembleGlmProducesACoefficientReport) {
    TempDir dir("smoke");
    const auto m = run_in(kTabular, dir.path());
    ASSERT_EQ(m.stages.size(), 4u);
    const auto report = read_file((dir / "fit.txt").string());
    EXPECT_NE(report.find("design.3"), std::string::npos);
    EXPECT_NE(report.find("std.error"), std::string::npos);
    const auto design = read_embeddings((dir / "design.emb").string());
    EXPECT_EQ(design.dimension(), 3u);
    EXPECT_EQ(design.size(), 400u);
}

TEST(Run, SameConfigTwiceGivesIdenticalChecksums) {
    TempDir a("det-a"), b("det-b");
    const auto ma = run_in(kTabular, a.path());
    const auto mb = run_in(kTabular, b.path());
    EXPECT_EQ(ma.digest(), mb.digest());
    for (const char* f : {"rating.emb", "census_pca.emb", "design.emb", "fit.glm", "fit.txt"})
        EXPECT_EQ(read_file((a / f).string()), read_file((b / f).string())) << f;
}

TEST(Run, ChecksumsTrackSeedsAndParameters) {
    TempDir base("mut-0"), seeded("mut-1"), param("mut-2"), tail("mut-3");
    const auto m0 = run_in(kTabular, base.path());

    RunOptions opts;
    opts.base_dir = seeded.path();
    opts.seed = 4;
    const auto m1 = run_pipeline(config_of(kTabular), opts);
    EXPECT_NE(output_of(m0, "data", "census").checksum, output_of(m1, "data", "census").checksum);
    EXPECT_NE(m0.config_checksum, m1.config_checksum);

    const auto m2 = run_in(replace(kTabular, "count = 400", "count = 401"), param.path());
    EXPECT_NE(stage_of(m0, "data").params_checksum, stage_of(m2, "data").params_checksum);
    EXPECT_NE(output_of(m0, "fit", "model").checksum, output_of(m2, "fit", "model").checksum);

    // A change confined to the last stage leaves every upstream record alone.
    const auto m3 = run_in(replace(kTabular, "report = fit.txt", "report = fit.txt\ntolerance = 1e-10"), tail.path());
    for (const char* s : {"data", "census-pca", "design"}) {
        EXPECT_EQ(stage_of(m0, s).params_checksum, stage_of(m3, s).params_checksum) << s;
        EXPECT_EQ(stage_of(m0, s).outputs.front().checksum, stage_of(m3, s).outputs.front().checksum) << s;
    }
    EXPECT_NE(stage_of(m0, "fit").params_checksum, stage_of(m3, "fit").params_checksum);
}

TEST(Run, ChangedInputFileChangesTheInputChecksum) {
    TempDir a("in-a"), b("in-b");
    write_file((a / "x.emb").string(), "2 1\na 1\nb 2\n");
    write_file((b / "x.emb").string(), "2 1\na 1\nb 3\n");
    const std::string text = "[s]\nkind = standardize\ninput = x.emb\noutput = y.emb\n";
    const auto ma = run_in(text, a.path()), mb = run_in(text, b.path());
    EXPECT_NE(ma.stages[0].inputs[0].checksum, mb.stages[0].inputs[0].checksum);
    EXPECT_EQ(ma.stages[0].params_checksum, mb.stages[0].params_checksum);
}

TEST(Run, StageFailureNamesTheStageAndKeepsTheCause) {
    TempDir dir("fail");
    write_file((dir / "x.emb").string(), "2 2\na 1 0\nb 0 0\n");
    const std::string text = "[neighbors]\nkind = eval-intrinsic\ninput = x.emb\nquery = a\nk = 1\noutput = r.txt\n";
    try {
        run_in(text, dir.path());
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "neighbors");
        EXPECT_NE(std::string(e.what()).find("stage 'neighbors'"), std::string::npos);
        EXPECT_THROW(std::rethrow_exception(e.cause()), DomainError);
    }
}

TEST(Run, ManifestIsWrittenWhenConfigured) {
    TempDir dir("manifest");
    const auto m = run_in(std::string("manifest = out/run.manifest\n") + kTabular, dir.path());
    const auto text = read_file((dir / "out/run.manifest").string());
    EXPECT_EQ(text, m.to_text());
    EXPECT_NE(text.find("digest " + m.digest()), std::string::npos);
    EXPECT_NE(text.find("output model fit.glm " + output_of(m, "fit", "model").checksum), std::string::npos);
}

TEST(Synth, SmoothGeoFieldFile) {
    TempDir a("geo-a"), b("geo-b");
    const std::string text =
        "[field]\nkind = synth\ngenerator = smooth-geo-field\ncount = 500\nfeatures = 4\npoints = field.csv\n";
    run_in(text, a.path());
    run_in(text, b.path());
    const auto pts = geo::read_geo_csv((a / "field.csv").string());
    EXPECT_EQ(pts.size(), 500u);
    EXPECT_EQ(pts.feature_count(), 4u);
    EXPECT_EQ(read_file((a / "field.csv").string()), read_file((b / "field.csv").string()));
}

TEST(Synth, EveryGeneratorRuns) {
    TempDir dir("gens");
    const auto m = run_in(
        "[t]\nkind = synth\ngenerator = tabular-latent\ncount = 50\nrating = r.emb\ncensus = c.emb\nresponse = y.emb\n"
        "[m]\nkind = synth\ngenerator = marker-sequences\ncount = 20\nsequences = s.seq\n"
        "[c]\nkind = synth\ngenerator = cluster-corpus\ncount = 20\ncorpus = c.txt\n"
        "[i]\nkind = synth\ngenerator = square-images\ncount = 3\nimages = sq.list\n"
        "[g]\nkind = synth\ngenerator = smooth-geo-field\ncount = 20\npoints = g.csv\n",
        dir.path());
    EXPECT_EQ(m.stages.size(), 5u);
    EXPECT_EQ(read_image_list(dir / "sq.list").size(), 3u);
    EXPECT_EQ(read_embeddings((dir / "y.emb").string()).size(), 50u);
}

TEST(Checksums, ImageListsCoverTheImages) {
    TempDir dir("imgs");
    run_in("[i]\nkind = synth\ngenerator = square-images\ncount = 2\nimages = sq.list\n", dir.path());
    const auto before = file_checksum(dir / "sq.list", ValueType::image_list);
    EXPECT_EQ(before, file_checksum(dir / "sq.list", ValueType::image_list));
    const auto images = read_image_list(dir / "sq.list");
    write_file(images[1].string(), read_file(images[0].string()));
    EXPECT_NE(before, file_checksum(dir / "sq.list", ValueType::image_list));
    EXPECT_EQ(file_checksum(dir / "sq.list"), file_checksum(dir / "sq.list"));
}

TEST(StageSeeds, DependOnNameAndGlobalSeed) {
    EXPECT_EQ(stage_seed(1, "a"), stage_seed(1, "a"));
    EXPECT_NE(stage_seed(1, "a"), stage_seed(2, "a"));
    EXPECT_NE(stage_seed(1, "a"), stage_seed(1, "b"));
}

TEST(StageKinds, EveryKindHasKeys) {
    EXPECT_EQ(stage_kinds().size(), 14u);
    for (const auto& k : stage_kinds()) {
        EXPECT_FALSE(stage_keys(k).empty()) << k;
        EXPECT_FALSE(stage_summary(k).empty()) << k;
    }
    EXPECT_THROW(stage_keys("nope"), ValidationError);
}
