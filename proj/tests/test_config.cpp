#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "heco/config.hpp"
#include "heco/errors.hpp"
#include "test_util.hpp"

using namespace heco;
using testutil::TempDir;
using testutil::write_file;

TEST_CASE("run config parsing") {
    TempDir dir("cfg");

    SUBCASE("published hyperparameter values are accepted verbatim") {
        write_file(dir.file("acm.txt"),
                   "data ./acm\n"
                   "out ./out\n"
                   "lr 0.0008\n"
                   "patience 5\n"
                   "sample A 7\n"
                   "sample S 1\n"
                   "tau 0.8\n"
                   "dropout_feat 0.3\n"
                   "dropout_attn 0.5\n"
                   "t_pos 7\n"
                   "seed 1\n");
        auto cfg = parse_run_config(dir.file("acm.txt"));
        CHECK(cfg.train.lr == 0.0008);
        CHECK(cfg.train.patience == 5);
        CHECK(cfg.train.sample_overrides.at("A") == 7);
        CHECK(cfg.train.sample_overrides.at("S") == 1);
        CHECK(cfg.train.tau == 0.8);
        CHECK(cfg.train.dropout_feat == 0.3);
        CHECK(cfg.train.dropout_attn == 0.5);
        CHECK(cfg.train.t_pos == 7);
        CHECK(cfg.seed_set);
        cfg.validate();
    }
    SUBCASE("defaults survive an empty config") {
        write_file(dir.file("empty.txt"), "# nothing but comments\n");
        auto cfg = parse_run_config(dir.file("empty.txt"));
        CHECK(cfg.train.dim == 64);
        CHECK(cfg.train.adam.beta1 == 0.9);
        CHECK(cfg.train.adam.beta2 == 0.999);
        CHECK(cfg.train.adam.eps == 1e-8);
        CHECK(cfg.train.extension == Extension::None);
        CHECK_FALSE(cfg.seed_set);
    }
    SUBCASE("unknown keys are typo-safe") {
        write_file(dir.file("typo.txt"), "data d\nout o\nlaerning_rate 0.1\n");
        CHECK_THROWS_WITH_AS(parse_run_config(dir.file("typo.txt")),
                             doctest::Contains("unknown config key"), ConfigError);
    }
    SUBCASE("malformed values point at the line") {
        write_file(dir.file("bad.txt"), "data d\nlr fast\n");
        CHECK_THROWS_WITH_AS(parse_run_config(dir.file("bad.txt")), doctest::Contains("bad.txt:2"),
                             ConfigError);
    }
    SUBCASE("validation rejects out-of-range settings") {
        write_file(dir.file("tau.txt"), "data d\nout o\ntau 0\n");
        CHECK_THROWS_AS(parse_run_config(dir.file("tau.txt")).validate(), ConfigError);
        write_file(dir.file("lambda.txt"), "data d\nout o\nlambda 1.5\n");
        CHECK_THROWS_AS(parse_run_config(dir.file("lambda.txt")).validate(), ConfigError);
        write_file(dir.file("both.txt"), "data d\nsynth s\nout o\n");
        CHECK_THROWS_AS(parse_run_config(dir.file("both.txt")).validate(), ConfigError);
        write_file(dir.file("neither.txt"), "out o\n");
        CHECK_THROWS_AS(parse_run_config(dir.file("neither.txt")).validate(), ConfigError);
    }
    SUBCASE("missing file is a config error") {
        CHECK_THROWS_AS(parse_run_config(dir.file("absent.txt")), ConfigError);
    }
}

TEST_CASE("synthetic spec parsing") {
    TempDir dir("synthspec");
    write_file(dir.file("s.txt"),
               "classes 3\nnodes_per_class 40\ncardinalities 30 150\nintra 0.8\ncross 0.05\n"
               "feat_dim 32\nnoise 0.5\nseed 7\n");
    bool seed_set = false;
    auto spec = parse_synth_spec(dir.file("s.txt"), &seed_set);
    CHECK(spec.classes == 3);
    CHECK(spec.nodes_per_class == 40);
    CHECK(spec.cardinalities == std::vector<int>{30, 150});
    CHECK(spec.intra == 0.8);
    CHECK(spec.cross == 0.05);
    CHECK(spec.feat_dim == 32);
    CHECK(spec.noise == 0.5);
    CHECK(spec.seed == 7);
    CHECK(seed_set);

    write_file(dir.file("bad.txt"), "classses 3\n");
    CHECK_THROWS_AS(parse_synth_spec(dir.file("bad.txt")), ConfigError);
}

TEST_CASE("config hash tracks hyperparameters only") {
    TempDir dir("hash");
    write_file(dir.file("a.txt"), "data x\nout o1\ntau 0.8\n");
    write_file(dir.file("b.txt"), "data y\nout o2\ntau 0.8\n");
    write_file(dir.file("c.txt"), "data x\nout o1\ntau 0.9\n");
    auto a = parse_run_config(dir.file("a.txt"));
    auto b = parse_run_config(dir.file("b.txt"));
    auto c = parse_run_config(dir.file("c.txt"));
    CHECK(config_hash(a) == config_hash(b));  // paths do not change identity
    CHECK(config_hash(a) != config_hash(c));
    CHECK(config_hash(a).size() == 16);
}
