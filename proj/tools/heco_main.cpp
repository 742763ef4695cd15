#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "heco/config.hpp"
#include "heco/errors.hpp"

namespace {

struct SeedFlag {
    std::int64_t value = 0;
    bool given = false;
};

int dispatch(int argc, char** argv) {
    CLI::App app{"Cross-view co-contrastive embedding for heterogeneous graphs"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a planted-class synthetic dataset");
    std::string synth_spec, synth_out;
    SeedFlag synth_seed;
    synth->add_option("--spec", synth_spec, "Synthetic spec file")->required();
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--seed", synth_seed.value, "Seed (a seed in the spec file wins)")
        ->each([&](const std::string&) { synth_seed.given = true; });

    // train
    auto* train = app.add_subcommand("train", "Train embeddings");
    std::string train_config, train_out, train_ext;
    SeedFlag train_seed;
    train->add_option("--config", train_config, "Run config file")->required();
    train->add_option("--out", train_out, "Output directory (overrides config)");
    train->add_option("--seed", train_seed.value, "Seed (a seed in the config wins)")
        ->each([&](const std::string&) { train_seed.given = true; });
    train->add_option("--extension", train_ext, "none, mu or gan (overrides config)");

    // embed
    auto* embed = app.add_subcommand("embed", "Write embeddings from a checkpoint");
    std::string embed_config, embed_ckpt, embed_out, embed_view = "mp";
    embed->add_option("--config", embed_config, "Run config file")->required();
    embed->add_option("--checkpoint", embed_ckpt, "Checkpoint file")->required();
    embed->add_option("--out", embed_out, "Output directory")->required();
    embed->add_option("--view", embed_view, "mp or sc (default mp)");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate an embedding file");
    std::string eval_config, eval_emb, eval_out;
    eval->add_option("--config", eval_config, "Run config file (dataset supplies labels)")->required();
    eval->add_option("--embeddings", eval_emb, "Embedding file")->required();
    eval->add_option("--out", eval_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        bool spec_has_seed = false;
        auto spec = heco::parse_synth_spec(synth_spec, &spec_has_seed);
        if (synth_seed.given && !spec_has_seed)
            spec.seed = static_cast<std::uint64_t>(synth_seed.value);
        heco::run_synth(spec, synth_out);
        return 0;
    }
    if (train->parsed()) {
        auto cfg = heco::parse_run_config(train_config);
        if (train_seed.given && !cfg.seed_set)
            cfg.train.seed = static_cast<std::uint64_t>(train_seed.value);
        if (!train_out.empty()) cfg.out_dir = train_out;
        if (!train_ext.empty()) {
            if (train_ext == "none")
                cfg.train.extension = heco::Extension::None;
            else if (train_ext == "mu")
                cfg.train.extension = heco::Extension::Mu;
            else if (train_ext == "gan")
                cfg.train.extension = heco::Extension::Gan;
            else
                throw heco::ConfigError("unknown extension '" + train_ext + "'");
        }
        heco::run_train(cfg);
        return 0;
    }
    if (embed->parsed()) {
        auto cfg = heco::parse_run_config(embed_config);
        heco::run_embed(cfg, embed_ckpt, embed_view, embed_out);
        return 0;
    }
    if (eval->parsed()) {
        auto cfg = heco::parse_run_config(eval_config);
        auto report = heco::run_eval(cfg, eval_emb, eval_out);
        std::cout << heco::report_summary(report);
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const heco::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const heco::DataError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 3;
    }
}
