#include "heco/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "heco/errors.hpp"

namespace fs = std::filesystem;

namespace heco {

namespace {

struct ConfigRow {
    std::string file;
    int number = 0;
    std::vector<std::string> tokens;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(file + ":" + std::to_string(number) + ": " + msg);
    }
    const std::string& key() const { return tokens[0]; }
    std::size_t args() const { return tokens.size() - 1; }

    const std::string& arg(std::size_t i) const {
        if (i + 1 >= tokens.size()) fail("missing value for '" + tokens[0] + "'");
        return tokens[i + 1];
    }
    int int_arg(std::size_t i) const {
        try {
            std::size_t pos = 0;
            const int v = std::stoi(arg(i), &pos);
            if (pos != arg(i).size()) throw std::invalid_argument("");
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail("expected an integer for '" + key() + "', got '" + arg(i) + "'");
        }
    }
    double double_arg(std::size_t i) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(arg(i), &pos);
            if (pos != arg(i).size()) throw std::invalid_argument("");
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail("expected a number for '" + key() + "', got '" + arg(i) + "'");
        }
    }
};

std::vector<ConfigRow> read_config_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::vector<ConfigRow> rows;
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        ConfigRow row{path, number, {}};
        std::string tok;
        while (ls >> tok) row.tokens.push_back(tok);
        if (!row.tokens.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void RunConfig::validate() const {
    train.validate();
    eval.validate();
    if (data_dir.empty() == synth_file.empty())
        throw ConfigError("exactly one of 'data' and 'synth' must be given");
}

RunConfig parse_run_config(const std::string& path) {
    RunConfig cfg;
    for (const auto& row : read_config_rows(path)) {
        const auto& key = row.key();
        if (key == "data") {
            cfg.data_dir = row.arg(0);
        } else if (key == "synth") {
            cfg.synth_file = row.arg(0);
        } else if (key == "out") {
            cfg.out_dir = row.arg(0);
        } else if (key == "seed") {
            cfg.train.seed = static_cast<std::uint64_t>(row.int_arg(0));
            cfg.seed_set = true;
        } else if (key == "dim") {
            cfg.train.dim = static_cast<std::size_t>(row.int_arg(0));
        } else if (key == "tau") {
            cfg.train.tau = row.double_arg(0);
        } else if (key == "lambda") {
            cfg.train.lambda = row.double_arg(0);
        } else if (key == "t_pos") {
            cfg.train.t_pos = row.int_arg(0);
        } else if (key == "lr") {
            cfg.train.lr = row.double_arg(0);
        } else if (key == "patience") {
            cfg.train.patience = row.int_arg(0);
        } else if (key == "max_epochs") {
            cfg.train.max_epochs = row.int_arg(0);
        } else if (key == "dropout_feat") {
            cfg.train.dropout_feat = row.double_arg(0);
        } else if (key == "dropout_attn") {
            cfg.train.dropout_attn = row.double_arg(0);
        } else if (key == "leaky_slope") {
            cfg.train.leaky_slope = row.double_arg(0);
        } else if (key == "activation") {
            const auto& v = row.arg(0);
            if (v == "elu")
                cfg.train.activation = Activation::Elu;
            else if (v == "relu")
                cfg.train.activation = Activation::Relu;
            else if (v == "tanh")
                cfg.train.activation = Activation::Tanh;
            else
                row.fail("unknown activation '" + v + "'");
        } else if (key == "adam_beta1") {
            cfg.train.adam.beta1 = row.double_arg(0);
        } else if (key == "adam_beta2") {
            cfg.train.adam.beta2 = row.double_arg(0);
        } else if (key == "adam_eps") {
            cfg.train.adam.eps = row.double_arg(0);
        } else if (key == "sample") {
            if (row.args() != 2) row.fail("expected 'sample <type letter> <count>'");
            cfg.train.sample_overrides[row.arg(0)] = row.int_arg(1);
        } else if (key == "sample_default") {
            cfg.train.sample_default = row.int_arg(0);
        } else if (key == "extension") {
            const auto& v = row.arg(0);
            if (v == "none")
                cfg.train.extension = Extension::None;
            else if (v == "mu")
                cfg.train.extension = Extension::Mu;
            else if (v == "gan")
                cfg.train.extension = Extension::Gan;
            else
                row.fail("unknown extension '" + v + "'");
        } else if (key == "mu_k") {
            cfg.train.mu.k = row.int_arg(0);
        } else if (key == "gan_sigma2") {
            cfg.train.gan.sigma2 = row.double_arg(0);
        } else if (key == "gan_k0") {
            cfg.train.gan.k0 = row.int_arg(0);
        } else if (key == "gan_kd") {
            cfg.train.gan.k_d = row.int_arg(0);
        } else if (key == "gan_kg") {
            cfg.train.gan.k_g = row.int_arg(0);
        } else if (key == "gan_idg") {
            cfg.train.gan.i_dg = row.int_arg(0);
        } else if (key == "gan_kh") {
            cfg.train.gan.k_h = row.int_arg(0);
        } else if (key == "gan_pi") {
            cfg.train.gan.pi_size = row.int_arg(0);
        } else if (key == "gan_batch") {
            cfg.train.gan.batch = row.int_arg(0);
        } else if (key == "eval_labels_per_class") {
            if (row.args() < 1) row.fail("expected at least one size");
            cfg.eval.labels_per_class.clear();
            for (std::size_t i = 0; i < row.args(); ++i)
                cfg.eval.labels_per_class.push_back(row.int_arg(i));
        } else if (key == "eval_val") {
            cfg.eval.val_size = row.int_arg(0);
        } else if (key == "eval_test") {
            cfg.eval.test_size = row.int_arg(0);
        } else if (key == "eval_repeats") {
            cfg.eval.repeats = row.int_arg(0);
        } else if (key == "probe_lr") {
            cfg.eval.probe_lr = row.double_arg(0);
        } else if (key == "probe_epochs") {
            cfg.eval.probe_epochs = row.int_arg(0);
        } else if (key == "kmeans_restarts") {
            cfg.eval.kmeans_restarts = row.int_arg(0);
        } else if (key == "kmeans_max_iter") {
            cfg.eval.kmeans_max_iter = row.int_arg(0);
        } else {
            row.fail("unknown config key '" + key + "'");
        }
    }
    return cfg;
}

SynthSpec parse_synth_spec(const std::string& path, bool* seed_set) {
    SynthSpec spec;
    if (seed_set) *seed_set = false;
    for (const auto& row : read_config_rows(path)) {
        const auto& key = row.key();
        if (key == "classes") {
            spec.classes = row.int_arg(0);
        } else if (key == "nodes_per_class") {
            spec.nodes_per_class = row.int_arg(0);
        } else if (key == "cardinalities") {
            if (row.args() < 1) row.fail("expected at least one cardinality");
            spec.cardinalities.clear();
            for (std::size_t i = 0; i < row.args(); ++i)
                spec.cardinalities.push_back(row.int_arg(i));
        } else if (key == "intra") {
            spec.intra = row.double_arg(0);
        } else if (key == "cross") {
            spec.cross = row.double_arg(0);
        } else if (key == "feat_dim") {
            spec.feat_dim = row.int_arg(0);
        } else if (key == "noise") {
            spec.noise = row.double_arg(0);
        } else if (key == "seed") {
            spec.seed = static_cast<std::uint64_t>(row.int_arg(0));
            if (seed_set) *seed_set = true;
        } else {
            row.fail("unknown synthetic spec key '" + key + "'");
        }
    }
    return spec;
}

std::string canonical_config_text(const RunConfig& cfg) {
    std::ostringstream out;
    const auto& t = cfg.train;
    out << "activation " << (t.activation == Activation::Elu   ? "elu"
                             : t.activation == Activation::Relu ? "relu"
                                                                : "tanh")
        << "\n";
    out << "adam_beta1 " << fmt_double(t.adam.beta1) << "\n";
    out << "adam_beta2 " << fmt_double(t.adam.beta2) << "\n";
    out << "adam_eps " << fmt_double(t.adam.eps) << "\n";
    out << "dim " << t.dim << "\n";
    out << "dropout_attn " << fmt_double(t.dropout_attn) << "\n";
    out << "dropout_feat " << fmt_double(t.dropout_feat) << "\n";
    out << "extension "
        << (t.extension == Extension::None ? "none" : t.extension == Extension::Mu ? "mu" : "gan")
        << "\n";
    if (t.extension == Extension::Gan) {
        out << "gan_batch " << t.gan.batch << "\n";
        out << "gan_idg " << t.gan.i_dg << "\n";
        out << "gan_k0 " << t.gan.k0 << "\n";
        out << "gan_kd " << t.gan.k_d << "\n";
        out << "gan_kg " << t.gan.k_g << "\n";
        out << "gan_kh " << t.gan.k_h << "\n";
        out << "gan_pi " << t.gan.pi_size << "\n";
        out << "gan_sigma2 " << fmt_double(t.gan.sigma2) << "\n";
    }
    out << "lambda " << fmt_double(t.lambda) << "\n";
    out << "leaky_slope " << fmt_double(t.leaky_slope) << "\n";
    out << "lr " << fmt_double(t.lr) << "\n";
    out << "max_epochs " << t.max_epochs << "\n";
    if (t.extension == Extension::Mu) out << "mu_k " << t.mu.k << "\n";
    out << "patience " << t.patience << "\n";
    for (const auto& [letter, count] : t.sample_overrides)
        out << "sample " << letter << " " << count << "\n";
    out << "sample_default " << t.sample_default << "\n";
    out << "seed " << t.seed << "\n";
    out << "t_pos " << t.t_pos << "\n";
    out << "tau " << fmt_double(t.tau) << "\n";
    return out.str();
}

std::string config_hash(const RunConfig& cfg) {
    const std::string text = canonical_config_text(cfg);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void run_synth(const SynthSpec& spec, const std::string& out_dir) {
    auto data = generate_synthetic(spec);
    write_dataset(out_dir, data.graph, data.labels, data.metapaths);
}

namespace {

LoadedDataset load_for(const RunConfig& cfg) {
    if (!cfg.data_dir.empty()) return load_dataset(cfg.data_dir);
    return generate_synthetic(parse_synth_spec(cfg.synth_file));
}

}  // namespace

void run_train(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.out_dir.empty()) throw ConfigError("train needs an output directory");
    auto data = load_for(cfg);
    auto run = run_training(data, cfg.train);

    fs::create_directories(cfg.out_dir);
    const std::string hash = config_hash(cfg);
    run.result.embeddings.config_hash = hash;
    run.result.embeddings_sc.config_hash = hash;
    save_embeddings((fs::path(cfg.out_dir) / "embeddings.tsv").string(), run.result.embeddings);
    save_embeddings((fs::path(cfg.out_dir) / "embeddings_sc.tsv").string(), run.result.embeddings_sc);
    run.trainer->store().save((fs::path(cfg.out_dir) / "checkpoint.txt").string());
    write_loss_trace((fs::path(cfg.out_dir) / "loss_trace.tsv").string(), run.result,
                     cfg.train.extension == Extension::Gan);
    write_attention_trace((fs::path(cfg.out_dir) / "attn_trace.tsv").string(), run.result);
    std::ofstream snap(fs::path(cfg.out_dir) / "config.txt");
    if (!snap) throw DataError("cannot write config snapshot");
    snap << canonical_config_text(cfg);
}

void run_embed(const RunConfig& cfg, const std::string& checkpoint, const std::string& view,
               const std::string& out_dir) {
    cfg.validate();
    if (view != "mp" && view != "sc") throw ConfigError("view must be 'mp' or 'sc'");
    auto data = load_for(cfg);
    std::vector<MetaPathGraph> mpgs;
    for (const auto& spec : data.metapaths) mpgs.push_back(build_metapath_graph(data.graph, spec));
    auto positives = select_positives(mpgs, cfg.train.t_pos);
    HecoTrainer trainer(data.graph, std::move(mpgs), std::move(positives), cfg.train);
    trainer.store().load(checkpoint);
    auto z = trainer.eval_embeddings();

    EmbeddingMatrix emb;
    emb.m = view == "mp" ? z.z_mp : z.z_sc;
    emb.view = view;
    emb.epoch = 0;
    emb.config_hash = config_hash(cfg);
    fs::create_directories(out_dir);
    save_embeddings((fs::path(out_dir) / ("embeddings_" + view + ".tsv")).string(), emb);
}

MetricsReport run_eval(const RunConfig& cfg, const std::string& embeddings_file,
                       const std::string& out_dir) {
    cfg.eval.validate();
    if (cfg.data_dir.empty() && cfg.synth_file.empty())
        throw ConfigError("eval needs a dataset for labels");
    auto data = load_for(cfg);
    auto emb = load_embeddings(embeddings_file);
    auto report = evaluate_embeddings(emb.m, data.labels, cfg.eval, cfg.train.seed);

    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "report.tsv");
        if (!out) throw DataError("cannot write report");
        out << report_table(report);
    }
    {
        std::ofstream out(fs::path(out_dir) / "summary.txt");
        if (!out) throw DataError("cannot write summary");
        out << report_summary(report);
    }
    return report;
}

}  // namespace heco
