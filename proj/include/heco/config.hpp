#pragma once

#include <optional>
#include <string>

#include "heco/eval.hpp"
#include "heco/extensions.hpp"

namespace heco {

struct RunConfig {
    TrainConfig train;
    EvalConfig eval;
    std::string data_dir;    // dataset directory with manifest.txt
    std::string synth_file;  // or: synthetic spec to generate on the fly
    std::string out_dir;
    bool seed_set = false;  // seed given explicitly in the config file

    void validate() const;
};

// Strict key-value parsing: unknown keys are rejected.
RunConfig parse_run_config(const std::string& path);
SynthSpec parse_synth_spec(const std::string& path, bool* seed_set = nullptr);

// Hyperparameter lines in a fixed order; basis of the config hash.
std::string canonical_config_text(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

// Command bodies shared by the binary and the test suites.
void run_synth(const SynthSpec& spec, const std::string& out_dir);
void run_train(const RunConfig& cfg);
void run_embed(const RunConfig& cfg, const std::string& checkpoint, const std::string& view,
               const std::string& out_dir);
MetricsReport run_eval(const RunConfig& cfg, const std::string& embeddings_file,
                       const std::string& out_dir);

}  // namespace heco
