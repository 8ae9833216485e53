#pragma once

#include <filesystem>
#include <string>

#include "lctc/experiment.hpp"

namespace lctc {

// JSON run configuration. Every key is optional except schema_version;
// missing keys keep the RunConfig defaults, unknown keys are rejected.
//
// {
//   "schema_version": 1,
//   "seed": 1,
//   "method": "gem",                      // finetune|ewc|online_ewc|si|kd|gem
//   "policy": "median_length",            // gem only: random|min_perplexity|median_length
//   "memory_fraction": 0.1,
//   "lm": {"order": 2, "add_k": 0.1},
//   "model": {"input_dim": 8, "hidden_dim": 32, "num_layers": 2,
//             "bidirectional": false, "downsample_stride": 2, "vocab_size": 8},
//   "train": {"epochs": 4, "batch_size": 8, "eval_every": 25,
//             "decode": "greedy", "beam_width": 8, "lm_weight": 0.5,
//             "optimizer": {"method": "adam", "lr": 0.01, "momentum": 0.9,
//                           "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "clip_norm": 5},
//             "regularizer": {"lambda": 1, "kd_temperature": 2, "kd_weight": 3,
//                             "ewc_online_decay": 0.9, "si_xi": 0.1, "fisher_samples": 64}},
//   "domains": [ {"task_id": 1, "symbol_weights": [...], "transition_bias": 1,
//                 "feature_noise_sigma": 0.1, "feature_shift": [...],
//                 "mean_label_len": 8, "len_spread": 0.3, "min_duration": 2,
//                 "max_duration": 4, "num_train": 200, "num_eval": 60,
//                 "seed": 11, "prototype_seed": 7, "vocab_size": 8, "input_dim": 8}, ... ]
// }
//
// "domains" omitted or empty selects the built-in three-domain benchmark.
RunConfig parse_run_config(const std::string& json_text);
std::string dump_run_config(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace lctc
