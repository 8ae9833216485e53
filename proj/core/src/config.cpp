#include "lctc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lctc/errors.hpp"

namespace lctc {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw FormatError("config: '" + where + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw FormatError("config: unknown key '" + k + "' in " + where);
  }
}

template <class T>
void get(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

DomainSpec parse_domain(const json& j) {
  reject_unknown(j,
                 {"task_id", "vocab_size", "input_dim", "symbol_weights", "transition_bias",
                  "feature_noise_sigma", "feature_shift", "mean_label_len", "len_spread",
                  "min_duration", "max_duration", "num_train", "num_eval", "seed", "prototype_seed"},
                 "domain");
  DomainSpec d;
  get(j, "task_id", d.task_id);
  get(j, "vocab_size", d.vocab_size);
  get(j, "input_dim", d.input_dim);
  get(j, "symbol_weights", d.symbol_weights);
  get(j, "transition_bias", d.transition_bias);
  get(j, "feature_noise_sigma", d.feature_noise_sigma);
  get(j, "feature_shift", d.feature_shift);
  get(j, "mean_label_len", d.mean_label_len);
  get(j, "len_spread", d.len_spread);
  get(j, "min_duration", d.min_duration);
  get(j, "max_duration", d.max_duration);
  get(j, "num_train", d.num_train);
  get(j, "num_eval", d.num_eval);
  get(j, "seed", d.seed);
  get(j, "prototype_seed", d.prototype_seed);
  return d;
}

json domain_json(const DomainSpec& d) {
  return {{"task_id", d.task_id},
          {"vocab_size", d.vocab_size},
          {"input_dim", d.input_dim},
          {"symbol_weights", d.symbol_weights},
          {"transition_bias", d.transition_bias},
          {"feature_noise_sigma", d.feature_noise_sigma},
          {"feature_shift", d.feature_shift},
          {"mean_label_len", d.mean_label_len},
          {"len_spread", d.len_spread},
          {"min_duration", d.min_duration},
          {"max_duration", d.max_duration},
          {"num_train", d.num_train},
          {"num_eval", d.num_eval},
          {"seed", d.seed},
          {"prototype_seed", d.prototype_seed}};
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  reject_unknown(j,
                 {"schema_version", "seed", "method", "policy", "memory_fraction", "lm", "model",
                  "train", "domains"},
                 "config");
  if (!j.contains("schema_version")) throw FormatError("config: schema_version is required");

  RunConfig c;
  get(j, "schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion) {
    throw FormatError("config: unsupported schema_version " + std::to_string(c.schema_version));
  }
  get(j, "seed", c.seed);
  if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
  if (j.contains("policy") && !j.at("policy").is_null()) {
    c.policy = parse_selection_policy(j.at("policy").get<std::string>());
  }
  get(j, "memory_fraction", c.memory_fraction);
  if (j.contains("lm")) {
    const json& lm = j.at("lm");
    reject_unknown(lm, {"order", "add_k"}, "lm");
    get(lm, "order", c.lm_order);
    get(lm, "add_k", c.lm_add_k);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, {"input_dim", "hidden_dim", "num_layers", "bidirectional", "downsample_stride",
                       "vocab_size"},
                   "model");
    get(m, "input_dim", c.model.input_dim);
    get(m, "hidden_dim", c.model.hidden_dim);
    get(m, "num_layers", c.model.num_layers);
    get(m, "bidirectional", c.model.bidirectional);
    get(m, "downsample_stride", c.model.downsample_stride);
    get(m, "vocab_size", c.model.vocab_size);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, {"epochs", "batch_size", "eval_every", "decode", "beam_width", "lm_weight",
                       "optimizer", "regularizer"},
                   "train");
    get(t, "epochs", c.train.epochs);
    get(t, "batch_size", c.train.batch_size);
    get(t, "eval_every", c.train.eval_every);
    if (t.contains("decode")) c.train.decode = parse_decode_mode(t.at("decode").get<std::string>());
    get(t, "beam_width", c.train.beam_width);
    get(t, "lm_weight", c.train.lm_weight);
    if (t.contains("optimizer")) {
      const json& o = t.at("optimizer");
      reject_unknown(o, {"method", "lr", "momentum", "beta1", "beta2", "eps", "clip_norm"}, "optimizer");
      auto& oc = c.train.optimizer;
      if (o.contains("method")) oc.method = parse_optimizer_method(o.at("method").get<std::string>());
      get(o, "lr", oc.lr);
      get(o, "momentum", oc.momentum);
      get(o, "beta1", oc.beta1);
      get(o, "beta2", oc.beta2);
      get(o, "eps", oc.eps);
      get(o, "clip_norm", oc.clip_norm);
    }
    if (t.contains("regularizer")) {
      const json& r = t.at("regularizer");
      reject_unknown(r, {"lambda", "kd_temperature", "kd_weight", "ewc_online_decay", "si_xi",
                         "fisher_samples"},
                     "regularizer");
      auto& rc = c.train.regularizer;
      get(r, "lambda", rc.lambda);
      get(r, "kd_temperature", rc.kd_temperature);
      get(r, "kd_weight", rc.kd_weight);
      get(r, "ewc_online_decay", rc.ewc_online_decay);
      get(r, "si_xi", rc.si_xi);
      get(r, "fisher_samples", rc.fisher_samples);
    }
  }
  if (j.contains("domains")) {
    if (!j.at("domains").is_array()) throw FormatError("config: 'domains' must be an array");
    for (const auto& d : j.at("domains")) c.domains.push_back(parse_domain(d));
  }
  c.validate();
  return c;
}

std::string dump_run_config(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["method"] = to_string(c.method);
  j["policy"] = c.policy ? json(to_string(*c.policy)) : json(nullptr);
  j["memory_fraction"] = c.memory_fraction;
  j["lm"] = {{"order", c.lm_order}, {"add_k", c.lm_add_k}};
  j["model"] = {{"input_dim", c.model.input_dim},
                {"hidden_dim", c.model.hidden_dim},
                {"num_layers", c.model.num_layers},
                {"bidirectional", c.model.bidirectional},
                {"downsample_stride", c.model.downsample_stride},
                {"vocab_size", c.model.vocab_size}};
  const auto& o = c.train.optimizer;
  const auto& r = c.train.regularizer;
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"eval_every", c.train.eval_every},
                {"decode", to_string(c.train.decode)},
                {"beam_width", c.train.beam_width},
                {"lm_weight", c.train.lm_weight},
                {"optimizer",
                 {{"method", to_string(o.method)},
                  {"lr", o.lr},
                  {"momentum", o.momentum},
                  {"beta1", o.beta1},
                  {"beta2", o.beta2},
                  {"eps", o.eps},
                  {"clip_norm", o.clip_norm}}},
                {"regularizer",
                 {{"lambda", r.lambda},
                  {"kd_temperature", r.kd_temperature},
                  {"kd_weight", r.kd_weight},
                  {"ewc_online_decay", r.ewc_online_decay},
                  {"si_xi", r.si_xi},
                  {"fisher_samples", r.fisher_samples}}}};
  j["domains"] = json::array();
  for (const auto& d : c.domains) j["domains"].push_back(domain_json(d));
  return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace lctc
