#include "dfl/config.hpp"

#include <fstream>
#include <sstream>

#include "dfl/error.hpp"

namespace dfl {

ExperimentConfig::ExperimentConfig() {
  run.topology.seed = 0;  // derived from the master seed
}

json to_json(const ExperimentConfig& e) {
  const RunConfig& r = e.run;
  const HyperParams& h = r.hyper;
  const TopologySpec& t = r.topology;
  const ProblemSpec& p = r.problem;
  return json{
      {"algorithm", to_string(r.algorithm)},
      {"m", r.m},
      {"seed", r.seed},
      {"eval_every", r.eval_every},
      {"verification_mode", r.verification_mode},
      {"init", r.init == InitKind::kZeros ? "zeros" : "gaussian"},
      {"init_scale", r.init_scale},
      {"threads", r.threads},
      {"hyper",
       {{"eta", h.eta},
        {"lambda", h.lambda},
        {"beta", h.beta},
        {"K", h.K},
        {"T", h.T},
        {"rho", h.rho},
        {"momentum", h.momentum},
        {"batch_size", h.batch_size},
        {"lr_decay", h.lr_decay},
        {"schedule", to_string(h.schedule)},
        {"mu_tilde", h.mu_tilde}}},
      {"topology",
       {{"kind", to_string(t.kind)},
        {"seed", t.seed},
        {"p", t.p},
        {"k", t.k},
        {"p_rewire", t.p_rewire},
        {"n_neighbors", t.n_neighbors}}},
      {"problem",
       {{"kind", to_string(p.kind)},
        {"noise_sigma", p.noise_sigma},
        {"quad_dim", p.quad_dim},
        {"eig_min", p.eig_min},
        {"eig_max", p.eig_max},
        {"b_spread", p.b_spread},
        {"homogeneous", p.homogeneous},
        {"rotate", p.rotate},
        {"dataset", p.dataset},
        {"csv_path", p.csv_path},
        {"classes", p.classes},
        {"input_dim", p.input_dim},
        {"samples", p.samples},
        {"separation", p.separation},
        {"test_fraction", p.test_fraction},
        {"hidden", p.hidden}}},
      {"partition",
       {{"kind", to_string(r.partition.kind)},
        {"alpha", r.partition.alpha},
        {"classes_per_client", r.partition.classes_per_client}}},
      {"sweep",
       {{"seeds", e.sweep.seeds}, {"metric", to_string(e.sweep.metric)}, {"threshold", e.sweep.threshold}}},
      {"stability",
       {{"mu_tilde", e.stability.mu_tilde},
        {"perturbed_client", e.stability.perturbed_client},
        {"perturbed_index", e.stability.perturbed_index},
        {"probe_size", e.stability.probe_size},
        {"rounds", e.stability.rounds}}},
  };
}

json default_config_json() { return to_json(ExperimentConfig{}); }

namespace {

bool type_matches(const json& schema, const json& value) {
  if (schema.is_number_float()) return value.is_number();
  if (schema.is_number_unsigned()) return value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
  if (schema.is_number_integer()) return value.is_number_integer();
  if (schema.is_boolean()) return value.is_boolean();
  if (schema.is_string()) return value.is_string();
  if (schema.is_array()) {
    if (!value.is_array()) return false;
    for (const auto& v : value) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) return false;
    }
    return true;
  }
  return schema.type() == value.type();
}

std::string type_name(const json& schema) {
  if (schema.is_number_float()) return "number";
  if (schema.is_number_unsigned()) return "non-negative integer";
  if (schema.is_number_integer()) return "integer";
  if (schema.is_array()) return "array of non-negative integers";
  return schema.type_name();
}

void merge_checked(json& target, const json& overlay, const std::string& prefix) {
  if (!overlay.is_object()) throw ConfigError("config" + (prefix.empty() ? "" : " key " + prefix) + " must be an object");
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!target.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = target[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key);
    } else {
      if (!type_matches(slot, it.value())) {
        throw ConfigError("config key '" + key + "' must be a " + type_name(slot) + ", got " +
                          it.value().dump());
      }
      slot = it.value();
    }
  }
}

}  // namespace

ExperimentConfig experiment_from_json(const json& doc) {
  json merged = default_config_json();
  merge_checked(merged, doc, "");
  ExperimentConfig e;
  try {
    RunConfig& r = e.run;
    r.algorithm = algorithm_kind_from_string(merged["algorithm"]);
    r.m = merged["m"];
    r.seed = merged["seed"];
    r.eval_every = merged["eval_every"];
    r.verification_mode = merged["verification_mode"];
    const std::string init = merged["init"];
    if (init == "zeros") {
      r.init = InitKind::kZeros;
    } else if (init == "gaussian") {
      r.init = InitKind::kGaussian;
    } else {
      throw ConfigError("init must be 'zeros' or 'gaussian', got '" + init + "'");
    }
    r.init_scale = merged["init_scale"];
    r.threads = merged["threads"];

    const json& h = merged["hyper"];
    r.hyper.eta = h["eta"];
    r.hyper.lambda = h["lambda"];
    r.hyper.beta = h["beta"];
    r.hyper.K = h["K"];
    r.hyper.T = h["T"];
    r.hyper.rho = h["rho"];
    r.hyper.momentum = h["momentum"];
    r.hyper.batch_size = h["batch_size"];
    r.hyper.lr_decay = h["lr_decay"];
    r.hyper.schedule = lr_schedule_from_string(h["schedule"]);
    r.hyper.mu_tilde = h["mu_tilde"];

    const json& t = merged["topology"];
    r.topology.kind = topology_kind_from_string(t["kind"]);
    r.topology.m = r.m;
    r.topology.seed = t["seed"];
    r.topology.p = t["p"];
    r.topology.k = t["k"];
    r.topology.p_rewire = t["p_rewire"];
    r.topology.n_neighbors = t["n_neighbors"];

    const json& p = merged["problem"];
    r.problem.kind = problem_kind_from_string(p["kind"]);
    r.problem.noise_sigma = p["noise_sigma"];
    r.problem.quad_dim = p["quad_dim"];
    r.problem.eig_min = p["eig_min"];
    r.problem.eig_max = p["eig_max"];
    r.problem.b_spread = p["b_spread"];
    r.problem.homogeneous = p["homogeneous"];
    r.problem.rotate = p["rotate"];
    r.problem.dataset = p["dataset"];
    r.problem.csv_path = p["csv_path"];
    r.problem.classes = p["classes"];
    r.problem.input_dim = p["input_dim"];
    r.problem.samples = p["samples"];
    r.problem.separation = p["separation"];
    r.problem.test_fraction = p["test_fraction"];
    r.problem.hidden = p["hidden"];

    const json& pa = merged["partition"];
    r.partition.kind = partition_kind_from_string(pa["kind"]);
    r.partition.alpha = pa["alpha"];
    r.partition.classes_per_client = pa["classes_per_client"];

    const json& s = merged["sweep"];
    e.sweep.seeds = s["seeds"].get<std::vector<std::uint64_t>>();
    e.sweep.metric = metric_from_string(s["metric"]);
    e.sweep.threshold = s["threshold"];

    const json& st = merged["stability"];
    e.stability.mu_tilde = st["mu_tilde"];
    e.stability.perturbed_client = st["perturbed_client"];
    e.stability.perturbed_index = st["perturbed_index"];
    e.stability.probe_size = st["probe_size"];
    e.stability.rounds = st["rounds"];
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  if (e.sweep.seeds.empty()) throw ConfigError("sweep.seeds must not be empty");
  e.run.validate();
  return e;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  const json defaults = default_config_json();
  const json* schema = &defaults;
  json* slot = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!schema->is_object() || !schema->contains(parts[i])) {
      throw ConfigError("unknown config key '" + path + "' in override");
    }
    schema = &(*schema)[parts[i]];
    if (!slot->is_object()) *slot = json::object();
    slot = &(*slot)[parts[i]];
  }
  if (schema->is_object()) throw ConfigError("override '" + path + "' names a section, not a value");
  // "--set topology.kind=ring" style strings arrive unquoted; numbers arrive parsed.
  if (schema->is_string() && !value.is_string()) value = text;
  *slot = value;
}

ExperimentConfig load_experiment(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (doc.is_object() && doc.contains("format")) {
    if (doc["format"] != "dfl-summary-v1" || !doc.contains("config")) {
      throw ConfigError("'" + path + "' has an unsupported format tag");
    }
    json inner = doc["config"];
    doc = std::move(inner);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  try {
    return experiment_from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace {

void describe(const json& node, const std::string& prefix, std::ostringstream& os) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      describe(it.value(), key, os);
    } else {
      os << "  " << key << " = " << it.value().dump() << '\n';
    }
  }
}

}  // namespace

std::string describe_defaults() {
  std::ostringstream os;
  os << "Config keys and defaults (JSON; unknown keys are rejected):\n";
  describe(default_config_json(), "", os);
  return os.str();
}

}  // namespace dfl
