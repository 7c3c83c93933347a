#include "deformreg/config.hpp"

#include <json.hpp>
#include <limits>
#include <set>
#include <type_traits>

#include "deformreg/error.hpp"
#include "deformreg/io.hpp"

namespace deformreg::config {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

// Strict object reader: each get() consumes a key, finish() rejects leftovers.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string at(const std::string& key) const { return path_ + "." + key; }

  template <typename T>
  void get(const std::string& key, T& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    out = convert<T>(*v, at(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<std::int64_t>() < 0) fail(path, "expected a non-negative integer");
        return static_cast<T>(v.get<std::int64_t>());
      } else {
        const auto x = v.get<std::int64_t>();
        if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) fail(path, "integer out of range");
        return static_cast<T>(x);
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "expected a number");
      return v.get<T>();
    } else {
      if (!v.is_string()) fail(path, "expected a string");
      return v.get<std::string>();
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what(), e.byte);
  }
}

// Scalar or per-scale list; a scalar is broadcast.
std::vector<double> weights(Section& s, const std::string& key, std::vector<double> fallback, int scales) {
  const json* v = s.find(key);
  if (v == nullptr) return fallback;
  const std::string path = s.at(key);
  if (v->is_number()) return std::vector<double>(static_cast<std::size_t>(scales), v->get<double>());
  if (!v->is_array()) fail(path, "expected a number or a list of numbers");
  if (static_cast<int>(v->size()) != scales) {
    fail(path, "has " + std::to_string(v->size()) + " entries but arch.levels is " + std::to_string(scales));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const double w = Section::convert<double>((*v)[i], path + "[" + std::to_string(i) + "]");
    if (w < 0) fail(path + "[" + std::to_string(i) + "]", "weights must be non-negative");
    out.push_back(w);
  }
  return out;
}

losses::LossConfig parse_loss(const json* j, int scales) {
  losses::LossConfig c = losses::LossConfig::defaults(scales);
  if (j == nullptr) return c;
  Section s(*j, "$.loss");
  c.alpha = weights(s, "alpha", c.alpha, scales);
  c.beta = weights(s, "beta", c.beta, scales);
  c.gamma = weights(s, "gamma", c.gamma, scales);
  std::string smooth = "edge", reduction = "mean";
  s.get("smooth", smooth);
  s.get("reduction", reduction);
  if (smooth == "edge") c.smooth = losses::SmoothVariant::EdgeE;
  else if (smooth == "normal") c.smooth = losses::SmoothVariant::NormalN;
  else fail(s.at("smooth"), "expected \"edge\" or \"normal\"");
  if (reduction == "mean") c.reduction = losses::Reduction::MeanPerPixel;
  else if (reduction == "sum") c.reduction = losses::Reduction::Sum;
  else fail(s.at("reduction"), "expected \"mean\" or \"sum\"");
  s.finish();
  return c;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  const json root = parse_json(json_text);
  Section top(root, "$");
  RunConfig c;

  if (const json* a = top.find("arch")) {
    Section s(*a, "$.arch");
    s.get("levels", c.arch.levels);
    s.get("base_channels", c.arch.base_channels);
    s.get("height", c.arch.height);
    s.get("width", c.arch.width);
    s.get("leaky_slope", c.arch.leaky_slope);
    s.get("seed", c.init_seed);
    s.finish();
  }
  try {
    c.arch.validate();
  } catch (const ConfigError& e) {
    fail("$.arch", e.what());
  }
  const int scales = c.arch.levels;
  const json* loss = top.find("loss");

  engine::TrainMode mode = engine::TrainMode::Unsupervised;
  const json* tr = top.find("train");
  if (tr != nullptr && tr->is_object() && tr->contains("mode")) {
    const auto m = Section::convert<std::string>((*tr)["mode"], "$.train.mode");
    if (m == "supervised") mode = engine::TrainMode::SupervisedEPE;
    else if (m != "unsupervised") fail("$.train.mode", "expected \"unsupervised\" or \"supervised\"");
  }
  c.train = engine::TrainConfig::defaults(mode, scales);
  c.train.loss = parse_loss(loss, scales);
  if (tr != nullptr) {
    Section s(*tr, "$.train");
    s.find("mode");
    s.get("batch_size", c.train.batch_size);
    s.get("initial_lr", c.train.initial_lr);
    s.get("halve_after_epochs", c.train.halve_after_epochs);
    s.get("extra_epochs", c.train.extra_epochs);
    s.get("seed", c.train.seed);
    s.get("beta1", c.train.beta1);
    s.get("beta2", c.train.beta2);
    s.get("weight_decay", c.train.weight_decay);
    s.get("divergence_factor", c.train.divergence_factor);
    s.finish();
  }
  try {
    c.train.validate();
  } catch (const ConfigError& e) {
    fail("$.train", e.what());
  }

  c.optimize.loss = c.train.loss;
  if (const json* o = top.find("optimize")) {
    Section s(*o, "$.optimize");
    if (const json* it = s.find("iterations")) {
      if (it->is_number_integer()) {
        c.optimize.iterations.assign(static_cast<std::size_t>(scales), Section::convert<int>(*it, s.at("iterations")));
      } else if (it->is_array() && static_cast<int>(it->size()) == scales) {
        for (std::size_t i = 0; i < it->size(); ++i) {
          c.optimize.iterations.push_back(
              Section::convert<int>((*it)[i], s.at("iterations") + "[" + std::to_string(i) + "]"));
        }
      } else {
        fail(s.at("iterations"), "expected an integer or a list of " + std::to_string(scales) + " integers");
      }
      for (int n : c.optimize.iterations)
        if (n < 0) fail(s.at("iterations"), "iteration counts must be non-negative");
    }
    s.get("lr", c.optimize.lr);
    s.get("divergence_factor", c.optimize.divergence_factor);
    if (!(c.optimize.lr > 0)) fail(s.at("lr"), "must be > 0");
    if (!(c.optimize.divergence_factor > 1)) fail(s.at("divergence_factor"), "must be > 1");
    s.finish();
  }
  if (const json* p = top.find("paths")) {
    Section s(*p, "$.paths");
    s.get("dataset", c.paths.dataset);
    s.get("output", c.paths.output);
    s.get("checkpoint", c.paths.checkpoint);
    s.finish();
  }
  top.finish();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  const auto bytes = io::read_file(path);
  try {
    return parse_run_config(std::string(bytes.begin(), bytes.end()));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

synth::SynthSpec parse_synth_spec(const std::string& json_text) {
  const json root = parse_json(json_text);
  Section s(root, "$");
  synth::SynthSpec spec;
  s.get("pattern", spec.pattern);
  s.get("base_image", spec.base_image);
  std::string family = synth::family_name(spec.family);
  s.get("family", family);
  try {
    spec.family = synth::parse_family(family);
  } catch (const ConfigError& e) {
    fail(s.at("family"), e.what());
  }
  s.get("max_displacement", spec.max_displacement);
  s.get("pair_count", spec.pair_count);
  s.get("seed", spec.seed);
  s.get("noise_sigma", spec.noise_sigma);
  s.get("height", spec.height);
  s.get("width", spec.width);
  s.finish();
  if (spec.base_image.empty()) {
    try {
      spec.validate();
    } catch (const ConfigError& e) {
      fail("$", e.what());
    }
  }
  return spec;
}

synth::SynthSpec load_synth_spec(const std::string& path) {
  const auto bytes = io::read_file(path);
  try {
    return parse_synth_spec(std::string(bytes.begin(), bytes.end()));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace deformreg::config
