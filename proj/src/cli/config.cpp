#include "wavecast/cli/config.hpp"

#include <set>
#include <type_traits>

#include "wavecast/errors.hpp"
#include "wavecast/vf1.hpp"

namespace wavecast::cli {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any it was not asked about.
class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      obj_ = root.at(name_);
      if (!obj_.is_object()) throw ConfigError("section \"" + name_ + "\" must be an object");
    } else {
      obj_ = json::object();
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    check<T>(obj_.at(key), key);
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key) + " has the wrong type");
    }
  }

  template <typename T>
  void check(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path(key) + " must be true or false");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) throw ConfigError(path(key) + " must be a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path(key) + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path(key) + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path(key) + " must be a string");
    } else {
      if (!v.is_array()) throw ConfigError(path(key) + " must be a list");
      for (const auto& e : v) check<typename T::value_type>(e, key);
    }
  }

  void get_optional(const std::string& key, std::optional<double>& out) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return;
    double v = 0.0;
    get(key, v);
    out = v;
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key " + path(k));
    }
  }

  std::string path(const std::string& key) const { return "\"" + name_ + "." + key + "\""; }

 private:
  std::string name_;
  json obj_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  static const std::set<std::string> sections{"dataset", "model", "evolution", "train",  "eval",
                                              "sweep",   "gradcheck", "oracle", "io"};
  for (const auto& [k, v] : j.items()) {
    if (!sections.count(k)) throw ConfigError("unknown section \"" + k + "\"");
  }

  RunConfig c;
  {
    Section s(j, "dataset");
    std::string kind = synthgen::kind_name(c.dataset.kind);
    s.get("kind", kind);
    c.dataset.kind = synthgen::parse_kind(kind);
    s.get("dims", c.dataset.dims);
    s.get("n_train", c.dataset.n_train);
    s.get("n_test", c.dataset.n_test);
    s.get("seed", c.dataset.seed);
    s.finish();
    const std::size_t rank = c.dataset.kind == synthgen::Kind::D3 ? 3 : 2;
    require(c.dataset.dims.size() == rank, s.path("dims") + " needs " + std::to_string(rank) + " extents");
    for (auto d : c.dataset.dims) require(d >= 16, s.path("dims") + " extents must be >= 16");
  }
  auto& t = c.train;
  {
    Section s(j, "model");
    s.get("channels", t.channels);
    s.get("history", t.history);
    s.get("epsilon", t.epsilon);
    s.finish();
    require(t.history <= synthgen::kFrames - 1, s.path("history") + " must be <= 5 (sequences have 6 frames)");
  }
  {
    Section s(j, "evolution");
    s.get("unroll", t.unroll);
    s.get_optional("dt", t.dt);
    s.finish();
  }
  {
    Section s(j, "train");
    s.get("epochs", t.epochs);
    s.get("batch_size", t.batch_size);
    s.get("lr", t.adam.lr);
    s.get("beta1", t.adam.beta1);
    s.get("beta2", t.adam.beta2);
    s.get("adam_eps", t.adam.eps);
    s.get("lambda_tv", t.lambda_tv);
    s.get("seed", t.seed);
    s.get("checkpoint_every", t.checkpoint_every);
    s.finish();
  }
  t.validate();
  {
    Section s(j, "eval");
    s.get("tau", c.eval.tau);
    s.get("tau_sweep", c.tau_sweep);
    s.get("spectral_cutoff", c.eval.spectral_cutoff);
    s.get("histogram_bins", c.histogram_bins);
    s.get("plots", c.plots);
    s.finish();
    require(c.eval.tau > 0.0 && c.eval.tau < 1.0, s.path("tau") + " must lie in (0, 1)");
    require(c.eval.spectral_cutoff > 0.0 && c.eval.spectral_cutoff < 1.0,
            s.path("spectral_cutoff") + " must lie in (0, 1)");
    require(!c.tau_sweep.empty(), s.path("tau_sweep") + " must not be empty");
    for (std::size_t i = 0; i < c.tau_sweep.size(); ++i) {
      require(c.tau_sweep[i] > 0.0 && c.tau_sweep[i] < 1.0, s.path("tau_sweep") + " values must lie in (0, 1)");
      require(i == 0 || c.tau_sweep[i] > c.tau_sweep[i - 1], s.path("tau_sweep") + " must be strictly increasing");
    }
    require(c.histogram_bins >= 2, s.path("histogram_bins") + " must be >= 2");
  }
  {
    Section s(j, "sweep");
    s.get("unroll", c.sweep_unroll);
    s.get("retrain", c.sweep_retrain);
    s.get("profile_warmup", c.profile_warmup);
    s.get("profile_runs", c.profile_runs);
    s.finish();
    require(!c.sweep_unroll.empty(), s.path("unroll") + " must not be empty");
    for (int n : c.sweep_unroll) require(n >= 1, s.path("unroll") + " entries must be >= 1");
    require(c.profile_warmup >= 0, s.path("profile_warmup") + " must be >= 0");
    require(c.profile_runs >= 3, s.path("profile_runs") + " must be >= 3");
  }
  {
    auto& g = c.gradcheck;
    Section s(j, "gradcheck");
    s.get("dims", g.dims);
    s.get("history", g.history);
    s.get("channels", g.channels);
    s.get("unroll", g.unroll);
    s.get("seed", g.seed);
    s.get("tol", g.tol);
    s.get("lambda", g.lambda);
    s.get("relative_step", g.relative_step);
    s.finish();
    require(g.dims.size() == 2 || g.dims.size() == 3, s.path("dims") + " needs 2 or 3 extents");
    std::int64_t voxels = 1;
    for (auto d : g.dims) {
      require(d >= 4, s.path("dims") + " extents must be >= 4");
      voxels *= d;
    }
    require(voxels <= 4096, s.path("dims") + " is limited to 4096 voxels");
    require(g.history >= 1 && g.channels >= 1 && g.unroll >= 1, "gradcheck history, channels and unroll must be >= 1");
    require(g.tol > 0.0 && g.relative_step > 0.0, "gradcheck tol and relative_step must be > 0");
  }
  {
    Section s(j, "oracle");
    s.get("seed", c.oracle_seed);
    s.get("instances", c.oracle_instances);
    s.get("dims", c.oracle_dims);
    s.finish();
    require(c.oracle_instances >= 1, s.path("instances") + " must be >= 1");
    require(c.oracle_dims.size() == 2 || c.oracle_dims.size() == 3, s.path("dims") + " needs 2 or 3 extents");
    std::int64_t voxels = 1;
    for (auto d : c.oracle_dims) {
      require(d >= 4, s.path("dims") + " extents must be >= 4");
      voxels *= d;
    }
    require(voxels <= 4096, s.path("dims") + " is limited to 4096 voxels");
  }
  {
    Section s(j, "io");
    std::string data = c.data_dir.string(), out = c.out_dir.string();
    s.get("data_dir", data);
    s.get("out_dir", out);
    s.finish();
    c.data_dir = data;
    c.out_dir = out;
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = vf1::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read configuration: ") + e.what());
  }
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  const auto& t = c.train;
  json j;
  j["dataset"] = {{"kind", synthgen::kind_name(c.dataset.kind)},
                  {"dims", c.dataset.dims},
                  {"n_train", c.dataset.n_train},
                  {"n_test", c.dataset.n_test},
                  {"seed", c.dataset.seed}};
  j["model"] = {{"channels", t.channels}, {"history", t.history}, {"epsilon", t.epsilon}};
  j["evolution"] = {{"unroll", t.unroll}, {"dt", t.dt ? json(*t.dt) : json(nullptr)}};
  j["train"] = {{"epochs", t.epochs},         {"batch_size", t.batch_size}, {"lr", t.adam.lr},
                {"beta1", t.adam.beta1},      {"beta2", t.adam.beta2},      {"adam_eps", t.adam.eps},
                {"lambda_tv", t.lambda_tv},   {"seed", t.seed},             {"checkpoint_every", t.checkpoint_every}};
  j["eval"] = {{"tau", c.eval.tau},
               {"tau_sweep", c.tau_sweep},
               {"spectral_cutoff", c.eval.spectral_cutoff},
               {"histogram_bins", c.histogram_bins},
               {"plots", c.plots}};
  j["sweep"] = {{"unroll", c.sweep_unroll},
                {"retrain", c.sweep_retrain},
                {"profile_warmup", c.profile_warmup},
                {"profile_runs", c.profile_runs}};
  const auto& g = c.gradcheck;
  j["gradcheck"] = {{"dims", g.dims},   {"history", g.history}, {"channels", g.channels},
                    {"unroll", g.unroll}, {"seed", g.seed},       {"tol", g.tol},
                    {"lambda", g.lambda}, {"relative_step", g.relative_step}};
  j["oracle"] = {{"seed", c.oracle_seed}, {"instances", c.oracle_instances}, {"dims", c.oracle_dims}};
  j["io"] = {{"data_dir", c.data_dir.string()}, {"out_dir", c.out_dir.string()}};
  return j;
}

}  // namespace wavecast::cli
