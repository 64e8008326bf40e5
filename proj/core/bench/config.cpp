#include "layered_ocp/bench/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "layered_ocp/errors.hpp"

namespace layered_ocp::bench {

ExperimentConfig merge_config_json(const std::string &text, ExperimentConfig cfg) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");

  static const std::set<std::string> known = {
      "experiment", "trials",    "seed",      "horizon",   "goal",
      "rho",        "max_outer", "eps_primal", "eps_dual",  "max_inner",
      "adapt_rho",  "baseline_max_iters", "out", "format", "threads"};
  for (const auto &[key, value] : j.items()) {
    if (!known.count(key)) throw InvalidArgument("unknown config key '" + key + "'");
  }

  try {
    if (j.contains("experiment")) cfg.experiment = j.at("experiment").get<std::string>();
    if (j.contains("trials")) cfg.trials = j.at("trials").get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("horizon")) cfg.horizon = j.at("horizon").get<std::size_t>();
    if (j.contains("goal")) {
      const auto g = j.at("goal").get<std::vector<double>>();
      cfg.goal = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
    }
    if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
    if (j.contains("max_outer")) cfg.max_outer = j.at("max_outer").get<int>();
    if (j.contains("eps_primal")) cfg.eps_primal = j.at("eps_primal").get<double>();
    if (j.contains("eps_dual")) cfg.eps_dual = j.at("eps_dual").get<double>();
    if (j.contains("max_inner")) cfg.max_inner = j.at("max_inner").get<int>();
    if (j.contains("adapt_rho")) cfg.adapt_rho = j.at("adapt_rho").get<bool>();
    if (j.contains("baseline_max_iters")) {
      cfg.baseline_max_iters = j.at("baseline_max_iters").get<int>();
    }
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("format")) cfg.format = parse_format(j.at("format").get<std::string>());
    if (j.contains("threads")) cfg.threads = j.at("threads").get<unsigned>();
  } catch (const json::exception &e) {
    throw InvalidArgument(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string &path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return merge_config_json(ss.str(), std::move(base));
}

}  // namespace layered_ocp::bench
