#include "layered_ocp/bench/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "layered_ocp/errors.hpp"

namespace layered_ocp::bench {
namespace {

using nlohmann::json;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string joined(const Vector &v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += num(v[i]);
  }
  return s;
}

Vector split_vector(const std::string &s) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (!item.empty()) vals.push_back(std::stod(item));
  }
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

std::vector<std::string> split_fields(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string quote(const std::string &s) {
  std::string out = "\"";
  for (char c : s) out += c == '"' ? '\'' : c;
  return out + "\"";
}

json vec_json(const Vector &v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json seq_json(const VectorSeq &seq) {
  json arr = json::array();
  for (const auto &v : seq) arr.push_back(vec_json(v));
  return arr;
}

Vector json_vec(const json &j) {
  const auto vals = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

VectorSeq json_seq(const json &j) {
  VectorSeq out;
  for (const auto &v : j) out.push_back(json_vec(v));
  return out;
}

const json &field(const json &j, const char *key) {
  if (!j.contains(key)) throw InvalidArgument(std::string("report is missing field '") + key + "'");
  return j.at(key);
}

json outcome_json(const Outcome &o) {
  return {
      {"terminal", vec_json(o.terminal)},
      {"distance", o.distance},
      {"success", o.success},
      {"total_iterations", o.total_iterations},
      {"outer_iterations", o.outer_iterations},
      {"converged", o.converged},
      {"failure", o.failure ? json(*o.failure) : json(nullptr)},
      {"residuals", {{"primal", o.primal}, {"dual", o.dual}, {"rho", o.rho}}},
      {"states", seq_json(o.trajectory.states)},
      {"inputs", seq_json(o.trajectory.inputs)},
      {"reference", seq_json(o.reference)},
      {"actions", seq_json(o.actions)},
  };
}

Outcome json_outcome(const json &j) {
  Outcome o;
  o.terminal = json_vec(field(j, "terminal"));
  o.distance = field(j, "distance").get<double>();
  o.success = field(j, "success").get<bool>();
  o.total_iterations = field(j, "total_iterations").get<int>();
  o.outer_iterations = field(j, "outer_iterations").get<int>();
  o.converged = field(j, "converged").get<bool>();
  if (j.contains("failure") && !j.at("failure").is_null()) o.failure = j.at("failure").get<std::string>();
  if (j.contains("residuals")) {
    const json &r = j.at("residuals");
    o.primal = r.value("primal", std::vector<double>{});
    o.dual = r.value("dual", std::vector<double>{});
    o.rho = r.value("rho", std::vector<double>{});
  }
  if (j.contains("states")) o.trajectory.states = json_seq(j.at("states"));
  if (j.contains("inputs")) o.trajectory.inputs = json_seq(j.at("inputs"));
  if (j.contains("reference")) o.reference = json_seq(j.at("reference"));
  if (j.contains("actions")) o.actions = json_seq(j.at("actions"));
  return o;
}

json aggregate_json(const Aggregate &a) {
  return {{"trials", a.trials},
          {"success_rate", a.success_rate},
          {"iterations_mean", a.iterations_mean},
          {"iterations_std", a.iterations_std}};
}

void recompute(ExperimentReport &report) {
  if (report.trials.empty()) throw InvalidArgument("report has no trials");
  std::vector<Outcome> a, b;
  for (const auto &t : report.trials) {
    a.push_back(t.admm);
    b.push_back(t.baseline);
  }
  report.admm = aggregate(a);
  report.baseline_aggregate = aggregate(b);
}

void write_file(const std::string &path, const std::string &content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory", p.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing", path);
  out << content;
  out.flush();
  if (!out) throw IoError("write failed", path);
}

}  // namespace

std::string sibling_path(const std::string &path, const std::string &suffix) {
  const std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path() / (p.stem().string() + suffix);
  out += p.has_extension() ? p.extension() : std::filesystem::path(".csv");
  return out.string();
}

CsvReport report_to_csv(const ExperimentReport &report) {
  CsvReport csv;
  std::ostringstream s;
  s << "# schema: " << kReportSchema << "\n";
  s << "# experiment: " << report.experiment << "\n";
  s << "# baseline: " << report.baseline << "\n";
  s << "# seed: " << report.seed << "\n";
  s << "# horizon: " << report.horizon << "\n";
  s << "# goal: " << joined(report.goal) << "\n";
  for (const auto &[k, v] : report.parameters) s << "# param " << k << ": " << num(v) << "\n";
  for (const auto &c : report.checks) {
    s << "# check " << c.name << ": " << (c.passed ? "pass" : "fail") << "\n";
  }
  s << "trial,solver,initial,terminal,distance,success,total_iterations,outer_iterations,"
       "converged,failure\n";
  for (const auto &t : report.trials) {
    for (const auto *which : {"admm", "baseline"}) {
      const Outcome &o = std::string(which) == "admm" ? t.admm : t.baseline;
      s << t.trial << ',' << which << ',' << joined(t.initial) << ',' << joined(o.terminal) << ','
        << num(o.distance) << ',' << (o.success ? 1 : 0) << ',' << o.total_iterations << ','
        << o.outer_iterations << ',' << (o.converged ? 1 : 0) << ','
        << (o.failure ? quote(*o.failure) : "") << "\n";
    }
  }
  csv.summary = s.str();

  std::ostringstream tr;
  tr << "# schema: " << kReportSchema << "\n";
  tr << "trial,solver,t,state,input,reference\n";
  for (const auto &t : report.trials) {
    for (const auto *which : {"admm", "baseline"}) {
      const Outcome &o = std::string(which) == "admm" ? t.admm : t.baseline;
      for (std::size_t k = 0; k < o.trajectory.states.size(); ++k) {
        tr << t.trial << ',' << which << ',' << k << ',' << joined(o.trajectory.states[k]) << ','
           << (k < o.trajectory.inputs.size() ? joined(o.trajectory.inputs[k]) : "") << ','
           << (k < o.reference.size() ? joined(o.reference[k]) : "") << "\n";
      }
    }
  }
  csv.trajectories = tr.str();

  std::ostringstream res;
  res << "# schema: " << kReportSchema << "\n";
  res << "trial,iteration,primal,primal_squared,dual,rho\n";
  for (const auto &t : report.trials) {
    for (std::size_t k = 0; k < t.admm.primal.size(); ++k) {
      res << t.trial << ',' << k + 1 << ',' << num(t.admm.primal[k]) << ','
          << num(t.admm.primal[k] * t.admm.primal[k]) << ',' << num(t.admm.dual[k]) << ','
          << num(t.admm.rho[k]) << "\n";
    }
  }
  csv.residuals = res.str();
  return csv;
}

ExperimentReport parse_csv_summary(const std::string &summary) {
  ExperimentReport report;
  std::istringstream in(summary);
  std::string line;
  bool schema_ok = false;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) continue;
      const std::string key = line.substr(2, colon - 2);
      const std::string value = line.substr(colon + 2);
      if (key == "schema") {
        if (value != kReportSchema) throw InvalidArgument("unsupported report schema '" + value + "'");
        schema_ok = true;
      } else if (key == "experiment") {
        report.experiment = value;
      } else if (key == "baseline") {
        report.baseline = value;
      } else if (key == "seed") {
        report.seed = std::stoull(value);
      } else if (key == "horizon") {
        report.horizon = std::stoul(value);
      } else if (key == "goal") {
        report.goal = split_vector(value);
      } else if (key.rfind("param ", 0) == 0) {
        report.parameters[key.substr(6)] = std::stod(value);
      } else if (key.rfind("check ", 0) == 0) {
        report.checks.push_back({key.substr(6), value == "pass", ""});
      }
      continue;
    }
    if (!schema_ok) throw InvalidArgument("report is missing the schema line");
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto f = split_fields(line);
    if (f.size() != 10) throw InvalidArgument("malformed summary row: " + line);
    const std::size_t trial = std::stoul(f[0]);
    if (report.trials.size() <= trial) report.trials.resize(trial + 1);
    TrialRecord &rec = report.trials[trial];
    rec.trial = trial;
    rec.initial = split_vector(f[2]);
    Outcome &o = f[1] == "admm" ? rec.admm : rec.baseline;
    o.terminal = split_vector(f[3]);
    o.distance = std::stod(f[4]);
    o.success = f[5] == "1";
    o.total_iterations = std::stoi(f[6]);
    o.outer_iterations = std::stoi(f[7]);
    o.converged = f[8] == "1";
    if (!f[9].empty()) o.failure = f[9];
  }
  if (!schema_ok) throw InvalidArgument("report is missing the schema line");
  recompute(report);
  return report;
}

std::string report_to_json(const ExperimentReport &report) {
  json j;
  j["schema"] = kReportSchema;
  j["experiment"] = report.experiment;
  j["baseline"] = report.baseline;
  j["seed"] = report.seed;
  j["horizon"] = report.horizon;
  j["goal"] = vec_json(report.goal);
  j["parameters"] = report.parameters;
  j["aggregates"] = {{"admm", aggregate_json(report.admm)},
                     {"baseline", aggregate_json(report.baseline_aggregate)}};
  j["checks"] = json::array();
  for (const auto &c : report.checks) {
    j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  j["trials"] = json::array();
  for (const auto &t : report.trials) {
    j["trials"].push_back({{"trial", t.trial},
                           {"initial", vec_json(t.initial)},
                           {"admm", outcome_json(t.admm)},
                           {"baseline", outcome_json(t.baseline)}});
  }
  return j.dump(1);
}

ExperimentReport parse_json_report(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw InvalidArgument(std::string("report is not valid JSON: ") + e.what());
  }
  const std::string schema = field(j, "schema").get<std::string>();
  if (schema != kReportSchema) throw InvalidArgument("unsupported report schema '" + schema + "'");
  ExperimentReport report;
  report.experiment = field(j, "experiment").get<std::string>();
  report.baseline = j.value("baseline", "");
  report.seed = j.value("seed", std::uint64_t{0});
  report.horizon = j.value("horizon", std::size_t{0});
  if (j.contains("goal")) report.goal = json_vec(j.at("goal"));
  if (j.contains("parameters")) report.parameters = j.at("parameters").get<std::map<std::string, double>>();
  if (j.contains("checks")) {
    for (const auto &c : j.at("checks")) {
      report.checks.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(),
                               c.value("detail", "")});
    }
  }
  for (const auto &t : field(j, "trials")) {
    TrialRecord rec;
    rec.trial = field(t, "trial").get<std::size_t>();
    rec.initial = json_vec(field(t, "initial"));
    rec.admm = json_outcome(field(t, "admm"));
    rec.baseline = json_outcome(field(t, "baseline"));
    report.trials.push_back(std::move(rec));
  }
  recompute(report);
  return report;
}

std::vector<std::string> write_report(const ExperimentReport &report, const std::string &path,
                                      Format format) {
  if (path.empty()) throw InvalidArgument("output path is empty");
  if (format == Format::json) {
    write_file(path, report_to_json(report) + "\n");
    return {path};
  }
  const CsvReport csv = report_to_csv(report);
  const std::string traj = sibling_path(path, "_trajectories");
  const std::string res = sibling_path(path, "_residuals");
  write_file(path, csv.summary);
  write_file(traj, csv.trajectories);
  write_file(res, csv.residuals);
  return {path, traj, res};
}

}  // namespace layered_ocp::bench
