#include "rsstitch/bench.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include <toml.hpp>

#include "rsstitch/io.h"

namespace rsstitch {

namespace {

[[noreturn]] void Schema(const std::string& source, const std::string& msg) {
  throw Error(ErrorCode::kSchema, source + ": " + msg);
}

double Num(const toml::node& n, const std::string& source, const std::string& key) {
  if (auto v = n.value<double>()) return *v;
  Schema(source, "'" + key + "' must be a number");
}

int Int(const toml::node& n, const std::string& source, const std::string& key) {
  if (auto v = n.value<int64_t>()) return static_cast<int>(*v);
  Schema(source, "'" + key + "' must be an integer");
}

std::string Str(const toml::node& n, const std::string& source, const std::string& key) {
  if (auto v = n.value<std::string>()) return *v;
  Schema(source, "'" + key + "' must be a string");
}

std::vector<double> NumArray(const toml::node& n, const std::string& source,
                             const std::string& key) {
  const toml::array* arr = n.as_array();
  if (!arr) Schema(source, "'" + key + "' must be an array");
  std::vector<double> out;
  for (const toml::node& e : *arr) out.push_back(Num(e, source, key));
  return out;
}

std::string Fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

BenchSpec ParseBenchSpec(const std::string& text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    Schema(source, std::string("TOML: ") + std::string(e.description()));
  }
  BenchSpec spec;
  const toml::table* sw = root["sweep"].as_table();
  if (!sw) Schema(source, "missing [sweep] table");
  SweepSpec& s = spec.sweep;
  bool have_param = false, have_values = false, have_solvers = false;
  for (const auto& [k, node] : *sw) {
    const std::string key(k.str());
    if (key == "param") {
      const auto p = ParseSweepParam(Str(node, source, key));
      if (!p) Schema(source, "unknown sweep param");
      s.param = *p;
      have_param = true;
    } else if (key == "values") {
      s.values = NumArray(node, source, key);
      have_values = true;
    } else if (key == "gamma") {
      s.gamma = Num(node, source, key);
    } else if (key == "omega_deg") {
      s.omega_deg = Num(node, source, key);
    } else if (key == "v") {
      s.v = Num(node, source, key);
    } else if (key == "k") {
      s.k = Num(node, source, key);
    } else if (key == "sigma_g") {
      s.sigma_g = Num(node, source, key);
    } else if (key == "configs") {
      s.configs = Int(node, source, key);
    } else if (key == "points") {
      s.points = Int(node, source, key);
    } else if (key == "seed") {
      s.seed = static_cast<uint64_t>(Int(node, source, key));
    } else if (key == "ransac_trials") {
      s.ransac_trials = Int(node, source, key);
    } else if (key == "threshold") {
      s.threshold = Num(node, source, key);
    } else if (key == "width") {
      s.width = Int(node, source, key);
    } else if (key == "height") {
      s.height = Int(node, source, key);
    } else if (key == "hfov_deg") {
      s.hfov_deg = Num(node, source, key);
    } else if (key == "k_range") {
      const auto r = NumArray(node, source, key);
      if (r.size() != 2) Schema(source, "'k_range' must have two entries");
      s.k_range = {r[0], r[1]};
    } else if (key == "solvers") {
      const toml::array* arr = node.as_array();
      if (!arr) Schema(source, "'solvers' must be an array");
      for (const toml::node& e : *arr) {
        const std::string name = Str(e, source, key);
        const auto solver = ParseSweepSolver(name);
        if (!solver) Schema(source, "unknown solver '" + name + "'");
        s.solvers.push_back(*solver);
      }
      have_solvers = true;
    } else if (key == "generator") {
      const std::string g = Str(node, source, key);
      if (g == "exact") s.generator = GenMode::kExact;
      else if (g == "first-order") s.generator = GenMode::kFirstOrder;
      else Schema(source, "generator must be 'exact' or 'first-order'");
    } else if (key == "estimation") {
      const std::string e = Str(node, source, key);
      if (e == "auto") s.estimation = Estimation::kAuto;
      else if (e == "least-squares") s.estimation = Estimation::kLeastSquares;
      else if (e == "ransac") s.estimation = Estimation::kRansac;
      else Schema(source, "estimation must be auto, least-squares or ransac");
    } else {
      Schema(source, "unknown [sweep] key '" + key + "'");
    }
  }
  if (!have_param) Schema(source, "[sweep] needs 'param'");
  if (!have_values) Schema(source, "[sweep] needs 'values'");
  if (!have_solvers) Schema(source, "[sweep] needs 'solvers'");
  try {
    s.Validate();
  } catch (const Error& e) {
    Schema(source, e.what());
  }

  std::set<std::string> names;
  for (const auto& sv : s.solvers) names.insert(sv.name);
  auto known = [&](const std::string& n) {
    const auto p = ParseSweepSolver(n);
    if (!p || !names.count(p->name)) Schema(source, "check refers to solver '" + n + "' not in the sweep");
    return p->name;
  };
  if (const toml::node_view cv = root["check"]) {
    const toml::array* arr = cv.as_array();
    if (!arr) Schema(source, "'check' must be an array of tables");
    for (const toml::node& cn : *arr) {
      const toml::table* t = cn.as_table();
      if (!t) Schema(source, "'check' entries must be tables");
      BenchCheck c;
      for (const auto& [k, node] : *t) {
        const std::string key(k.str());
        if (key == "kind") c.kind = Str(node, source, key);
        else if (key == "name") c.name = Str(node, source, key);
        else if (key == "a") c.a = known(Str(node, source, key));
        else if (key == "b") c.b = known(Str(node, source, key));
        else if (key == "solver") c.solver = known(Str(node, source, key));
        else if (key == "min_value") c.min_value = Num(node, source, key);
        else if (key == "num") c.num = Num(node, source, key);
        else if (key == "den") c.den = Num(node, source, key);
        else if (key == "min") c.min = Num(node, source, key);
        else if (key == "max") c.max = Num(node, source, key);
        else Schema(source, "unknown check key '" + key + "'");
      }
      if (c.kind == "le") {
        if (c.a.empty() || c.b.empty()) Schema(source, "'le' check needs a and b");
      } else if (c.kind == "ratio" || c.kind == "flat" || c.kind == "monotone" ||
                 c.kind == "finite") {
        if (c.solver.empty()) Schema(source, "'" + c.kind + "' check needs solver");
      } else {
        Schema(source, "unknown check kind '" + c.kind + "'");
      }
      if (c.name.empty()) c.name = c.kind + "-" + std::to_string(spec.checks.size());
      spec.checks.push_back(c);
    }
  }
  return spec;
}

BenchSpec ReadBenchSpec(const std::string& path) {
  return ParseBenchSpec(ReadTextFile(path), path);
}

std::vector<CheckResult> EvaluateChecks(const std::vector<BenchCheck>& checks,
                                        const std::vector<SweepRow>& rows) {
  // solver -> value -> row
  std::map<std::string, std::map<double, const SweepRow*>> by;
  for (const SweepRow& r : rows) by[r.solver][r.value] = &r;
  auto at = [&](const std::string& s, double v) -> const SweepRow* {
    auto it = by.find(s);
    if (it == by.end()) return nullptr;
    auto jt = it->second.find(v);
    return jt == it->second.end() ? nullptr : jt->second;
  };

  std::vector<CheckResult> out;
  for (const BenchCheck& c : checks) {
    CheckResult res{c.name, false, ""};
    if (c.kind == "le") {
      res.pass = true;
      int n = 0;
      for (const auto& [v, ra] : by[c.a]) {
        if (v < c.min_value) continue;
        const SweepRow* rb = at(c.b, v);
        if (!rb) continue;
        ++n;
        const bool ok = ra->mean_err <= rb->mean_err;
        if (!ok) {
          res.pass = false;
          res.detail += c.a + "=" + Fmt(ra->mean_err) + " > " + c.b + "=" + Fmt(rb->mean_err) +
                        " at " + Fmt(v) + "; ";
        }
      }
      if (n == 0) {
        res.pass = false;
        res.detail = "no comparable values";
      } else if (res.pass) {
        res.detail = c.a + " <= " + c.b + " at " + std::to_string(n) + " values";
      }
    } else if (c.kind == "ratio") {
      const SweepRow* rn = at(c.solver, c.num);
      const SweepRow* rd = at(c.solver, c.den);
      if (!rn || !rd) {
        res.detail = "sweep lacks value " + Fmt(rn ? c.den : c.num);
      } else {
        const double ratio = rn->mean_err / rd->mean_err;
        res.pass = ratio >= c.min;
        res.detail = c.solver + " " + Fmt(c.num) + "/" + Fmt(c.den) + " = " + Fmt(ratio) +
                     " (need >= " + Fmt(c.min) + ")";
      }
    } else if (c.kind == "flat") {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& [v, r] : by[c.solver]) {
        if (v < c.min_value) continue;
        lo = std::min(lo, r->mean_err);
        hi = std::max(hi, r->mean_err);
      }
      const double ratio = hi / lo;
      res.pass = std::isfinite(ratio) && ratio <= c.max;
      res.detail = c.solver + " max/min = " + Fmt(ratio) + " (need <= " + Fmt(c.max) + ")";
    } else if (c.kind == "monotone") {
      res.pass = true;
      double prev = -std::numeric_limits<double>::infinity();
      for (const auto& [v, r] : by[c.solver]) {
        if (v < c.min_value) continue;
        if (!(r->mean_err >= prev)) {
          res.pass = false;
          res.detail += "drops at " + Fmt(v) + "; ";
        }
        prev = r->mean_err;
      }
      if (res.pass) res.detail = c.solver + " non-decreasing";
    } else if (c.kind == "finite") {
      int fails = 0;
      for (const auto& [v, r] : by[c.solver]) {
        if (v >= c.min_value) fails += r->failures;
      }
      res.pass = fails == 0;
      res.detail = c.solver + ": " + std::to_string(fails) + " failed fits";
    }
    out.push_back(res);
  }
  return out;
}

nlohmann::json CheckResultsJson(const std::vector<CheckResult>& results) {
  nlohmann::json a = nlohmann::json::array();
  for (const CheckResult& r : results) {
    a.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  }
  return a;
}

}  // namespace rsstitch
