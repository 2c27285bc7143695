#include "crowdest/formats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace crowdest {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double_strict(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

bool parse_int_strict(const std::string& text, long long& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtoll(t.c_str(), &end, 10);
  return end == t.c_str() + t.size();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

ConfigError::ConfigError(std::string file_in, int line_in, const std::string& message)
    : std::runtime_error(line_in > 0 ? file_in + ":" + std::to_string(line_in) + ": " + message
                                     : file_in + ": " + message),
      file(std::move(file_in)),
      line(line_in) {}

std::map<int, std::vector<double>> load_samples_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::map<int, std::vector<double>> out;
  bool saw_data = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const int line_no = static_cast<int>(i) + 1;
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() == 2 && trim(fields[0]) == "variable" && trim(fields[1]) == "value")
      continue;  // header
    if (fields.size() != 2)
      throw ConfigError(path, line_no, "expected two columns: variable,value");
    long long variable = 0;
    double value = 0.0;
    if (!parse_int_strict(fields[0], variable) || variable < 1)
      throw ConfigError(path, line_no, "variable must be an integer >= 1");
    if (!parse_double_strict(fields[1], value))
      throw ConfigError(path, line_no, "value must be a finite number");
    out[static_cast<int>(variable)].push_back(value);
    saw_data = true;
  }
  if (!saw_data) throw ConfigError(path, 0, "no sample rows found");
  return out;
}

ConstraintSet load_constraints_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const int line_no = static_cast<int>(i) + 1;
    const std::vector<std::string> fields = split(line, ',');
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      double c = 0.0;
      if (!parse_double_strict(f, c))
        throw ConfigError(path, line_no, "constraint coefficient must be a finite number");
      row.push_back(c);
    }
    if (width == 0) {
      width = row.size();
    } else if (row.size() != width) {
      throw ConfigError(path, line_no, "inconsistent row width");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path, 0, "no constraint rows found");
  return ConstraintSet(width, std::move(rows));
}

ConstraintSet parse_constraint_spec(const std::string& spec) {
  const std::string s = trim(spec);
  if (s.rfind("chain:", 0) == 0) {
    long long n = 0;
    if (!parse_int_strict(s.substr(6), n) || n < 1)
      throw std::invalid_argument("constraint spec: chain:<n> needs an integer >= 1");
    return ConstraintSet::chain(static_cast<std::size_t>(n));
  }
  return load_constraints_csv(s);
}

LossSpec parse_loss_spec(const std::string& text) {
  const std::string s = trim(text);
  if (s == "absolute") return LossSpec::absolute();
  if (s == "squared") return LossSpec::squared();
  if (s.rfind("threshold:", 0) == 0) {
    double tau = 0.0;
    if (!parse_double_strict(s.substr(10), tau))
      throw std::invalid_argument("loss spec: threshold:<tau> needs a finite number");
    return LossSpec::threshold(tau);
  }
  throw std::invalid_argument("loss spec must be threshold:<tau>, absolute or squared");
}

Mode parse_mode(const std::string& text) {
  const std::string s = trim(text);
  if (s == "independent") return Mode::independent;
  if (s == "constrained") return Mode::constrained;
  if (s == "round_robin") return Mode::round_robin;
  if (s == "random") return Mode::random;
  if (s == "uniform_random") return Mode::uniform_random;
  throw std::invalid_argument("unknown mode: " + s);
}

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::independent: return "independent";
    case Mode::constrained: return "constrained";
    case Mode::round_robin: return "round_robin";
    case Mode::random: return "random";
    case Mode::uniform_random: return "uniform_random";
  }
  return "unknown";
}

namespace {

// Key/value store that remembers lines and tracks which keys were consumed,
// so unknown keys can be reported precisely.
class ConfigMap {
 public:
  ConfigMap(std::string path, const std::vector<std::string>& lines) : path_(std::move(path)) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string line = trim(lines[i]);
      const int line_no = static_cast<int>(i) + 1;
      if (line.empty() || line[0] == '#') continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path_, line_no, "expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(path_, line_no, "empty key");
      if (entries_.count(key))
        throw ConfigError(path_, line_no, "duplicate key '" + key + "'");
      entries_[key] = Entry{line_no, value, false};
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end())
      throw ConfigError(path_, 0, "missing required key '" + key + "'");
    it->second.used = true;
    return it->second.value;
  }

  std::string take_or(const std::string& key, const std::string& fallback) {
    return has(key) ? take(key) : fallback;
  }

  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  double take_double(const std::string& key) {
    const std::string v = take(key);
    double out = 0.0;
    if (!parse_double_strict(v, out))
      throw ConfigError(path_, line_of(key), "'" + key + "' must be a finite number");
    return out;
  }

  double take_double_or(const std::string& key, double fallback) {
    return has(key) ? take_double(key) : fallback;
  }

  long long take_int(const std::string& key) {
    const std::string v = take(key);
    long long out = 0;
    if (!parse_int_strict(v, out))
      throw ConfigError(path_, line_of(key), "'" + key + "' must be an integer");
    return out;
  }

  long long take_int_or(const std::string& key, long long fallback) {
    return has(key) ? take_int(key) : fallback;
  }

  void fail(const std::string& key, const std::string& message) const {
    throw ConfigError(path_, line_of(key), message);
  }

  void reject_unused() const {
    for (const auto& [key, entry] : entries_) {
      if (!entry.used)
        throw ConfigError(path_, entry.line, "unknown key '" + key + "'");
    }
  }

 private:
  struct Entry {
    int line = 0;
    std::string value;
    bool used = false;
  };
  std::string path_;
  std::map<std::string, Entry> entries_;
};

std::vector<double> parse_double_list(ConfigMap& cfg, const std::string& key) {
  const std::string raw = cfg.take(key);
  std::vector<double> out;
  for (const auto& field : split(raw, ',')) {
    double v = 0.0;
    if (!parse_double_strict(field, v))
      cfg.fail(key, "'" + key + "' must be a comma-separated list of finite numbers");
    out.push_back(v);
  }
  return out;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  ConfigMap cfg(path, read_lines(path));
  ExperimentConfig out;

  const long long n_vars = cfg.take_int("n_vars");
  if (n_vars < 1) cfg.fail("n_vars", "'n_vars' must be >= 1");
  out.n_vars = static_cast<std::size_t>(n_vars);

  out.constraints = cfg.take_or("constraints", "chain");

  const std::string gt = cfg.take("ground_truth");
  if (gt == "explicit") {
    out.ground_truth = TruthKind::explicit_values;
  } else if (gt == "linear_decreasing") {
    out.ground_truth = TruthKind::linear_decreasing;
  } else if (gt == "logistic") {
    out.ground_truth = TruthKind::logistic;
  } else if (gt == "random_monotone") {
    out.ground_truth = TruthKind::random_monotone;
  } else {
    cfg.fail("ground_truth",
             "'ground_truth' must be explicit, linear_decreasing, logistic or random_monotone");
  }

  if (out.ground_truth == TruthKind::explicit_values) {
    out.truth_params.values = parse_double_list(cfg, "gt_values");
    if (out.truth_params.values.size() != out.n_vars)
      cfg.fail("gt_values", "'gt_values' must list exactly n_vars values");
  } else if (cfg.has("gt_values")) {
    cfg.fail("gt_values", "'gt_values' is only valid with ground_truth = explicit");
  }

  out.truth_params.high = cfg.take_double_or("gt_high", 9.0);
  out.truth_params.low = cfg.take_double_or("gt_low", 3.0);
  out.truth_params.midpoint = cfg.take_double_or("gt_midpoint", 0.0);
  out.truth_params.steepness = cfg.take_double_or("gt_steepness", 2.0);

  out.truth_params.worker_sd = cfg.take_double_or("worker_sd", 1.0);
  if (out.truth_params.worker_sd < 0.0) cfg.fail("worker_sd", "'worker_sd' must be >= 0");
  if (cfg.has("worker_sd_per_var")) {
    out.truth_params.worker_sd_per_var = parse_double_list(cfg, "worker_sd_per_var");
    if (out.truth_params.worker_sd_per_var.size() != out.n_vars)
      cfg.fail("worker_sd_per_var", "'worker_sd_per_var' must list exactly n_vars values");
  }

  const std::string noise = cfg.take_or("noise", "normal");
  if (noise == "normal") {
    out.truth_params.noise = NoiseKind::normal;
  } else if (noise == "student_t3") {
    out.truth_params.noise = NoiseKind::student_t3;
  } else {
    cfg.fail("noise", "'noise' must be normal or student_t3");
  }

  if (cfg.has("clamp_low") != cfg.has("clamp_high")) {
    cfg.fail(cfg.has("clamp_low") ? "clamp_low" : "clamp_high",
             "clamp_low and clamp_high must be set together");
  }
  if (cfg.has("clamp_low")) {
    const double lo = cfg.take_double("clamp_low");
    const double hi = cfg.take_double("clamp_high");
    if (!(lo < hi)) cfg.fail("clamp_low", "clamp_low must be below clamp_high");
    out.truth_params.clamp = std::make_pair(lo, hi);
  }

  const std::string loss = cfg.take("loss");
  if (loss == "threshold") {
    const double tau = cfg.take_double("tau");
    out.loss = LossSpec::threshold(tau);
  } else if (loss == "absolute" || loss == "squared") {
    if (cfg.has("tau")) cfg.fail("tau", "'tau' is only valid with loss = threshold");
    out.loss = loss == "absolute" ? LossSpec::absolute() : LossSpec::squared();
  } else {
    cfg.fail("loss", "'loss' must be threshold, absolute or squared");
  }

  for (const auto& name : split(cfg.take("policies"), ',')) {
    try {
      out.policies.push_back(parse_mode(name));
    } catch (const std::invalid_argument& e) {
      cfg.fail("policies", e.what());
    }
  }
  if (out.policies.empty()) cfg.fail("policies", "'policies' must list at least one mode");
  for (std::size_t i = 0; i < out.policies.size(); ++i)
    for (std::size_t j = i + 1; j < out.policies.size(); ++j)
      if (out.policies[i] == out.policies[j])
        cfg.fail("policies", "'policies' must not repeat a mode");

  if (cfg.has("estimation")) {
    const std::string est = cfg.take("estimation");
    if (est == "per_variable") {
      out.estimation = Estimation::per_variable;
    } else if (est == "constrained") {
      out.estimation = Estimation::constrained;
    } else {
      cfg.fail("estimation", "'estimation' must be per_variable or constrained");
    }
  }

  const long long budget = cfg.take_int("budget");
  if (budget < 1) cfg.fail("budget", "'budget' must be >= 1");
  out.budget = static_cast<int>(budget);
  const long long replicates = cfg.take_int("replicates");
  if (replicates < 1) cfg.fail("replicates", "'replicates' must be >= 1");
  out.replicates = static_cast<int>(replicates);
  out.seed = static_cast<std::uint64_t>(cfg.take_int_or("seed", 0));

  SelectionConfig sel;
  const long long draws = cfg.take_int_or("hypothetical_draws", sel.hypothetical_draws);
  if (draws < 1) cfg.fail("hypothetical_draws", "'hypothetical_draws' must be >= 1");
  sel.hypothetical_draws = static_cast<int>(draws);
  const long long min_samples = cfg.take_int_or("min_samples", sel.min_samples_before_scoring);
  if (min_samples < 0) cfg.fail("min_samples", "'min_samples' must be >= 0");
  sel.min_samples_before_scoring = static_cast<int>(min_samples);
  const long long interp_eff =
      cfg.take_int_or("interp_effective_samples",
                      static_cast<long long>(sel.interp_effective_samples));
  if (interp_eff < 1)
    cfg.fail("interp_effective_samples", "'interp_effective_samples' must be >= 1");
  sel.interp_effective_samples = static_cast<std::size_t>(interp_eff);
  const long long fill_draws = cfg.take_int_or("fill_draws", sel.fill_draws);
  if (fill_draws < 1) cfg.fail("fill_draws", "'fill_draws' must be >= 1");
  sel.fill_draws = fill_draws;
  const long long error_nodes = cfg.take_int_or("error_nodes", sel.integration.error_nodes);
  if (error_nodes < 1 || error_nodes > 512)
    cfg.fail("error_nodes", "'error_nodes' must be in [1, 512]");
  sel.integration.error_nodes = static_cast<int>(error_nodes);
  const long long decrease_nodes =
      cfg.take_int_or("decrease_nodes", sel.integration.decrease_nodes);
  if (decrease_nodes < 1 || decrease_nodes > 512)
    cfg.fail("decrease_nodes", "'decrease_nodes' must be in [1, 512]");
  sel.integration.decrease_nodes = static_cast<int>(decrease_nodes);
  sel.qp_tol = cfg.take_double_or("qp_tol", sel.qp_tol);
  if (!(sel.qp_tol > 0.0)) cfg.fail("qp_tol", "'qp_tol' must be > 0");

  if (cfg.has("tie_break")) {
    const std::string tb = cfg.take("tie_break");
    if (tb == "fewest_samples_then_lowest_index") {
      sel.tie_break = TieBreak::fewest_samples_then_lowest_index;
    } else if (tb == "lowest_index") {
      sel.tie_break = TieBreak::lowest_index;
    } else {
      cfg.fail("tie_break", "'tie_break' must be fewest_samples_then_lowest_index or lowest_index");
    }
  }
  sel.estimation = out.estimation;
  sel.seed = out.seed;
  out.selection = sel;

  const long long threads = cfg.take_int_or("threads", 1);
  if (threads < 0) cfg.fail("threads", "'threads' must be >= 0");
  out.threads = static_cast<int>(threads);

  out.trace_path = cfg.take("trace_path");
  if (out.trace_path.empty()) cfg.fail("trace_path", "'trace_path' must not be empty");
  out.summary_path = cfg.take("summary_path");
  if (out.summary_path.empty()) cfg.fail("summary_path", "'summary_path' must not be empty");

  cfg.reject_unused();
  return out;
}

std::string format_g12(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return std::string(buf);
}

double round_g12(double value) { return std::strtod(format_g12(value).c_str(), nullptr); }

void write_trace_csv(std::ostream& os, const SimTrace& trace) {
  os << "step,variable,answer,true_loss,estimated_error,prediction_json\n";
  for (const TraceRow& row : trace.rows) {
    os << row.step << ',' << row.variable << ',' << format_g12(row.answer) << ','
       << format_g12(row.true_loss) << ',' << format_g12(row.estimated_error) << ",\"[";
    for (std::size_t i = 0; i < row.prediction.size(); ++i) {
      if (i) os << ',';
      os << format_g12(row.prediction[i]);
    }
    os << "]\"\n";
  }
}

}  // namespace crowdest
