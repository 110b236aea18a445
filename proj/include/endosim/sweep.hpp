#ifndef ENDOSIM_SWEEP_HPP
#define ENDOSIM_SWEEP_HPP

// Parameter sweeps over any numeric key of a key=value spec.
//
// Spec keys:
//   target = symmetric_gate | run | rabi | kicked_rabi | odd_even | lock_release
//   grid.<key> = lo:hi:count   (inclusive, linear)  or  v1,v2,...
//   program = <path>           (target=run only)
// Every other key is passed to each grid point. Multiple grids form a
// cartesian product; grid keys are ordered by name, the first varying slowest.
//
// Rows are appended to <out>.manifest as they finish, so an interrupted sweep
// resumes where it stopped. The table is assembled in grid order and written
// atomically; the manifest is removed once the table exists.

#include "endosim/bangbang.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace endosim {

struct SweepAxis {
  std::string key;
  std::vector<double> values;
};

inline std::vector<double> parse_grid(const std::string& key, const std::string& text) {
  auto bad = [&](const std::string& why) { return std::invalid_argument("grid." + key + ": " + why); };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    double lo = 0, hi = 0, count = 0;
    if (parts.size() != 3 || !parse_double(parts[0], lo) || !parse_double(parts[1], hi) ||
        !parse_double(parts[2], count))
      throw bad("expected lo:hi:count");
    if (count < 1 || count != std::floor(count) || count > 1e5) throw bad("count must be an integer in [1, 100000]");
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw bad("bounds must be finite");
    if (count == 1 && lo != hi) throw bad("a single point needs lo == hi");
    const int n = static_cast<int>(count);
    for (int i = 0; i < n; ++i) out.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
  } else {
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
      double v = 0;
      if (!parse_double(item, v) || !std::isfinite(v)) throw bad("'" + item + "' is not a number");
      out.push_back(v);
    }
    if (out.empty()) throw bad("empty grid");
  }
  return out;
}

struct SweepPlan {
  std::string target;
  std::string program_text;  // target=run
  std::vector<SweepAxis> axes;
  KeyValues base;            // keys passed to every point
  std::uint64_t fingerprint = 0;

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.values.size();
    return n;
  }

  /// Grid values of point `index`, one per axis.
  std::vector<double> point(std::size_t index) const {
    std::vector<double> v(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      v[k] = axes[k].values[index % axes[k].values.size()];
      index /= axes[k].values.size();
    }
    return v;
  }
};

inline const std::set<std::string>& sweep_targets() {
  static const std::set<std::string> t{"symmetric_gate", "run", "rabi", "kicked_rabi", "odd_even", "lock_release"};
  return t;
}

inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// `program_dir` resolves a relative `program` path.
inline SweepPlan plan_sweep(const KeyValues& spec, const std::filesystem::path& program_dir = {}) {
  SweepPlan plan;
  plan.target = spec.get_string("target", "");
  if (!sweep_targets().count(plan.target)) throw std::invalid_argument("sweep: unknown or missing target '" + plan.target + "'");
  for (const auto& [key, value] : spec.entries()) {
    if (key == "target") continue;
    if (key == "program") {
      if (plan.target != "run") throw std::invalid_argument("sweep: 'program' is only valid with target=run");
      std::filesystem::path path(value);
      if (path.is_relative() && !program_dir.empty()) path = program_dir / path;
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot open file: " + path.string());
      std::stringstream buf;
      buf << in.rdbuf();
      plan.program_text = buf.str();
      parse_program(plan.program_text);
      continue;
    }
    if (key.starts_with("grid.")) {
      const std::string name = key.substr(5);
      if (name.empty()) throw std::invalid_argument("sweep: empty grid key");
      plan.axes.push_back({name, parse_grid(name, value)});
      continue;
    }
    plan.base.set(key, value);
  }
  if (plan.axes.empty()) throw std::invalid_argument("sweep: no grid.<key> entries");
  if (plan.target == "run" && plan.program_text.empty()) throw std::invalid_argument("sweep: target=run needs program");
  if (plan.size() > 1000000) throw std::invalid_argument("sweep: grid too large");
  plan.fingerprint = fnv1a(spec.serialize(), fnv1a(plan.program_text));
  return plan;
}

/// Metrics for one grid point.
inline std::vector<Metric> sweep_point(const SweepPlan& plan, std::size_t index) {
  KeyValues kv = plan.base;
  const auto values = plan.point(index);
  for (std::size_t k = 0; k < plan.axes.size(); ++k) kv.set(plan.axes[k].key, format_shortest(values[k]));
  std::vector<Metric> out;
  if (plan.target == "symmetric_gate") {
    const SpinModel model(params_from(kv));
    const SimConfig config = sim_config_from(kv);
    const double nu1 = kv.get_double("nu1_MHz", 7.9);
    const int cycles = kv.get_int("cycles", 1);
    kv.require_all_used();
    const GateSpec g = symmetric_gate(model, nu1, cycles, config);
    out = {{"duration_us", g.duration_us},
           {"phase_sim_rad", g.phase_simulated},
           {"phase_closed_form_rad", g.phase_closed_form},
           {"phase_projected_rad", g.phase_spin_projected},
           {"leakage", g.leakage_simulated}};
    return out;
  }
  const ExperimentSpec spec = spec_from(kv);
  kv.require_all_used();
  const SpinModel model(spec.params);
  if (plan.target == "run") {
    const Trajectory tr = run_program(model, spec, parse_program(plan.program_text));
    const std::size_t s = tr.size() - 1;
    out = {{"p00", tr.qubit(s, 0)}, {"p01", tr.qubit(s, 1)}, {"p10", tr.qubit(s, 2)},
           {"p11", tr.qubit(s, 3)}, {"other", tr.other(s)},  {"phase01_rad", tr.phase01(s)}};
    return out;
  }
  ExperimentResult r;
  if (plan.target == "rabi")
    r = rabi(model, spec);
  else if (plan.target == "kicked_rabi")
    r = kicked_rabi(model, spec);
  else if (plan.target == "odd_even")
    r = odd_even(model, spec);
  else
    r = lock_release(model, spec);
  return r.metrics;
}

struct SweepStatus {
  std::size_t total = 0;
  std::size_t completed = 0;  // rows present after this call
  bool finished = false;      // table written
};

namespace detail {

inline std::filesystem::path manifest_path(const std::filesystem::path& out) {
  auto p = out;
  p += ".manifest";
  return p;
}

inline std::string manifest_header(const SweepPlan& plan) {
  return "# sweep manifest " + std::to_string(plan.fingerprint);
}

inline std::string encode_row(std::size_t index, const std::vector<Metric>& row) {
  std::string line = std::to_string(index);
  for (const auto& m : row) line += "\t" + m.name + "=" + format_shortest(m.value);
  return line;
}

/// Complete lines only; a torn trailing line is ignored.
inline std::map<std::size_t, std::vector<Metric>> read_manifest(const std::filesystem::path& path,
                                                                const SweepPlan& plan) {
  std::map<std::size_t, std::vector<Metric>> rows;
  std::ifstream in(path, std::ios::binary);
  if (!in) return rows;
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::size_t pos = 0;
  bool first = true;
  while (true) {
    const auto end = text.find('\n', pos);
    if (end == std::string::npos) break;
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (first) {
      if (line != manifest_header(plan))
        throw std::invalid_argument("sweep: " + path.string() + " belongs to a different sweep; remove it to restart");
      first = false;
      continue;
    }
    std::stringstream ls(line);
    std::string field;
    std::getline(ls, field, '\t');
    const std::size_t index = std::stoull(field);
    if (index >= plan.size()) throw std::invalid_argument("sweep: manifest row out of range");
    std::vector<Metric> row;
    while (std::getline(ls, field, '\t')) {
      const auto eq = field.find('=');
      double v = 0;
      if (eq == std::string::npos) throw std::invalid_argument("sweep: corrupt manifest row");
      const std::string value = field.substr(eq + 1);
      if (value == "nan")
        v = std::numeric_limits<double>::quiet_NaN();
      else if (!parse_double(value, v))
        throw std::invalid_argument("sweep: corrupt manifest value");
      row.push_back({field.substr(0, eq), v});
    }
    rows[index] = std::move(row);
  }
  return rows;
}

/// Truncates the manifest after its last complete line so appends stay aligned.
inline void drop_torn_tail(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path, std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  if (text.empty() || text.back() == '\n') return;
  const auto end = text.rfind('\n');
  std::filesystem::resize_file(path, end == std::string::npos ? 0 : end + 1);
}

}  // namespace detail

/// Table text from completed rows. Columns: grid keys, then metric names in
/// order of first appearance; phase_sim_rad also gets an unwrapped column.
inline std::string sweep_table(const SweepPlan& plan, const std::map<std::size_t, std::vector<Metric>>& rows) {
  std::vector<std::string> columns;
  for (const auto& [i, row] : rows)
    for (const auto& m : row)
      if (std::find(columns.begin(), columns.end(), m.name) == columns.end()) columns.push_back(m.name);
  const bool unwrap = std::find(columns.begin(), columns.end(), "phase_sim_rad") != columns.end();
  std::vector<double> unwrapped;
  if (unwrap) {
    std::vector<double> wrapped;
    for (const auto& [i, row] : rows)
      for (const auto& m : row)
        if (m.name == "phase_sim_rad") wrapped.push_back(m.value);
    unwrapped = unwrap_from_back(wrapped);
  }
  std::string out;
  for (std::size_t k = 0; k < plan.axes.size(); ++k) out += (k ? "," : "") + plan.axes[k].key;
  for (const auto& c : columns) out += "," + c;
  if (unwrap) out += ",phase_unwrapped_rad";
  out += "\n";
  std::size_t r = 0;
  for (const auto& [index, row] : rows) {
    const auto values = plan.point(index);
    for (std::size_t k = 0; k < values.size(); ++k) out += (k ? "," : "") + format_fixed(values[k]);
    for (const auto& c : columns) {
      out += ",";
      for (const auto& m : row)
        if (m.name == c) out += format_fixed(m.value);
    }
    if (unwrap) out += "," + format_fixed(unwrapped[r]);
    out += "\n";
    ++r;
  }
  return out;
}

/// Computes up to `max_new_rows` missing rows, then writes the table if every
/// row is present.
inline SweepStatus run_sweep(const SweepPlan& plan, const std::filesystem::path& out,
                             std::size_t max_new_rows = std::numeric_limits<std::size_t>::max(),
                             unsigned threads = default_thread_count()) {
  const auto manifest = detail::manifest_path(out);
  auto rows = detail::read_manifest(manifest, plan);
  detail::drop_torn_tail(manifest);
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < plan.size() && pending.size() < max_new_rows; ++i)
    if (!rows.count(i)) pending.push_back(i);

  if (!pending.empty()) {
    const bool fresh = !std::filesystem::exists(manifest);
    std::ofstream log(manifest, std::ios::binary | std::ios::app);
    if (!log) throw std::runtime_error("cannot write " + manifest.string());
    if (fresh) log << detail::manifest_header(plan) << "\n" << std::flush;
    std::mutex mutex;
    parallel_for(
        pending.size(),
        [&](std::size_t j) {
          auto row = sweep_point(plan, pending[j]);
          std::lock_guard lock(mutex);
          log << detail::encode_row(pending[j], row) << "\n" << std::flush;
          rows[pending[j]] = std::move(row);
        },
        threads);
  }

  SweepStatus status{plan.size(), rows.size(), false};
  if (rows.size() == plan.size()) {
    write_file_atomic(out, sweep_table(plan, rows));
    std::filesystem::remove(manifest);
    status.finished = true;
  }
  return status;
}

}  // namespace endosim

#endif  // ENDOSIM_SWEEP_HPP
