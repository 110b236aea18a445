#ifndef ENDOSIM_PULSE_HPP
#define ENDOSIM_PULSE_HPP

// Pulse programs: multi-channel rectangular drives plus ideal phase kicks,
// the line-oriented `.pp` text format, and compilation into piecewise-constant
// control intervals.
//
//   # comment
//   name <text>
//   total <us>
//   sample every=<us>
//   seg <CHANNEL> t=<us> dur=<us> f=<MHz> amp=<MHz> ph=<rad>
//   kick t=<us> ph=<rad>
//
// CHANNEL is MW or RF followed by optional digits (MW, RF, RF2, ...). MW
// channels drive the electron spin, RF channels the nuclear spin. `amp` is the
// on-resonance Rabi frequency for a transition whose matrix element is 1/2.
// `kick` multiplies the |01> amplitude by exp(i ph) instantaneously.

#include "endosim/keyvalue.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace endosim {

inline constexpr double time_epsilon_us = 1e-12;

inline double canonical_phase(double phase) {
  constexpr double period = 2.0 * std::numbers::pi;
  double r = std::fmod(phase, period);
  if (r < 0.0) r += period;
  if (r >= period) r = 0.0;
  return r;
}

enum class ChannelKind { microwave, radiofrequency };

/// MW/RF prefix plus optional digits; anything else is not a channel.
inline bool channel_kind(std::string_view name, ChannelKind& kind) {
  std::string_view rest;
  if (name.starts_with("MW")) {
    kind = ChannelKind::microwave;
    rest = name.substr(2);
  } else if (name.starts_with("RF")) {
    kind = ChannelKind::radiofrequency;
    rest = name.substr(2);
  } else {
    return false;
  }
  return std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; });
}

struct Segment {
  std::string channel;
  double t_start = 0.0;    // us
  double duration = 0.0;   // us
  double carrier = 0.0;    // MHz
  double amplitude = 0.0;  // MHz
  double phase = 0.0;      // rad, in [0, 2 pi)

  double t_end() const { return t_start + duration; }
  bool operator==(const Segment&) const = default;
};

struct IdealKick {
  double time = 0.0;   // us
  double phase = 0.0;  // rad, in [0, 2 pi)
  bool operator==(const IdealKick&) const = default;
};

struct PulseProgram {
  std::string name;
  std::vector<Segment> segments;
  std::vector<IdealKick> kicks;
  double total_duration = 0.0;  // us
  double sample_every = 0.0;    // us; zero records only the start and end

  bool operator==(const PulseProgram&) const = default;

  double max_segment_end() const {
    double end = 0.0;
    for (const auto& s : segments) end = std::max(end, s.t_end());
    return end;
  }

  std::vector<double> sample_points() const {
    std::vector<double> out;
    if (sample_every > 0.0) {
      const auto n = static_cast<long long>(std::floor(total_duration / sample_every + 1e-9));
      for (long long k = 0; k <= n; ++k) out.push_back(std::min(total_duration, k * sample_every));
    } else {
      out.push_back(0.0);
    }
    if (total_duration - out.back() > time_epsilon_us) out.push_back(total_duration);
    return out;
  }
};

/// Structural checks shared by the parser and programmatic construction.
/// `lines` gives the source line of each segment (0 when built in code).
inline void validate_program(const PulseProgram& p, const std::vector<int>& seg_lines = {},
                             const std::vector<int>& kick_lines = {}, int total_line = 0) {
  auto line_of = [](const std::vector<int>& lines, std::size_t i) {
    return i < lines.size() ? lines[i] : 0;
  };
  if (!std::isfinite(p.total_duration) || p.total_duration < 0.0)
    throw ParseError(total_line, "total duration must be non-negative");
  if (!std::isfinite(p.sample_every) || p.sample_every < 0.0)
    throw ParseError(0, "sample spacing must be non-negative");
  for (std::size_t i = 0; i < p.segments.size(); ++i) {
    const auto& s = p.segments[i];
    const int line = line_of(seg_lines, i);
    ChannelKind kind;
    if (!channel_kind(s.channel, kind)) throw ParseError(line, "unknown channel '" + s.channel + "'");
    if (!std::isfinite(s.t_start) || s.t_start < 0.0) throw ParseError(line, "segment start must be >= 0");
    if (!std::isfinite(s.duration) || s.duration <= 0.0) throw ParseError(line, "segment duration must be > 0");
    if (!std::isfinite(s.carrier) || s.carrier <= 0.0) throw ParseError(line, "carrier must be > 0");
    if (!std::isfinite(s.amplitude) || s.amplitude < 0.0) throw ParseError(line, "amplitude must be >= 0");
    if (!std::isfinite(s.phase)) throw ParseError(line, "phase must be finite");
    if (s.t_end() > p.total_duration + time_epsilon_us)
      throw ParseError(line, "segment ends after the total duration");
  }
  // Same-channel overlap, reported at the later segment.
  std::vector<std::size_t> order(p.segments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = p.segments[a];
    const auto& sb = p.segments[b];
    return sa.channel != sb.channel ? sa.channel < sb.channel : sa.t_start < sb.t_start;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& prev = p.segments[order[k - 1]];
    const auto& cur = p.segments[order[k]];
    if (prev.channel == cur.channel && cur.t_start < prev.t_end() - time_epsilon_us)
      throw ParseError(line_of(seg_lines, std::max(order[k], order[k - 1])),
                       "segments overlap on channel " + cur.channel);
  }
  for (std::size_t i = 0; i < p.kicks.size(); ++i) {
    const auto& k = p.kicks[i];
    if (!std::isfinite(k.time) || k.time < 0.0 || k.time > p.total_duration + time_epsilon_us)
      throw ParseError(line_of(kick_lines, i), "kick time outside [0, total]");
    if (!std::isfinite(k.phase)) throw ParseError(line_of(kick_lines, i), "kick phase must be finite");
  }
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

/// Reads `key=value` tokens into `fields`, requiring exactly `keys`.
inline std::map<std::string, double> read_fields(const std::vector<std::string_view>& tokens, std::size_t first,
                                                 std::initializer_list<const char*> keys, int line) {
  std::map<std::string, double> fields;
  for (std::size_t i = first; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string_view::npos)
      throw ParseError(line, "expected key=value, got '" + std::string(tokens[i]) + "'");
    const std::string key(tokens[i].substr(0, eq));
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
      throw ParseError(line, "unexpected field '" + key + "'");
    if (fields.count(key)) throw ParseError(line, "duplicate field '" + key + "'");
    double v = 0.0;
    if (!parse_double(tokens[i].substr(eq + 1), v) || !std::isfinite(v))
      throw ParseError(line, "field '" + key + "' is not a finite number");
    fields[key] = v;
  }
  for (const char* k : keys)
    if (!fields.count(k)) throw ParseError(line, std::string("missing field '") + k + "'");
  return fields;
}

}  // namespace detail

inline PulseProgram parse_program(std::string_view text) {
  PulseProgram p;
  std::vector<int> seg_lines, kick_lines;
  bool have_total = false;
  int total_line = 0;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto tokens = detail::split_ws(line);
      const auto& head = tokens[0];
      if (head == "name") {
        const auto rest = trim(line.substr(4));
        if (rest.empty()) throw ParseError(line_no, "name directive needs a value");
        p.name = std::string(rest);
      } else if (head == "total") {
        if (tokens.size() != 2 || !parse_double(tokens[1], p.total_duration) || !std::isfinite(p.total_duration))
          throw ParseError(line_no, "expected 'total <us>'");
        if (p.total_duration < 0.0) throw ParseError(line_no, "total duration must be non-negative");
        have_total = true;
        total_line = line_no;
      } else if (head == "sample") {
        const auto f = detail::read_fields(tokens, 1, {"every"}, line_no);
        if (f.at("every") <= 0.0) throw ParseError(line_no, "sample spacing must be positive");
        p.sample_every = f.at("every");
      } else if (head == "seg") {
        if (tokens.size() < 2) throw ParseError(line_no, "seg needs a channel");
        Segment s;
        s.channel = std::string(tokens[1]);
        ChannelKind kind;
        if (!channel_kind(s.channel, kind)) throw ParseError(line_no, "unknown channel '" + s.channel + "'");
        const auto f = detail::read_fields(tokens, 2, {"t", "dur", "f", "amp", "ph"}, line_no);
        s.t_start = f.at("t");
        s.duration = f.at("dur");
        s.carrier = f.at("f");
        s.amplitude = f.at("amp");
        s.phase = canonical_phase(f.at("ph"));
        if (s.duration <= 0.0) throw ParseError(line_no, "segment duration must be > 0");
        p.segments.push_back(s);
        seg_lines.push_back(line_no);
      } else if (head == "kick") {
        const auto f = detail::read_fields(tokens, 1, {"t", "ph"}, line_no);
        p.kicks.push_back({f.at("t"), canonical_phase(f.at("ph"))});
        kick_lines.push_back(line_no);
      } else {
        throw ParseError(line_no, "unknown directive '" + std::string(head) + "'");
      }
    }
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  if (!have_total) {
    p.total_duration = p.max_segment_end();
    for (const auto& k : p.kicks) p.total_duration = std::max(p.total_duration, k.time);
  }
  validate_program(p, seg_lines, kick_lines, total_line);
  return p;
}

inline std::string serialize(const PulseProgram& p) {
  std::string out = "# endosim pulse program\n";
  if (!p.name.empty()) out += "name " + p.name + "\n";
  out += "total " + format_shortest(p.total_duration) + "\n";
  if (p.sample_every > 0.0) out += "sample every=" + format_shortest(p.sample_every) + "\n";
  for (const auto& s : p.segments)
    out += "seg " + s.channel + " t=" + format_shortest(s.t_start) + " dur=" + format_shortest(s.duration) +
           " f=" + format_shortest(s.carrier) + " amp=" + format_shortest(s.amplitude) +
           " ph=" + format_shortest(canonical_phase(s.phase)) + "\n";
  for (const auto& k : p.kicks)
    out += "kick t=" + format_shortest(k.time) + " ph=" + format_shortest(canonical_phase(k.phase)) + "\n";
  return out;
}

struct Drive {
  std::string channel;
  ChannelKind kind = ChannelKind::microwave;
  double carrier = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;
};

struct ControlInterval {
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<Drive> drives;
};

/// Partition [0, total] at every segment boundary; drives are constant inside
/// each interval.
inline std::vector<ControlInterval> compile_intervals(const PulseProgram& p) {
  std::vector<double> cuts{0.0, p.total_duration};
  for (const auto& s : p.segments) {
    cuts.push_back(s.t_start);
    cuts.push_back(std::min(s.t_end(), p.total_duration));
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> bounds;
  for (double c : cuts)
    if (bounds.empty() || c - bounds.back() > time_epsilon_us) bounds.push_back(c);

  std::vector<ControlInterval> out;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    ControlInterval iv{bounds[i], bounds[i + 1], {}};
    const double mid = 0.5 * (iv.t_start + iv.t_end);
    for (const auto& s : p.segments) {
      if (s.t_start <= mid && mid < s.t_end()) {
        Drive d;
        channel_kind(s.channel, d.kind);
        d.channel = s.channel;
        d.carrier = s.carrier;
        d.amplitude = s.amplitude;
        d.phase = s.phase;
        iv.drives.push_back(d);
      }
    }
    out.push_back(std::move(iv));
  }
  return out;
}

}  // namespace endosim

#endif  // ENDOSIM_PULSE_HPP
