// Copyright 2026 The MuJAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "mujam/bench.hpp"

namespace mujam {

std::vector<std::pair<int, double>> paired_differences(const RunRecord& run, const RunRecord& reference) {
  if (run.metrics.trip_hash != reference.metrics.trip_hash)
    throw Error("paired runs " + run.label + " and " + reference.label + " do not share a trip set");
  std::unordered_map<int, double> ref;
  for (const CompletedTrip& t : reference.metrics.trips) ref[t.vehicle_id] = t.total_delay;
  std::vector<std::pair<int, double>> out;
  for (const CompletedTrip& t : run.metrics.trips) {
    auto it = ref.find(t.vehicle_id);
    if (it != ref.end()) out.emplace_back(t.vehicle_id, t.total_delay - it->second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

using RunKey = std::tuple<std::string, int, int>;  // label, seed, network

}  // namespace

void summarize(MetricsReport& report) {
  std::map<RunKey, const RunRecord*> index;
  for (const RunRecord& r : report.runs) index[{r.label, r.seed, r.network}] = &r;

  report.summary.clear();
  for (const std::string& label : report.labels) {
    Summary s;
    s.label = label;
    std::vector<double> delays, totals, paired;
    std::map<int, std::vector<double>> per_seed;
    for (const RunRecord& r : report.runs) {
      if (r.label != label) continue;
      for (const CompletedTrip& t : r.metrics.trips) delays.push_back(t.total_delay);
      totals.push_back(r.metrics.total_delay);
      per_seed[r.seed].push_back(r.metrics.total_delay);
      if (label == report.reference) continue;
      auto ref = index.find({report.reference, r.seed, r.network});
      if (ref == index.end()) continue;
      for (const auto& [id, d] : paired_differences(r, *ref->second)) paired.push_back(d);
    }
    s.trips = static_cast<int>(delays.size());
    s.mean = mean_of(delays);
    s.median = quantile(delays, 0.5);
    s.q1 = quantile(delays, 0.25);
    s.q3 = quantile(delays, 0.75);
    s.mean_total_delay = mean_of(totals);
    for (const auto& [seed, v] : per_seed) s.seed_total_delay.push_back(mean_of(v));
    s.paired = static_cast<int>(paired.size());
    s.paired_mean = mean_of(paired);
    s.paired_median = quantile(paired, 0.5);
    s.paired_q1 = quantile(paired, 0.25);
    s.paired_q3 = quantile(paired, 0.75);
    report.summary.push_back(std::move(s));
  }
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string num(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::string fixed(double d, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, d);
  return buf;
}

void write_text(const std::filesystem::path& p, const std::string& s) { write_file(p.string(), s); }

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string svg_open(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" "
         "fill=\"white\"/>\n";
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  double px0 = 0.0, px1 = 1.0;
  double map(double v) const { return hi == lo ? (px0 + px1) / 2 : px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

Axis padded(double lo, double hi, double px0, double px1) {
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad, px0, px1};
}

std::string y_ticks(const Axis& y, double x_left, double x_right) {
  std::string s;
  for (int i = 0; i <= 4; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 4.0;
    const double py = y.map(v);
    s += "<line x1=\"" + fixed(x_left) + "\" y1=\"" + fixed(py) + "\" x2=\"" + fixed(x_right) + "\" y2=\"" +
         fixed(py) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + fixed(x_left - 4) + "\" y=\"" + fixed(py + 4) + "\" text-anchor=\"end\">" + fixed(v, 1) +
         "</text>\n";
  }
  return s;
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const Axis& x, const Axis& y,
                     const char* colour) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" points=\"";
  for (const auto& [a, b] : pts) s += fixed(x.map(a)) + "," + fixed(y.map(b)) + " ";
  return s + "\"/>\n";
}

std::string box_plot(const MetricsReport& r) {
  const int w = 120 + 90 * static_cast<int>(std::max<std::size_t>(1, r.summary.size()));
  const int h = 360;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  std::map<std::string, std::vector<double>> delays;
  for (const RunRecord& run : r.runs)
    for (const CompletedTrip& t : run.metrics.trips) delays[run.label].push_back(t.total_delay);
  for (const Summary& s : r.summary) {
    const auto& d = delays[s.label];
    if (d.empty()) continue;
    const auto [mn, mx] = std::minmax_element(d.begin(), d.end());
    lo = first ? *mn : std::min(lo, *mn);
    hi = first ? *mx : std::max(hi, *mx);
    first = false;
  }
  const Axis y = padded(lo, hi, h - 50, 20);
  std::string s = svg_open(w, h);
  s += "<text x=\"10\" y=\"14\">per-trip delay (s)</text>\n";
  s += y_ticks(y, 70, w - 10);
  for (std::size_t i = 0; i < r.summary.size(); ++i) {
    const Summary& m = r.summary[i];
    const auto& d = delays[m.label];
    const double cx = 110 + 90.0 * static_cast<double>(i);
    const char* c = kPalette[i % 10];
    if (!d.empty()) {
      const double iqr = m.q3 - m.q1;
      double wlo = m.q1, whi = m.q3;
      for (double v : d) {
        if (v >= m.q1 - 1.5 * iqr) wlo = std::min(wlo, v);
        if (v <= m.q3 + 1.5 * iqr) whi = std::max(whi, v);
      }
      s += "<line x1=\"" + fixed(cx) + "\" y1=\"" + fixed(y.map(wlo)) + "\" x2=\"" + fixed(cx) + "\" y2=\"" +
           fixed(y.map(whi)) + "\" stroke=\"" + c + "\"/>\n";
      s += "<rect x=\"" + fixed(cx - 25) + "\" y=\"" + fixed(y.map(m.q3)) + "\" width=\"50\" height=\"" +
           fixed(y.map(m.q1) - y.map(m.q3)) + "\" fill=\"white\" stroke=\"" + c + "\"/>\n";
      s += "<line x1=\"" + fixed(cx - 25) + "\" y1=\"" + fixed(y.map(m.median)) + "\" x2=\"" + fixed(cx + 25) +
           "\" y2=\"" + fixed(y.map(m.median)) + "\" stroke=\"" + c + "\" stroke-width=\"2\"/>\n";
    }
    s += "<text x=\"" + fixed(cx) + "\" y=\"" + std::to_string(h - 30) + "\" text-anchor=\"middle\">" + m.label +
         "</text>\n";
  }
  return s + "</svg>\n";
}

std::string cumulative_plot(const MetricsReport& r) {
  const int w = 640, h = 360;
  const auto& v = r.cumulative_difference;
  double lo = 0.0, hi = 0.0;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const Axis x{0.0, static_cast<double>(std::max<std::size_t>(1, v.size())), 70.0, w - 10.0};
  const Axis y = padded(lo, hi, h - 40, 20);
  std::string s = svg_open(w, h);
  s += "<text x=\"10\" y=\"14\">cumulative delay difference, model minus fixed time (s)</text>\n";
  s += y_ticks(y, 70, w - 10);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t t = 0; t < v.size(); ++t) pts.emplace_back(static_cast<double>(t + 1), v[t]);
  s += polyline(pts, x, y, kPalette[0]);
  return s + "</svg>\n";
}

std::string training_plot(const MetricsReport& r) {
  const int w = 640, h = 360;
  double lo = 0.0, hi = 0.0, max_step = 1.0;
  bool first = true;
  for (const auto& [label, hist] : r.training)
    for (const EvalPoint& p : hist) {
      lo = first ? p.validation_reward : std::min(lo, p.validation_reward);
      hi = first ? p.validation_reward : std::max(hi, p.validation_reward);
      max_step = std::max(max_step, static_cast<double>(p.step));
      first = false;
    }
  const Axis x{0.0, max_step, 70.0, w - 130.0};
  const Axis y = padded(lo, hi, h - 40, 20);
  std::string s = svg_open(w, h);
  s += "<text x=\"10\" y=\"14\">validation reward per training step</text>\n";
  s += y_ticks(y, 70, w - 130);
  int i = 0;
  for (const auto& [label, hist] : r.training) {
    std::vector<std::pair<double, double>> pts;
    for (const EvalPoint& p : hist) pts.emplace_back(p.step, p.validation_reward);
    s += polyline(pts, x, y, kPalette[i % 10]);
    s += "<text x=\"" + std::to_string(w - 120) + "\" y=\"" + std::to_string(30 + 14 * i) + "\" fill=\"" +
         kPalette[i % 10] + "\">" + label + "</text>\n";
    ++i;
  }
  return s + "</svg>\n";
}

}  // namespace

void export_report(const MetricsReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const fs::path d(dir);

  std::string runs = "label,method,constraints,seed,network,trip_hash,total_delay,steps,all_completed,mean_reward\n";
  std::string trips = "label,seed,network,vehicle_id,insertion_time,completion_time,total_delay\n";
  std::string steps = "label,seed,network,t,delay,reward\n";
  std::string paired = "label,seed,network,vehicle_id,difference\n";
  std::map<RunKey, const RunRecord*> index;
  for (const RunRecord& r : report.runs) index[{r.label, r.seed, r.network}] = &r;
  for (const RunRecord& r : report.runs) {
    const std::string key = r.label + "," + std::to_string(r.seed) + "," + std::to_string(r.network);
    runs += r.label + "," + r.method + "," + r.constraints + "," + std::to_string(r.seed) + "," +
            std::to_string(r.network) + "," + std::to_string(r.metrics.trip_hash) + "," + num(r.metrics.total_delay) +
            "," + std::to_string(r.metrics.steps) + "," + (r.metrics.all_completed ? "1" : "0") + "," +
            num(r.metrics.mean_reward) + "\n";
    for (const CompletedTrip& t : r.metrics.trips)
      trips += key + "," + std::to_string(t.vehicle_id) + "," + std::to_string(t.insertion_time) + "," +
               std::to_string(t.completion_time) + "," + num(t.total_delay) + "\n";
    for (std::size_t t = 0; t < r.metrics.delay_series.size(); ++t)
      steps += key + "," + std::to_string(t) + "," + num(r.metrics.delay_series[t]) + "," +
               num(t < r.metrics.reward_series.size() ? r.metrics.reward_series[t] : 0.0) + "\n";
    if (r.label == report.reference) continue;
    auto ref = index.find({report.reference, r.seed, r.network});
    if (ref == index.end()) continue;
    for (const auto& [id, diff] : paired_differences(r, *ref->second))
      paired += key + "," + std::to_string(id) + "," + num(diff) + "\n";
  }

  std::string summary =
      "label,trips,mean,median,q1,q3,mean_total_delay,seed_total_delay,paired,paired_mean,paired_median,paired_q1,"
      "paired_q3\n";
  for (const Summary& s : report.summary) {
    std::string seeds;
    for (double v : s.seed_total_delay) seeds += (seeds.empty() ? "" : ";") + num(v);
    summary += s.label + "," + std::to_string(s.trips) + "," + num(s.mean) + "," + num(s.median) + "," + num(s.q1) +
               "," + num(s.q3) + "," + num(s.mean_total_delay) + "," + seeds + "," + std::to_string(s.paired) + "," +
               num(s.paired_mean) + "," + num(s.paired_median) + "," + num(s.paired_q1) + "," + num(s.paired_q3) +
               "\n";
  }

  std::string smoke = "t,cumulative_difference,step_latency_ms\n";
  const std::size_t n = std::max(report.cumulative_difference.size(), report.step_latency_ms.size());
  for (std::size_t t = 0; t < n; ++t)
    smoke += std::to_string(t) + "," +
             (t < report.cumulative_difference.size() ? num(report.cumulative_difference[t]) : "") + "," +
             (t < report.step_latency_ms.size() ? num(report.step_latency_ms[t]) : "") + "\n";

  std::string training = "label,step,validation_reward,loss_r,loss_v,loss_phi,wall_time\n";
  for (const auto& [label, hist] : report.training)
    for (const EvalPoint& p : hist)
      training += label + "," + std::to_string(p.step) + "," + num(p.validation_reward) + "," + num(p.loss.reward) +
                  "," + num(p.loss.value) + "," + num(p.loss.policy) + "," + num(p.wall_seconds) + "\n";

  write_text(d / "runs.csv", runs);
  write_text(d / "trips.csv", trips);
  write_text(d / "steps.csv", steps);
  write_text(d / "paired.csv", paired);
  write_text(d / "summary.csv", summary);
  write_text(d / "smoke.csv", smoke);
  write_text(d / "training.csv", training);
  write_text(d / "reference.txt", report.reference + "\n");
  write_text(d / "delay_boxplot.svg", box_plot(report));
  write_text(d / "cumulative_difference.svg", cumulative_plot(report));
  write_text(d / "training_curves.svg", training_plot(report));
}

// ---------------------------------------------------------------------------
// Import

namespace {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw MissingArtifact("missing " + p.string());
  std::stringstream in(read_file(p.string()));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

int to_int(const std::string& s) {
  try {
    return std::stoi(s);
  } catch (const std::exception&) {
    throw IoError("malformed integer '" + s + "' in report");
  }
}

double to_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw IoError("malformed number '" + s + "' in report");
  }
}

}  // namespace

MetricsReport load_report(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path d(dir);
  MetricsReport report;
  std::map<RunKey, std::size_t> index;
  for (const auto& c : read_csv(d / "runs.csv")) {
    if (c.size() != 10) throw IoError("malformed runs.csv row");
    RunRecord r;
    r.label = c[0];
    r.method = c[1];
    r.constraints = c[2];
    r.seed = to_int(c[3]);
    r.network = to_int(c[4]);
    try {
      r.metrics.trip_hash = std::stoull(c[5]);
    } catch (const std::exception&) {
      throw IoError("malformed trip hash in runs.csv");
    }
    r.metrics.total_delay = to_double(c[6]);
    r.metrics.steps = to_int(c[7]);
    r.metrics.all_completed = c[8] == "1";
    r.metrics.mean_reward = to_double(c[9]);
    if (std::find(report.labels.begin(), report.labels.end(), r.label) == report.labels.end())
      report.labels.push_back(r.label);
    index[{r.label, r.seed, r.network}] = report.runs.size();
    report.runs.push_back(std::move(r));
  }
  for (const auto& c : read_csv(d / "trips.csv")) {
    if (c.size() != 7) throw IoError("malformed trips.csv row");
    auto it = index.find({c[0], to_int(c[1]), to_int(c[2])});
    if (it == index.end()) throw IoError("trip row without a run");
    CompletedTrip t;
    t.vehicle_id = to_int(c[3]);
    t.insertion_time = to_int(c[4]);
    t.completion_time = to_int(c[5]);
    t.total_delay = to_double(c[6]);
    report.runs[it->second].metrics.trips.push_back(t);
  }
  if (fs::exists(d / "training.csv")) {
    for (const auto& c : read_csv(d / "training.csv")) {
      if (c.size() != 7) throw IoError("malformed training.csv row");
      EvalPoint p;
      p.step = to_int(c[1]);
      p.validation_reward = to_double(c[2]);
      p.loss.reward = to_double(c[3]);
      p.loss.value = to_double(c[4]);
      p.loss.policy = to_double(c[5]);
      p.loss.total = p.loss.reward + p.loss.value + p.loss.policy;
      p.wall_seconds = to_double(c[6]);
      report.training[c[0]].push_back(p);
    }
  }
  if (fs::exists(d / "reference.txt")) {
    std::string ref = read_file((d / "reference.txt").string());
    while (!ref.empty() && (ref.back() == '\n' || ref.back() == '\r')) ref.pop_back();
    report.reference = ref;
  } else if (!report.labels.empty()) {
    report.reference = report.labels.front();
  }
  summarize(report);
  return report;
}

std::vector<EvalPoint> load_training_log(const std::string& path) {
  std::vector<EvalPoint> out;
  for (const auto& c : read_csv(path)) {
    if (c.size() != 6) throw IoError("malformed training log row in " + path);
    EvalPoint p;
    p.step = to_int(c[0]);
    p.loss.reward = to_double(c[1]);
    p.loss.value = to_double(c[2]);
    p.loss.policy = to_double(c[3]);
    p.loss.total = p.loss.reward + p.loss.value + p.loss.policy;
    p.validation_reward = to_double(c[4]);
    p.wall_seconds = to_double(c[5]);
    out.push_back(p);
  }
  return out;
}

MetricsReport combine_reports(const std::vector<MetricsReport>& reports, const std::string& reference) {
  MetricsReport out;
  out.reference = reference;
  for (const MetricsReport& r : reports) {
    for (const std::string& l : r.labels)
      if (std::find(out.labels.begin(), out.labels.end(), l) == out.labels.end()) out.labels.push_back(l);
    for (const RunRecord& run : r.runs) out.runs.push_back(run);
    for (const auto& [label, hist] : r.training) out.training[label] = hist;
  }
  if (!reference.empty() && std::find(out.labels.begin(), out.labels.end(), reference) == out.labels.end())
    throw ConfigError("reference '" + reference + "' is not among the combined runs");
  summarize(out);
  return out;
}

}  // namespace mujam
