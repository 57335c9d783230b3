#include "bridgeprompt/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "bridgeprompt/error.hpp"

namespace bp {

namespace {

std::vector<Segment> kept_segments(std::span<const int> stream, const std::set<int>& ignore) {
  auto segs = segments(stream);
  std::erase_if(segs, [&](const Segment& s) { return ignore.count(s.label) > 0; });
  return segs;
}

void check_pair(std::span<const int> pred, std::span<const int> gt, const char* what) {
  if (pred.empty() || gt.empty()) throw ContractError(std::string(what) + ": empty stream");
  if (pred.size() != gt.size()) {
    throw DimensionError(std::string(what) + ": prediction has " + std::to_string(pred.size()) +
                         " frames, ground truth " + std::to_string(gt.size()));
  }
}

void check_tau(double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ParameterError("overlap threshold must lie in (0, 1]");
}

}  // namespace

std::vector<Segment> segments(std::span<const int> stream) {
  if (stream.empty()) throw ContractError("segments: empty stream");
  std::vector<Segment> out;
  for (std::size_t t = 0; t < stream.size(); ++t) {
    if (out.empty() || out.back().label != stream[t]) {
      out.push_back({stream[t], t, t});
    } else {
      out.back().end = t;
    }
  }
  return out;
}

double frame_accuracy(std::span<const int> pred, std::span<const int> gt, const std::set<int>& ignore) {
  if (pred.size() != gt.size()) throw DimensionError("frame_accuracy: stream lengths differ");
  std::size_t correct = 0, counted = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (ignore.count(gt[t])) continue;
    ++counted;
    if (pred[t] == gt[t]) ++correct;
  }
  if (counted == 0) throw UndefinedMetricError("frame_accuracy: every frame is ignored");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(counted);
}

double edit_score(std::span<const int> pred, std::span<const int> gt, const std::set<int>& ignore) {
  if (pred.empty() || gt.empty()) throw ContractError("edit_score: empty stream");
  const auto p = kept_segments(pred, ignore);
  const auto g = kept_segments(gt, ignore);
  const std::size_t n = p.size(), m = g.size();
  if (n == 0 && m == 0) return 100.0;
  // Two-row Levenshtein.
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (p[i - 1].label == g[j - 1].label ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  const double d = static_cast<double>(prev[m]) / static_cast<double>(std::max(n, m));
  return std::max(0.0, 100.0 * (1.0 - d));
}

F1Counts f1_counts(std::span<const int> pred, std::span<const int> gt, double tau, const std::set<int>& ignore) {
  check_tau(tau);
  check_pair(pred, gt, "f1_at");
  const auto p = kept_segments(pred, ignore);
  const auto g = kept_segments(gt, ignore);
  std::vector<bool> used(g.size(), false);
  F1Counts c;
  for (const auto& s : p) {
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g[j].label != s.label) continue;
      const std::size_t lo = std::max(s.start, g[j].start), hi = std::min(s.end, g[j].end);
      const double inter = hi >= lo ? static_cast<double>(hi - lo + 1) : 0.0;
      const double uni = static_cast<double>(std::max(s.end, g[j].end) - std::min(s.start, g[j].start) + 1);
      const double iou = inter / uni;
      if (iou > best) {
        best = iou;
        best_j = j;
      }
    }
    if (best >= tau && !used[best_j]) {
      used[best_j] = true;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = g.size() - c.tp;
  return c;
}

double f1_score(const F1Counts& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 100.0;
  return 100.0 * static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

double f1_at(std::span<const int> pred, std::span<const int> gt, double tau, const std::set<int>& ignore) {
  return f1_score(f1_counts(pred, gt, tau, ignore));
}

namespace {

std::set<int> all_but(std::span<const int> a, std::span<const int> b, int cls) {
  std::set<int> out(a.begin(), a.end());
  out.insert(b.begin(), b.end());
  out.erase(cls);
  return out;
}

}  // namespace

double per_class_f1(std::span<const int> pred, std::span<const int> gt, double tau, int cls) {
  return f1_at(pred, gt, tau, all_but(pred, gt, cls));
}

ScoreAccumulator::ScoreAccumulator(std::set<int> ignore, std::set<int> tracked_classes)
    : ignore_(std::move(ignore)), tracked_(std::move(tracked_classes)) {}

void ScoreAccumulator::add(std::span<const int> pred, std::span<const int> gt) {
  check_pair(pred, gt, "ScoreAccumulator");
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (ignore_.count(gt[t])) continue;
    ++counted_;
    if (pred[t] == gt[t]) ++correct_;
  }
  edit_sum_ += edit_score(pred, gt, ignore_);
  for (std::size_t i = 0; i < 3; ++i) f1_[i] += f1_counts(pred, gt, kF1Thresholds[i], ignore_);
  for (int cls : tracked_) per_class_[cls] += f1_counts(pred, gt, kF1Thresholds[0], all_but(pred, gt, cls));
  ++videos_;
}

ScoreReport ScoreAccumulator::report() const {
  if (videos_ == 0) throw UndefinedMetricError("no videos scored");
  if (counted_ == 0) throw UndefinedMetricError("frame_accuracy: every frame is ignored");
  ScoreReport r;
  r.accuracy = 100.0 * static_cast<double>(correct_) / static_cast<double>(counted_);
  r.edit = edit_sum_ / static_cast<double>(videos_);
  r.f1_10 = f1_score(f1_[0]);
  r.f1_25 = f1_score(f1_[1]);
  r.f1_50 = f1_score(f1_[2]);
  for (int cls : tracked_) r.per_class_f1_10[cls] = f1_score(per_class_.at(cls));
  return r;
}

ScoreReport mean_report(std::span<const ScoreReport> reports) {
  if (reports.empty()) throw UndefinedMetricError("mean_report: no reports");
  ScoreReport m;
  std::map<int, std::size_t> seen;
  for (const auto& r : reports) {
    m.accuracy += r.accuracy;
    m.edit += r.edit;
    m.f1_10 += r.f1_10;
    m.f1_25 += r.f1_25;
    m.f1_50 += r.f1_50;
    for (const auto& [cls, v] : r.per_class_f1_10) {
      m.per_class_f1_10[cls] += v;
      ++seen[cls];
    }
  }
  const double n = static_cast<double>(reports.size());
  m.accuracy /= n;
  m.edit /= n;
  m.f1_10 /= n;
  m.f1_25 /= n;
  m.f1_50 /= n;
  for (auto& [cls, v] : m.per_class_f1_10) v /= static_cast<double>(seen[cls]);
  return m;
}

std::string format_report_row(const std::string& split, const std::string& task, const ScoreReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%s,%.2f,%.2f,%.2f,%.2f,%.2f\n", split.c_str(), task.c_str(), r.accuracy, r.edit,
                r.f1_10, r.f1_25, r.f1_50);
  return buf;
}

std::string format_per_class_csv(const ScoreReport& r, const std::map<int, std::string>& names) {
  std::string out = "class,f1_10\n";
  char buf[64];
  for (const auto& [cls, v] : r.per_class_f1_10) {
    auto it = names.find(cls);
    const std::string name = it != names.end() ? it->second : std::to_string(cls);
    std::snprintf(buf, sizeof buf, ",%.2f\n", v);
    out += name + buf;
  }
  return out;
}

}  // namespace bp
