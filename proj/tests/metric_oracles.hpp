#pragma once

// Independent reference implementations used to check the metrics module.

#include <algorithm>
#include <set>
#include <vector>

#include "bridgeprompt/random.hpp"

namespace bptest::oracle {

struct Run {
  int label;
  std::set<std::size_t> frames;
};

// Run-length grouping by explicit frame sets, dropping ignored labels.
inline std::vector<Run> runs(const std::vector<int>& s, const std::set<int>& ignore) {
  std::vector<Run> out;
  int current = 0;
  bool open = false;
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (!open || s[t] != current) {
      out.push_back({s[t], {}});
      current = s[t];
      open = true;
    }
    out.back().frames.insert(t);
  }
  std::vector<Run> kept;
  for (auto& r : out)
    if (!ignore.count(r.label)) kept.push_back(std::move(r));
  return kept;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& gt, const std::set<int>& ignore) {
  std::size_t hit = 0, n = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (ignore.count(gt[t])) continue;
    ++n;
    if (pred[t] == gt[t]) ++hit;
  }
  return 100.0 * static_cast<double>(hit) / static_cast<double>(n);
}

// Full-table Levenshtein on segment classes.
inline double edit(const std::vector<int>& pred, const std::vector<int>& gt, const std::set<int>& ignore) {
  std::vector<int> p, g;
  for (const auto& r : runs(pred, ignore)) p.push_back(r.label);
  for (const auto& r : runs(gt, ignore)) g.push_back(r.label);
  if (p.empty() && g.empty()) return 100.0;
  std::vector<std::vector<std::size_t>> d(p.size() + 1, std::vector<std::size_t>(g.size() + 1, 0));
  for (std::size_t i = 0; i <= p.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= g.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= p.size(); ++i)
    for (std::size_t j = 1; j <= g.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (p[i - 1] == g[j - 1] ? 0 : 1)});
  const double n = static_cast<double>(std::max(p.size(), g.size()));
  return std::max(0.0, 100.0 * (1.0 - static_cast<double>(d[p.size()][g.size()]) / n));
}

// Every predicted segment against every ground-truth segment, IoU from frame
// set intersection and union, same greedy in-order rule.
inline double f1(const std::vector<int>& pred, const std::vector<int>& gt, double tau, const std::set<int>& ignore) {
  const auto p = runs(pred, ignore), g = runs(gt, ignore);
  std::vector<bool> taken(g.size(), false);
  std::size_t tp = 0, fp = 0;
  for (const auto& ps : p) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g[j].label != ps.label) continue;
      std::vector<std::size_t> inter, uni;
      std::set_intersection(ps.frames.begin(), ps.frames.end(), g[j].frames.begin(), g[j].frames.end(),
                            std::back_inserter(inter));
      std::set_union(ps.frames.begin(), ps.frames.end(), g[j].frames.begin(), g[j].frames.end(),
                     std::back_inserter(uni));
      const double iou = static_cast<double>(inter.size()) / static_cast<double>(uni.size());
      if (iou > best) {
        best = iou;
        arg = j;
      }
    }
    if (best >= tau && !taken[arg]) {
      taken[arg] = true;
      ++tp;
    } else {
      ++fp;
    }
  }
  const std::size_t fn = g.size() - tp;
  if (tp + fp + fn == 0) return 100.0;
  return 100.0 * 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

// Segment-structured random stream: length <= max_len, up to `classes` labels.
inline std::vector<int> random_stream(bp::Rng& rng, std::size_t max_len, int classes) {
  const auto T = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_len)));
  const auto mean_run = static_cast<std::size_t>(rng.uniform_int(1, 30));
  std::vector<int> s;
  while (s.size() < T) {
    const int label = static_cast<int>(rng.uniform_int(0, classes - 1));
    const auto len = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(2 * mean_run)));
    for (std::size_t i = 0; i < len && s.size() < T; ++i) s.push_back(label);
  }
  return s;
}

// A noisy copy of `gt`: shifted boundaries, relabelled and split segments.
inline std::vector<int> perturbed(const std::vector<int>& gt, bp::Rng& rng, int classes) {
  std::vector<int> p = gt;
  const auto shift = rng.uniform_int(-5, 5);
  for (std::size_t t = 0; t < p.size(); ++t) {
    const auto src = static_cast<std::int64_t>(t) + shift;
    if (src >= 0 && src < static_cast<std::int64_t>(gt.size())) p[t] = gt[static_cast<std::size_t>(src)];
  }
  const auto edits = rng.uniform_int(0, 6);
  for (std::int64_t e = 0; e < edits; ++e) {
    const auto a = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(p.size()) - 1));
    const auto len = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const int label = static_cast<int>(rng.uniform_int(0, classes - 1));
    for (std::size_t t = a; t < std::min(p.size(), a + len); ++t) p[t] = label;
  }
  return p;
}

}  // namespace bptest::oracle
