#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace bp {

// Class-index streams. Segment ends are inclusive.
struct Segment {
  int label = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  bool operator==(const Segment&) const = default;
};

std::vector<Segment> segments(std::span<const int> stream);

// Percent of non-ignored ground-truth frames predicted correctly.
double frame_accuracy(std::span<const int> pred, std::span<const int> gt, const std::set<int>& ignore = {});

// 100 * (1 - Lev(P, G) / max(|P|, |G|)) over segment class sequences, with
// segments of ignored classes dropped from both sides.
double edit_score(std::span<const int> pred, std::span<const int> gt, const std::set<int>& ignore = {});

struct F1Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  F1Counts& operator+=(const F1Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

// Greedy in-order matching: each predicted segment takes its best-IoU
// same-class ground-truth segment, and counts as TP only if that IoU >= tau
// and the segment is still free.
F1Counts f1_counts(std::span<const int> pred, std::span<const int> gt, double tau, const std::set<int>& ignore = {});
// 100 when the counts are all zero.
double f1_score(const F1Counts& counts);
double f1_at(std::span<const int> pred, std::span<const int> gt, double tau, const std::set<int>& ignore = {});
// f1_at restricted to one class; 100 when the class is absent from both.
double per_class_f1(std::span<const int> pred, std::span<const int> gt, double tau, int cls);

inline constexpr double kF1Thresholds[] = {0.10, 0.25, 0.50};

struct ScoreReport {
  double accuracy = 0.0;
  double edit = 0.0;
  double f1_10 = 0.0;
  double f1_25 = 0.0;
  double f1_50 = 0.0;
  std::map<int, double> per_class_f1_10;
};

// Pools a set of videos: accuracy over all frames, edit averaged per video,
// F1 from summed TP/FP/FN.
class ScoreAccumulator {
 public:
  explicit ScoreAccumulator(std::set<int> ignore = {}, std::set<int> tracked_classes = {});

  void add(std::span<const int> pred, std::span<const int> gt);
  ScoreReport report() const;
  std::size_t videos() const { return videos_; }

 private:
  std::set<int> ignore_;
  std::set<int> tracked_;
  std::size_t videos_ = 0;
  std::size_t correct_ = 0;
  std::size_t counted_ = 0;
  double edit_sum_ = 0.0;
  F1Counts f1_[3];
  std::map<int, F1Counts> per_class_;
};

// Field-wise mean of several reports; per-class values averaged over the
// reports that carry them.
ScoreReport mean_report(std::span<const ScoreReport> reports);

inline constexpr const char* kReportHeader = "split,task,acc,edit,f1_10,f1_25,f1_50";
std::string format_report_row(const std::string& split, const std::string& task, const ScoreReport& r);
// "class,f1_10" table; `names` maps class index to its printed label.
std::string format_per_class_csv(const ScoreReport& r, const std::map<int, std::string>& names);

}  // namespace bp
