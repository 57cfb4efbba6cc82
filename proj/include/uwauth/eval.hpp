#pragma once

// Decisions from fused scores: error rates, threshold selection and ROC.
// A packet is accepted as authentic (H = 1) iff z >= lambda.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace uwauth::eval {

struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;  // 1 = Alice, 0 = Eve

  void push_back(double z, int label);
  std::size_t size() const noexcept { return scores.size(); }
  std::size_t count(int label) const;
};

struct Rates {
  double p_fa = 0.0;     // P[reject | Alice]
  double p_md = 0.0;     // P[accept | Eve]
  double epsilon = 0.0;  // 0.5 p_fa + 0.5 p_md
};

inline double balanced_error(double p_fa, double p_md) { return 0.5 * p_fa + 0.5 * p_md; }

Rates compute_rates(const ScoreSet& s, double lambda);

// Sorted candidate thresholds: one below the minimum score, the midpoints of
// consecutive distinct scores, and one above the maximum.
std::vector<double> candidate_thresholds(const ScoreSet& s);

struct ThresholdChoice {
  double lambda = 0.0;
  double epsilon = 0.0;
};

// Exact minimiser of epsilon over the candidate set; ties go to the
// smallest lambda.
ThresholdChoice optimize_threshold(const ScoreSet& s);

// Largest candidate lambda whose empirical false-alarm rate is <= target.
double threshold_for_target_fa(const ScoreSet& s, double target_p_fa);

struct RocPoint {
  double p_fa = 0.0;
  double detection = 0.0;  // 1 - p_md

  bool operator==(const RocPoint&) const = default;
};

// One point per candidate threshold, sorted by p_fa.
std::vector<RocPoint> roc(const ScoreSet& s);
double roc_area(const std::vector<RocPoint>& curve);

struct EvalMetadata {
  std::string scheme;
  int m = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

struct EvalReport {
  EvalMetadata meta;
  double lambda = 0.0;
  Rates rates;
  std::vector<RocPoint> roc;
};

// Chooses lambda on `validation` and reports rates on `test` at that lambda.
EvalReport evaluate(const ScoreSet& validation, const ScoreSet& test, const EvalMetadata& meta,
                    bool with_roc = false);

inline constexpr const char* kReportCsvHeader = "scheme,M,alpha,seed,lambda,p_fa,p_md,epsilon";
std::string report_csv_row(const EvalReport& r);
void write_roc_csv(std::ostream& os, const std::vector<RocPoint>& curve);

}  // namespace uwauth::eval
