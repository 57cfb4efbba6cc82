#include "uwauth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "uwauth/errors.hpp"
#include "uwauth/util.hpp"

namespace uwauth::eval {

void ScoreSet::push_back(double z, int label) {
  if (label != 0 && label != 1) throw DomainError("labels must be 0 or 1");
  scores.push_back(z);
  labels.push_back(label);
}

std::size_t ScoreSet::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

namespace {

void require_both(const ScoreSet& s) {
  if (s.scores.size() != s.labels.size()) throw InputShapeError("score/label length mismatch");
  if (s.count(1) == 0 || s.count(0) == 0) throw MissingClassError("score set must contain both classes");
}

struct SortedScores {
  std::vector<double> alice;  // ascending
  std::vector<double> eve;    // ascending
  std::vector<double> distinct;
};

SortedScores sort_scores(const ScoreSet& s) {
  SortedScores out;
  for (std::size_t i = 0; i < s.size(); ++i) (s.labels[i] == 1 ? out.alice : out.eve).push_back(s.scores[i]);
  std::sort(out.alice.begin(), out.alice.end());
  std::sort(out.eve.begin(), out.eve.end());
  out.distinct = s.scores;
  std::sort(out.distinct.begin(), out.distinct.end());
  out.distinct.erase(std::unique(out.distinct.begin(), out.distinct.end()), out.distinct.end());
  return out;
}

std::vector<double> candidates_from(const std::vector<double>& distinct) {
  std::vector<double> c;
  if (distinct.empty()) return c;
  c.reserve(distinct.size() + 1);
  c.push_back(distinct.front() - 1.0);
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) c.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  c.push_back(distinct.back() + 1.0);
  return c;
}

// Rates at every candidate with a single merge pass.
template <class Fn>
void sweep(const SortedScores& ss, const std::vector<double>& cands, Fn&& visit) {
  const double n1 = static_cast<double>(ss.alice.size());
  const double n0 = static_cast<double>(ss.eve.size());
  std::size_t below_alice = 0, below_eve = 0;
  for (std::size_t c = 0; c < cands.size(); ++c) {
    const double lambda = cands[c];
    while (below_alice < ss.alice.size() && ss.alice[below_alice] < lambda) ++below_alice;
    while (below_eve < ss.eve.size() && ss.eve[below_eve] < lambda) ++below_eve;
    const double p_fa = static_cast<double>(below_alice) / n1;
    const double p_md = static_cast<double>(ss.eve.size() - below_eve) / n0;
    visit(c, lambda, p_fa, p_md);
  }
}

}  // namespace

Rates compute_rates(const ScoreSet& s, double lambda) {
  require_both(s);
  std::size_t alice = 0, eve = 0, rejected_alice = 0, accepted_eve = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool accept = s.scores[i] >= lambda;
    if (s.labels[i] == 1) {
      ++alice;
      if (!accept) ++rejected_alice;
    } else {
      ++eve;
      if (accept) ++accepted_eve;
    }
  }
  Rates r;
  r.p_fa = static_cast<double>(rejected_alice) / static_cast<double>(alice);
  r.p_md = static_cast<double>(accepted_eve) / static_cast<double>(eve);
  r.epsilon = balanced_error(r.p_fa, r.p_md);
  return r;
}

std::vector<double> candidate_thresholds(const ScoreSet& s) {
  if (s.scores.empty()) throw EmptyInputError("score set is empty");
  auto distinct = s.scores;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  return candidates_from(distinct);
}

ThresholdChoice optimize_threshold(const ScoreSet& s) {
  require_both(s);
  const auto ss = sort_scores(s);
  const auto cands = candidates_from(ss.distinct);
  ThresholdChoice best{cands.front(), INFINITY};
  sweep(ss, cands, [&](std::size_t, double lambda, double p_fa, double p_md) {
    const double e = balanced_error(p_fa, p_md);
    if (e < best.epsilon) best = {lambda, e};
  });
  return best;
}

double threshold_for_target_fa(const ScoreSet& s, double target_p_fa) {
  if (s.scores.size() != s.labels.size()) throw InputShapeError("score/label length mismatch");
  if (s.count(1) == 0) throw MissingClassError("target false-alarm threshold needs Alice scores");
  if (!(target_p_fa >= 0.0 && target_p_fa <= 1.0)) throw DomainError("target p_fa must lie in [0, 1]");
  auto distinct = s.scores;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const auto cands = candidates_from(distinct);
  std::vector<double> alice;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.labels[i] == 1) alice.push_back(s.scores[i]);
  std::sort(alice.begin(), alice.end());
  const double n1 = static_cast<double>(alice.size());
  double chosen = cands.front();
  std::size_t below = 0;
  for (double lambda : cands) {
    while (below < alice.size() && alice[below] < lambda) ++below;
    if (static_cast<double>(below) / n1 <= target_p_fa)
      chosen = lambda;
    else
      break;  // p_fa is non-decreasing in lambda
  }
  return chosen;
}

std::vector<RocPoint> roc(const ScoreSet& s) {
  require_both(s);
  const auto ss = sort_scores(s);
  const auto cands = candidates_from(ss.distinct);
  std::vector<RocPoint> curve;
  curve.reserve(cands.size());
  sweep(ss, cands, [&](std::size_t, double, double p_fa, double p_md) { curve.push_back({p_fa, 1.0 - p_md}); });
  std::stable_sort(curve.begin(), curve.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.p_fa < b.p_fa || (a.p_fa == b.p_fa && a.detection < b.detection);
  });
  return curve;
}

double roc_area(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].p_fa - curve[i - 1].p_fa) * 0.5 * (curve[i].detection + curve[i - 1].detection);
  return area;
}

EvalReport evaluate(const ScoreSet& validation, const ScoreSet& test, const EvalMetadata& meta, bool with_roc) {
  EvalReport r;
  r.meta = meta;
  r.lambda = optimize_threshold(validation).lambda;
  r.rates = compute_rates(test, r.lambda);
  if (with_roc) r.roc = roc(test);
  return r;
}

std::string report_csv_row(const EvalReport& r) {
  return r.meta.scheme + ',' + std::to_string(r.meta.m) + ',' + format_double(r.meta.alpha) + ',' +
         std::to_string(r.meta.seed) + ',' + format_double(r.lambda) + ',' + format_double(r.rates.p_fa) + ',' +
         format_double(r.rates.p_md) + ',' + format_double(r.rates.epsilon);
}

void write_roc_csv(std::ostream& os, const std::vector<RocPoint>& curve) {
  os << "p_fa,detection\n";
  for (const auto& p : curve) os << format_double(p.p_fa) << ',' << format_double(p.detection) << '\n';
}

}  // namespace uwauth::eval
