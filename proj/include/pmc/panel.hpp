#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmc/error.hpp"
#include "pmc/rng.hpp"

namespace pmc {

enum class OutcomeKind { binary, shares };

// Ordered pair of periods (t, s), 0-based. (t, s) and (s, t) are distinct pairs.
struct PeriodPair {
  int t = 0;
  int s = 1;

  PeriodPair reversed() const noexcept { return {s, t}; }
  friend bool operator==(const PeriodPair&, const PeriodPair&) = default;
  friend auto operator<=>(const PeriodPair&, const PeriodPair&) = default;
};

// N agents x J inside products x T periods x D covariates, with either binary
// choices or market shares. Products are 0-based inside alternatives; an outside
// option, when present, is implicit and never stored.
//
// Storage is (agent, period, product, covariate)-major so that the J x D block
// X_it is contiguous. Immutable after construction.
class PanelDataset {
 public:
  PanelDataset() = default;

  PanelDataset(int n_agents, int n_products, int n_periods, int n_covariates,
               std::vector<double> covariates, std::vector<double> outcomes, OutcomeKind kind,
               bool outside_option)
      : n_(n_agents),
        j_(n_products),
        t_(n_periods),
        d_(n_covariates),
        x_(std::move(covariates)),
        y_(std::move(outcomes)),
        kind_(kind),
        outside_(outside_option) {
    validate();
  }

  int n_agents() const noexcept { return n_; }
  int n_products() const noexcept { return j_; }
  int n_periods() const noexcept { return t_; }
  int n_covariates() const noexcept { return d_; }
  OutcomeKind outcome_kind() const noexcept { return kind_; }
  bool outside_option() const noexcept { return outside_; }

  double x(int i, int j, int t, int d) const { return x_[((std::size_t(i) * t_ + t) * j_ + j) * d_ + d]; }
  double outcome(int i, int j, int t) const { return y_[(std::size_t(i) * t_ + t) * j_ + j]; }

  // Contiguous J x D block X_it, product-major.
  std::span<const double> block(int i, int t) const {
    return {x_.data() + (std::size_t(i) * t_ + t) * j_ * d_, std::size_t(j_) * d_};
  }

  const std::vector<double>& covariates() const noexcept { return x_; }
  const std::vector<double>& outcomes() const noexcept { return y_; }

  void check_pair(PeriodPair p) const {
    if (p.t < 0 || p.t >= t_ || p.s < 0 || p.s >= t_ || p.t == p.s)
      throw ValidationError("invalid period pair (" + std::to_string(p.t) + ", " + std::to_string(p.s) +
                            ") for T=" + std::to_string(t_));
  }
  void check_product(int j) const {
    if (j < 0 || j >= j_)
      throw ValidationError("product index " + std::to_string(j) + " out of range for J=" + std::to_string(j_));
  }

 private:
  void validate() const {
    if (n_ < 1) throw ValidationError("n_agents must be positive");
    if (j_ < 1) throw ValidationError("n_products must be positive");
    if (t_ < 2) throw ValidationError("n_periods must be at least 2");
    if (d_ < 1) throw ValidationError("n_covariates must be positive");
    const std::size_t cells = std::size_t(n_) * j_ * t_;
    if (x_.size() != cells * d_) throw ValidationError("covariate tensor size does not match N*J*T*D");
    if (y_.size() != cells) throw ValidationError("outcome tensor size does not match N*J*T");
    for (double v : x_)
      if (!std::isfinite(v)) throw ValidationError("non-finite covariate entry");
    for (int i = 0; i < n_; ++i) {
      for (int t = 0; t < t_; ++t) {
        double sum = 0.0;
        for (int j = 0; j < j_; ++j) {
          const double v = outcome(i, j, t);
          if (kind_ == OutcomeKind::binary) {
            if (v != 0.0 && v != 1.0)
              throw ValidationError("binary outcome not in {0,1} at agent " + std::to_string(i) + ", period " +
                                    std::to_string(t));
          } else if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError("share outside [0,1] at agent " + std::to_string(i) + ", period " +
                                  std::to_string(t));
          }
          sum += v;
        }
        const std::string where = " at agent " + std::to_string(i) + ", period " + std::to_string(t);
        if (kind_ == OutcomeKind::binary) {
          if (sum > 1.0) throw ValidationError("binary choices sum to more than one" + where);
          if (!outside_ && sum != 1.0)
            throw ValidationError("binary choices must sum to one without an outside option" + where);
        } else if (sum > 1.0 + 1e-9) {
          throw ValidationError("shares sum to more than one" + where);
        }
      }
    }
  }

  int n_ = 0, j_ = 0, t_ = 0, d_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
  OutcomeKind kind_ = OutcomeKind::binary;
  bool outside_ = false;
};

// Row i = [X_it (J x D, product-major), X_is (J x D)], length 2*J*D.
inline void stack_row(const PanelDataset& data, int i, PeriodPair pair, std::span<double> out) {
  const auto a = data.block(i, pair.t);
  const auto b = data.block(i, pair.s);
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + a.size());
}

// N x (2*J*D) design matrix, row-major.
inline std::vector<double> stack_pair(const PanelDataset& data, PeriodPair pair) {
  data.check_pair(pair);
  const std::size_t width = 2 * std::size_t(data.n_products()) * data.n_covariates();
  std::vector<double> out(width * data.n_agents());
  for (int i = 0; i < data.n_agents(); ++i)
    stack_row(data, i, pair, std::span<double>(out.data() + i * width, width));
  return out;
}

// Element i is y_ijt - y_ijs (or the share difference).
inline std::vector<double> outcome_diff(const PanelDataset& data, int product, PeriodPair pair) {
  data.check_product(product);
  data.check_pair(pair);
  std::vector<double> out(data.n_agents());
  for (int i = 0; i < data.n_agents(); ++i) out[i] = data.outcome(i, product, pair.t) - data.outcome(i, product, pair.s);
  return out;
}

// Which unordered period pairs {t < s} enter estimation. Each selected pair
// contributes both orientations to the criterion.
struct PairPolicy {
  enum class Kind { automatic, all, adjacent, random };
  Kind kind = Kind::automatic;
  int random_count = 0;
  std::uint64_t seed = 0;

  // automatic: all pairs while T <= 4, adjacent pairs beyond.
  static constexpr int automatic_all_max_periods = 4;
};

inline std::vector<PeriodPair> select_pairs(int n_periods, const PairPolicy& policy) {
  std::vector<PeriodPair> all;
  for (int t = 0; t < n_periods; ++t)
    for (int s = t + 1; s < n_periods; ++s) all.push_back({t, s});
  std::vector<PeriodPair> adjacent;
  for (int t = 0; t + 1 < n_periods; ++t) adjacent.push_back({t, t + 1});

  switch (policy.kind) {
    case PairPolicy::Kind::all:
      return all;
    case PairPolicy::Kind::adjacent:
      return adjacent;
    case PairPolicy::Kind::automatic:
      return n_periods <= PairPolicy::automatic_all_max_periods ? all : adjacent;
    case PairPolicy::Kind::random: {
      if (policy.random_count < 1) throw ValidationError("random pair policy needs a positive pair count");
      Rng rng(policy.seed);
      // Partial Fisher-Yates, then restore lexicographic order.
      const std::size_t k = std::min<std::size_t>(policy.random_count, all.size());
      for (std::size_t m = 0; m < k; ++m) {
        const std::size_t pick = m + static_cast<std::size_t>(uniform_open(rng) * double(all.size() - m));
        std::swap(all[m], all[std::min(pick, all.size() - 1)]);
      }
      all.resize(k);
      std::sort(all.begin(), all.end());
      return all;
    }
  }
  return all;
}

inline const char* to_string(PairPolicy::Kind k) {
  switch (k) {
    case PairPolicy::Kind::automatic: return "auto";
    case PairPolicy::Kind::all: return "all";
    case PairPolicy::Kind::adjacent: return "adjacent";
    case PairPolicy::Kind::random: return "random";
  }
  return "?";
}

inline PairPolicy::Kind parse_pair_policy(const std::string& name) {
  if (name == "auto") return PairPolicy::Kind::automatic;
  if (name == "all") return PairPolicy::Kind::all;
  if (name == "adjacent") return PairPolicy::Kind::adjacent;
  if (name == "random") return PairPolicy::Kind::random;
  throw ValidationError("unknown pair policy '" + name + "' (expected auto|all|adjacent|random)");
}

}  // namespace pmc
