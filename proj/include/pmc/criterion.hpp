#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <vector>

#include "pmc/error.hpp"
#include "pmc/index.hpp"
#include "pmc/panel.hpp"
#include "pmc/parallel.hpp"
#include "pmc/smoother.hpp"
#include "pmc/sphere.hpp"

namespace pmc {

// gamma(j, (t, s), row) where row = [X_t, X_s] as produced by stack_row.
using GammaFunction = std::function<double(int product, PeriodPair pair, std::span<const double> row)>;

namespace detail {

// Sign masks of the index differences d_k, bit k per product.
struct SignMasks {
  unsigned neg = 0;  // d_k < 0
  unsigned pos = 0;  // d_k > 0
};

inline SignMasks sign_masks(std::span<const double> delta_x, std::span<const double> beta) {
  SignMasks m;
  const std::size_t j_count = delta_x.size() / beta.size();
  for (std::size_t k = 0; k < j_count; ++k) {
    const double d = product_index(delta_x, k, beta);
    if (d < 0.0) m.neg |= 1u << k;
    if (d > 0.0) m.pos |= 1u << k;
  }
  return m;
}

// lambda for a product set J1 given the signs of (Xbar_k - Xlow_k)'beta:
// every k in J1 has d_k <= 0 and every k outside has d_k >= 0.
constexpr bool lambda_from_masks(unsigned set, SignMasks m) noexcept {
  return (set & m.pos) == 0 && (m.neg & ~set) == 0;
}

constexpr SignMasks flipped(SignMasks m) noexcept { return {m.pos, m.neg}; }

}  // namespace detail

// lambda_j = prod_k 1{ (-1)^{1{k != j}} (Xbar_k - Xlow_k)'beta <= 0 }.
// delta_x is J x D, product-major; j is 0-based.
inline int lambda(int j, std::span<const double> delta_x, std::span<const double> beta) {
  return detail::lambda_from_masks(1u << j, detail::sign_masks(delta_x, beta)) ? 1 : 0;
}

// 1 iff (Xbar_k - Xlow_k)'beta <= 0 for all k in subset and >= 0 for all k outside.
inline int lambda_subset(std::span<const int> subset, std::span<const double> delta_x, std::span<const double> beta) {
  if (subset.empty()) throw ValidationError("product subset must be nonempty");
  unsigned set = 0;
  for (int k : subset) set |= 1u << k;
  return detail::lambda_from_masks(set, detail::sign_masks(delta_x, beta)) ? 1 : 0;
}

struct CriterionOptions {
  Smoother smoother{};
  // Products whose terms enter the sum (0-based). Empty: all products.
  std::vector<int> products;
  // Unordered pairs {t < s}; both orientations enter. Empty: automatic pair policy.
  std::vector<PeriodPair> pairs;
  // Adds the product-subset restrictions (|J1| >= 2), weighted by G(min_{j in J1} gamma_j).
  bool subset_restrictions = false;
  // true: (1/N) sum_i as displayed; false: plain sum over agents (count units).
  bool average_over_agents = true;
  unsigned jobs = 1;
};

namespace detail {

// Sum of w_j over singletons {j} with lambda_j = 1: needs no negative index
// other than j and d_j <= 0.
inline std::int64_t singleton_sum(SignMasks m, const std::int64_t* wj, int n_products) {
  if (m.neg != 0) return (m.neg & (m.neg - 1)) == 0 ? wj[std::countr_zero(m.neg)] : 0;
  std::int64_t s = 0;
  for (int j = 0; j < n_products; ++j)
    if (!(m.pos >> j & 1u)) s += wj[j];
  return s;
}

struct RecordView {
  const double* x;        // per record [X_t | X_s]
  const std::int64_t* w;  // per record [fwd J | bwd J | ...], `stride` entries
  std::size_t size;
  int j, d;
  std::size_t stride;
};

using lane_d = double __attribute__((vector_size(32)));
using lane_i = std::int64_t __attribute__((vector_size(32)));
constexpr std::size_t lanes = 4;

// Singleton terms for four betas at a time. Each lane repeats the arithmetic
// of product_index (multiply, then add in covariate order), so signs agree
// bitwise with indexes computed elsewhere. J, D = 0 means a runtime value.
template <int J, int D>
[[gnu::always_inline]] inline void singleton_kernel(const RecordView& rv, const double* bt, std::size_t K,
                                                    __int128* acc) {
  const int nj = J > 0 ? J : rv.j, d = D > 0 ? D : rv.d;
  const std::size_t jd = std::size_t(nj) * d, blocks = (K + lanes - 1) / lanes;
  const std::int64_t full = (std::int64_t(1) << nj) - 1;
  for (std::size_t r = 0; r < rv.size; ++r) {
    const double* now = rv.x + r * 2 * jd;
    const double* then = now + jd;
    const std::int64_t* wr = rv.w + r * rv.stride;
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      const double* bb = bt + blk * d * lanes;
      const auto bq = [bb](int q) {
        lane_d v;
        std::memcpy(&v, bb + q * lanes, sizeof v);
        return v;
      };
      lane_i neg{}, pos{};
#pragma GCC unroll 16
      for (int p = 0; p < nj; ++p) {
        lane_d u{}, v{};
#pragma GCC unroll 16
        for (int q = 0; q < d; ++q) u += now[p * d + q] * bq(q);
#pragma GCC unroll 16
        for (int q = 0; q < d; ++q) v += then[p * d + q] * bq(q);
        const lane_d diff = u - v;
        const std::int64_t bit = std::int64_t(1) << p;
        neg |= (diff < 0.0) & bit;
        pos |= (diff > 0.0) & bit;
      }
      // Without zero indexes lambda_j = 1 exactly when j is the only negative
      // (forward) or only positive (backward) index.
      lane_i total{};
#pragma GCC unroll 16
      for (int p = 0; p < nj; ++p) {
        const std::int64_t bit = std::int64_t(1) << p;
        total += ((neg == bit) & wr[p]) + ((pos == bit) & wr[nj + p]);
      }
      const lane_i zero = (neg | pos) != full;
      const std::size_t n = std::min(lanes, K - blk * lanes);
      for (std::size_t l = 0; l < n; ++l) {
        if (zero[l]) [[unlikely]] {
          const SignMasks m{unsigned(neg[l]), unsigned(pos[l])};
          total[l] = singleton_sum(m, wr, nj) + singleton_sum(flipped(m), wr + nj, nj);
        }
        acc[blk * lanes + l] += total[l];
      }
    }
  }
}

template <int J>
[[gnu::always_inline]] inline void singleton_dispatch(const RecordView& rv, const double* bt, std::size_t K,
                                                      __int128* acc) {
  switch (rv.d) {
    case 2: return singleton_kernel<J, 2>(rv, bt, K, acc);
    case 3: return singleton_kernel<J, 3>(rv, bt, K, acc);
    case 4: return singleton_kernel<J, 4>(rv, bt, K, acc);
    default: return singleton_kernel<J, 0>(rv, bt, K, acc);
  }
}

// One clone per instruction set, picked at load time. Bitwise results do not
// depend on the clone as long as floating-point contraction is off.
__attribute__((target_clones("avx2", "default"))) inline void singleton_lanes(const RecordView& rv,
                                                                               const double* bt, std::size_t K,
                                                                               __int128* acc) {
  switch (rv.j) {
    case 2: return singleton_dispatch<2>(rv, bt, K, acc);
    case 3: return singleton_dispatch<3>(rv, bt, K, acc);
    case 4: return singleton_dispatch<4>(rv, bt, K, acc);
    default: return singleton_dispatch<0>(rv, bt, K, acc);
  }
}

// acc[k] += singleton terms at beta k over all records (betas is K x D, row-major).
inline void accumulate_singletons(const RecordView& rv, std::span<const double> betas, __int128* acc) {
  const std::size_t K = betas.size() / rv.d, blocks = (K + lanes - 1) / lanes;
  // Coordinate-major blocks of `lanes` betas, zero padded.
  std::vector<double> bt(blocks * rv.d * lanes, 0.0);
  for (std::size_t k = 0; k < K; ++k)
    for (int q = 0; q < rv.d; ++q) bt[((k / lanes) * rv.d + q) * lanes + k % lanes] = betas[k * rv.d + q];
  singleton_lanes(rv, bt.data(), K, acc);
}

// Packed (agent, pair) records with at least one nonzero weight. Per record:
// x holds [X_t | X_s] (2 x J x D) and w holds [fwd J | bwd J | fwd subsets | bwd subsets].
class RecordStore {
 public:
  RecordStore() = default;
  RecordStore(int j, int d, std::vector<unsigned> subsets)
      : j_(j), d_(d), subsets_(std::move(subsets)), jd_(std::size_t(j) * d), stride_(2 * (j + subsets_.size())) {}

  std::size_t size() const noexcept { return pair_of_.size(); }
  std::size_t n_subsets() const noexcept { return subsets_.size(); }
  const std::vector<unsigned>& subsets() const noexcept { return subsets_; }

  const double* x(std::size_t r) const { return x_.data() + r * 2 * jd_; }
  const std::int64_t* w(std::size_t r) const { return w_.data() + r * stride_; }
  std::uint32_t pair_of(std::size_t r) const { return pair_of_[r]; }

  void push(const double* now, const double* then, const std::int64_t* w, std::uint32_t pair) {
    x_.insert(x_.end(), now, now + jd_);
    x_.insert(x_.end(), then, then + jd_);
    w_.insert(w_.end(), w, w + stride_);
    pair_of_.push_back(pair);
  }
  void copy_from(const RecordStore& src, std::size_t r) { push(src.x(r), src.x(r) + jd_, src.w(r), src.pair_of(r)); }

  SignMasks masks(std::size_t r, std::span<const double> beta) const {
    const std::span<const double> now(x(r), jd_), then(x(r) + jd_, jd_);
    SignMasks m;
    for (int k = 0; k < j_; ++k) {
      // Difference of indexes rather than index of differences, matching the
      // way choice probabilities are computed from the same blocks.
      const double d = product_index(now, k, beta) - product_index(then, k, beta);
      m.neg |= unsigned(d < 0.0) << k;
      m.pos |= unsigned(d > 0.0) << k;
    }
    return m;
  }

  __int128 masked_sum(std::size_t r, SignMasks m) const {
    const std::int64_t* wr = w(r);
    __int128 acc = singletons(m, wr) + singletons(flipped(m), wr + j_);
    const std::size_t n_sub = subsets_.size();
    const std::int64_t* sf = wr + 2 * j_;
    const SignMasks mb = flipped(m);
    for (std::size_t q = 0; q < n_sub; ++q) {
      if (lambda_from_masks(subsets_[q], m)) acc += sf[q];
      if (lambda_from_masks(subsets_[q], mb)) acc += sf[n_sub + q];
    }
    return acc;
  }

  // acc[k] += sum over records of the terms at beta k (betas is K x D, row-major).
  void accumulate(std::span<const double> betas, __int128* acc) const {
    if (!subsets_.empty()) {
      const std::size_t K = betas.size() / d_;
      for (std::size_t r = 0; r < size(); ++r)
        for (std::size_t k = 0; k < K; ++k) acc[k] += masked_sum(r, masks(r, betas.subspan(k * d_, d_)));
      return;
    }
    accumulate_singletons({x_.data(), w_.data(), size(), j_, d_, stride_}, betas, acc);
  }

 private:
  std::int64_t singletons(SignMasks m, const std::int64_t* wj) const { return singleton_sum(m, wj, j_); }

  int j_ = 0, d_ = 0;
  std::vector<unsigned> subsets_;
  std::size_t jd_ = 0, stride_ = 0;
  std::vector<double> x_;
  std::vector<std::int64_t> w_;
  std::vector<std::uint32_t> pair_of_;
};

}  // namespace detail

struct CriterionTerm {
  int product;
  PeriodPair pair;
  double value;
};

class FocusedCriterion;

// Sample criterion Q(beta) = sum_j sum_{t != s} (1/N) sum_i G(gamma_jts(X_i,ts)) lambda_j(X_i,ts; beta).
//
// The weights G(gamma) are quantized once to multiples of 2^-52 and summed in
// 128-bit integers, so every evaluation is exact with respect to those weights:
// results do not depend on summation order, thread count, batching or on
// focusing (see focused()). Immutable after construction.
class CriterionEvaluator {
 public:
  static constexpr double weight_scale = 0x1.0p52;

  CriterionEvaluator(const PanelDataset& data, const GammaFunction& gamma, CriterionOptions options = {})
      : j_(data.n_products()), d_(data.n_covariates()), n_agents_(data.n_agents()), options_(std::move(options)) {
    if (j_ > 16) throw ValidationError("at most 16 products are supported by the criterion");
    if (options_.pairs.empty()) options_.pairs = select_pairs(data.n_periods(), PairPolicy{});
    for (auto& p : options_.pairs) {
      data.check_pair(p);
      if (p.t > p.s) p = p.reversed();
    }
    std::vector<char> include(j_, options_.products.empty() ? 1 : 0);
    for (int j : options_.products) {
      data.check_product(j);
      include[j] = 1;
    }
    std::vector<unsigned> subsets;
    if (options_.subset_restrictions)
      for (unsigned set = 1; set < (1u << j_); ++set)
        if (std::popcount(set) >= 2) subsets.push_back(set);
    records_ = detail::RecordStore(j_, d_, subsets);

    const std::size_t jd = std::size_t(j_) * d_, n_sub = subsets.size();
    const std::size_t n_pairs = options_.pairs.size();
    const std::size_t slots = std::size_t(n_agents_) * n_pairs;

    // Evaluate the gamma source for every (agent, pair) in parallel, then compact.
    std::vector<std::int64_t> wf(slots * j_), wb(slots * j_), sf(slots * n_sub), sb(slots * n_sub);
    parallel_for(slots, options_.jobs, [&](std::size_t slot) {
      const int i = static_cast<int>(slot / n_pairs);
      const PeriodPair fwd = options_.pairs[slot % n_pairs], bwd = fwd.reversed();
      std::vector<double> row_f(2 * jd), row_b(2 * jd), gf(j_), gb(j_);
      stack_row(data, i, fwd, row_f);
      stack_row(data, i, bwd, row_b);
      for (int j = 0; j < j_; ++j) {
        gf[j] = gamma(j, fwd, row_f);
        gb[j] = gamma(j, bwd, row_b);
        if (!(std::abs(gf[j]) <= 1.0 + 1e-9) || !(std::abs(gb[j]) <= 1.0 + 1e-9))
          throw ValidationError("gamma value outside [-1, 1] for product " + std::to_string(j));
        wf[slot * j_ + j] = include[j] ? quantize(options_.smoother(gf[j])) : 0;
        wb[slot * j_ + j] = include[j] ? quantize(options_.smoother(gb[j])) : 0;
      }
      for (std::size_t q = 0; q < n_sub; ++q) {
        double mf = INFINITY, mb = INFINITY;
        for (int j = 0; j < j_; ++j)
          if (subsets[q] >> j & 1u) {
            mf = std::min(mf, gf[j]);
            mb = std::min(mb, gb[j]);
          }
        sf[slot * n_sub + q] = quantize(options_.smoother(mf));
        sb[slot * n_sub + q] = quantize(options_.smoother(mb));
      }
    });

    std::vector<std::int64_t> packed;
    for (std::size_t slot = 0; slot < slots; ++slot) {
      bool any = false;
      for (int j = 0; j < j_ && !any; ++j) any = wf[slot * j_ + j] != 0 || wb[slot * j_ + j] != 0;
      for (std::size_t q = 0; q < n_sub && !any; ++q) any = sf[slot * n_sub + q] != 0 || sb[slot * n_sub + q] != 0;
      if (!any) continue;
      const int i = static_cast<int>(slot / n_pairs);
      const PeriodPair p = options_.pairs[slot % n_pairs];
      packed.assign(wf.begin() + slot * j_, wf.begin() + (slot + 1) * j_);
      packed.insert(packed.end(), wb.begin() + slot * j_, wb.begin() + (slot + 1) * j_);
      packed.insert(packed.end(), sf.begin() + slot * n_sub, sf.begin() + (slot + 1) * n_sub);
      packed.insert(packed.end(), sb.begin() + slot * n_sub, sb.begin() + (slot + 1) * n_sub);
      records_.push(data.block(i, p.t).data(), data.block(i, p.s).data(), packed.data(),
                    static_cast<std::uint32_t>(slot % n_pairs));
    }
  }

  int dimension() const noexcept { return d_; }
  int n_products() const noexcept { return j_; }
  int n_agents() const noexcept { return n_agents_; }
  std::size_t n_records() const noexcept { return records_.size(); }
  const CriterionOptions& options() const noexcept { return options_; }

  double operator()(std::span<const double> beta) const {
    check_beta(beta);
    __int128 acc = 0;
    records_.accumulate(beta, &acc);
    return to_value(acc);
  }
  double operator()(const UnitVector& beta) const { return (*this)(beta.span()); }

  // Values at several points in one pass over the records; identical to
  // calling operator() on each.
  void evaluate(std::span<const UnitVector> betas, std::span<double> out) const {
    evaluate_store(records_, 0, betas, out);
  }

  // Q_{j,t,s}(beta) for every included product and ordered pair.
  std::vector<CriterionTerm> terms(const UnitVector& beta) const {
    check_beta(beta.span());
    const std::size_t n_pairs = options_.pairs.size();
    std::vector<__int128> acc(2 * n_pairs * j_, 0);
    for (std::size_t r = 0; r < records_.size(); ++r) {
      const auto m = records_.masks(r, beta.span());
      const std::int64_t* w = records_.w(r);
      const std::uint32_t p = records_.pair_of(r);
      for (int j = 0; j < j_; ++j) {
        if (detail::lambda_from_masks(1u << j, m)) acc[(2 * p) * j_ + j] += w[j];
        if (detail::lambda_from_masks(1u << j, detail::flipped(m))) acc[(2 * p + 1) * j_ + j] += w[j_ + j];
      }
    }
    std::vector<CriterionTerm> out;
    for (std::size_t p = 0; p < n_pairs; ++p)
      for (int orient = 0; orient < 2; ++orient)
        for (int j = 0; j < j_; ++j) {
          const PeriodPair pair = orient == 0 ? options_.pairs[p] : options_.pairs[p].reversed();
          out.push_back({j, pair, to_value(acc[(2 * p + orient) * j_ + j])});
        }
    return out;
  }

  // Number of individual (agent, product or subset, ordered pair) terms with
  // G(gamma) * lambda > 0.
  std::size_t violations(const UnitVector& beta) const {
    check_beta(beta.span());
    std::size_t count = 0;
    const auto& subsets = records_.subsets();
    const std::size_t n_sub = subsets.size();
    for (std::size_t r = 0; r < records_.size(); ++r) {
      const auto m = records_.masks(r, beta.span()), mb = detail::flipped(m);
      const std::int64_t* w = records_.w(r);
      for (int j = 0; j < j_; ++j) {
        count += detail::lambda_from_masks(1u << j, m) && w[j] > 0;
        count += detail::lambda_from_masks(1u << j, mb) && w[j_ + j] > 0;
      }
      for (std::size_t q = 0; q < n_sub; ++q) {
        count += detail::lambda_from_masks(subsets[q], m) && w[2 * j_ + q] > 0;
        count += detail::lambda_from_masks(subsets[q], mb) && w[2 * j_ + n_sub + q] > 0;
      }
    }
    return count;
  }

  // Restriction to the geodesic ball of `radius` around `center`: records whose
  // sign pattern cannot change inside the ball are folded into a constant. For
  // every beta in the ball the focused criterion returns exactly operator()(beta).
  FocusedCriterion focused(const UnitVector& center, double radius) const;

 private:
  friend class FocusedCriterion;

  static std::int64_t quantize(double w) {
    if (!(w >= 0.0) || w > 1.0 + 1e-9) throw ValidationError("smoothed weight outside [0, 1]");
    return std::llround(std::min(w, 1.0) * weight_scale);
  }

  double to_value(__int128 acc) const {
    const double total = static_cast<double>(acc) / weight_scale;
    return options_.average_over_agents ? total / n_agents_ : total;
  }

  void check_beta(std::span<const double> beta) const {
    if (static_cast<int>(beta.size()) != d_)
      throw ValidationError("beta has dimension " + std::to_string(beta.size()) + ", expected " + std::to_string(d_));
  }

  void evaluate_store(const detail::RecordStore& store, __int128 offset, std::span<const UnitVector> betas,
                      std::span<double> out) const {
    if (out.size() != betas.size()) throw ValidationError("output size does not match the number of points");
    std::vector<double> flat;
    flat.reserve(betas.size() * d_);
    for (const auto& b : betas) {
      check_beta(b.span());
      flat.insert(flat.end(), b.span().begin(), b.span().end());
    }
    std::vector<__int128> acc(betas.size(), offset);
    store.accumulate(flat, acc.data());
    for (std::size_t k = 0; k < betas.size(); ++k) out[k] = to_value(acc[k]);
  }

  int j_, d_, n_agents_;
  CriterionOptions options_;
  detail::RecordStore records_;
};

class FocusedCriterion {
 public:
  FocusedCriterion(const CriterionEvaluator& parent, const UnitVector& center, double radius) : parent_(&parent) {
    parent.check_beta(center.span());
    const double r = std::min(pi, radius * (1.0 + 1e-9) + 1e-9);
    const double chord = 2.0 * std::sin(0.5 * r);
    const int J = parent.j_, D = parent.d_;
    const std::size_t jd = std::size_t(J) * D;
    const auto beta = center.span();
    const auto& all = parent.records_;
    active_ = detail::RecordStore(J, D, all.subsets());
    for (std::size_t rec = 0; rec < all.size(); ++rec) {
      const double* now = all.x(rec);
      const double* then = now + jd;
      bool stable = true;
      for (int k = 0; k < J && stable; ++k) {
        double diff2 = 0.0, mag = 0.0;
        for (int q = 0; q < D; ++q) {
          const double a = now[k * D + q], b = then[k * D + q];
          diff2 += (a - b) * (a - b);
          mag += std::abs(a) + std::abs(b);
        }
        const double d = product_index({now, jd}, k, beta) - product_index({then, jd}, k, beta);
        // |d(beta) - d(center)| <= |dX_k| * |beta - center|, plus rounding slack.
        stable = std::abs(d) > std::sqrt(diff2) * chord + 1e-12 * (mag + 1.0);
      }
      if (stable)
        offset_ += all.masked_sum(rec, all.masks(rec, beta));
      else
        active_.copy_from(all, rec);
    }
  }

  int dimension() const noexcept { return parent_->dimension(); }
  std::size_t n_active() const noexcept { return active_.size(); }

  double operator()(std::span<const double> beta) const {
    parent_->check_beta(beta);
    __int128 acc = offset_;
    active_.accumulate(beta, &acc);
    return parent_->to_value(acc);
  }
  double operator()(const UnitVector& beta) const { return (*this)(beta.span()); }

  void evaluate(std::span<const UnitVector> betas, std::span<double> out) const {
    parent_->evaluate_store(active_, offset_, betas, out);
  }

 private:
  const CriterionEvaluator* parent_;
  detail::RecordStore active_;
  __int128 offset_ = 0;
};

inline FocusedCriterion CriterionEvaluator::focused(const UnitVector& center, double radius) const {
  return FocusedCriterion(*this, center, radius);
}

}  // namespace pmc
