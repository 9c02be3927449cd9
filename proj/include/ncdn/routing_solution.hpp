#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ncdn/types.hpp"

namespace ncdn {

// Per-commodity link fractions. Row s * P + t of `frac` holds the fraction of
// commodity (s -> t) carried by each link. A commodity is "defined" once a
// routing has been installed for it; the diagonal is always undefined.
class RoutingSolution {
 public:
  RoutingSolution() = default;
  RoutingSolution(int num_pops, int num_links)
      : num_pops_(num_pops),
        num_links_(num_links),
        frac_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_pops) * num_pops, num_links)),
        defined_(static_cast<std::size_t>(num_pops) * num_pops, false) {}

  int num_pops() const { return num_pops_; }
  int num_links() const { return num_links_; }

  Eigen::Index commodity(PopId s, PopId t) const {
    return static_cast<Eigen::Index>(s) * num_pops_ + t;
  }

  bool defined(PopId s, PopId t) const { return defined_[commodity(s, t)]; }

  auto fractions(PopId s, PopId t) const { return frac_.row(commodity(s, t)); }

  double fraction(PopId s, PopId t, LinkId l) const { return frac_(commodity(s, t), l); }

  template <typename Derived>
  void set(PopId s, PopId t, const Eigen::MatrixBase<Derived>& fractions) {
    frac_.row(commodity(s, t)) = fractions;
    defined_[commodity(s, t)] = true;
  }

  void set(PopId s, PopId t, LinkId l, double value) {
    frac_(commodity(s, t), l) = value;
    defined_[commodity(s, t)] = true;
  }

  // Links carrying a positive share of (s -> t).
  std::vector<std::pair<LinkId, double>> flow_links(PopId s, PopId t) const {
    std::vector<std::pair<LinkId, double>> out;
    const auto row = fractions(s, t);
    for (Eigen::Index l = 0; l < row.size(); ++l) {
      if (row(l) > 0.0) out.emplace_back(static_cast<LinkId>(l), row(l));
    }
    return out;
  }

  const Eigen::MatrixXd& matrix() const { return frac_; }

 private:
  int num_pops_ = 0;
  int num_links_ = 0;
  Eigen::MatrixXd frac_;
  std::vector<bool> defined_;
};

}  // namespace ncdn
