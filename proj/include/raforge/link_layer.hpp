#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "raforge/channel_model.hpp"
#include "raforge/rb_grid.hpp"

namespace raforge {

/// Users transmitting together on one RB.
struct CoScheduledSet {
  RbId rb;
  std::vector<int> users;  // ascending

  bool contains(int user) const {
    return std::find(users.begin(), users.end(), user) != users.end();
  }
};

namespace detail {

inline void check_member(const CoScheduledSet& coset, int target) {
  if (!coset.contains(target))
    throw std::invalid_argument("user " + std::to_string(target) +
                                " is not co-scheduled on " + coset.rb.to_string());
}

inline const UserState& user_at(const NetworkInstance& instance, int k) {
  if (k < 0 || k >= instance.user_count())
    throw std::invalid_argument("unknown user index " + std::to_string(k));
  return instance.users[static_cast<std::size_t>(k)];
}

}  // namespace detail

/// MMSE receive filter w = (sum_m P_m h_m h_m^H + sigma^2 I)^-1 h_target,
/// unit-normalized. Reduces to MRC for a singleton coset; sigma^2 > 0 keeps
/// the matrix invertible.
inline Cvec receive_beamformer(const CoScheduledSet& coset, int target,
                               const NetworkInstance& instance) {
  detail::check_member(coset, target);
  const int n = instance.antennas;
  const double sigma2 = instance.noise_variance(coset.rb);

  Eigen::MatrixXcd a = sigma2 * Eigen::MatrixXcd::Identity(n, n);
  for (int m : coset.users) {
    const auto& user = detail::user_at(instance, m);
    const Cvec h = rb_channel(user, coset.rb, instance.grid);
    if (h.size() != n) throw std::runtime_error("channel dimension mismatch");
    a.noalias() += user.tx_power_w * h * h.adjoint();
  }
  const Cvec h_target =
      rb_channel(detail::user_at(instance, target), coset.rb, instance.grid);
  Cvec w = a.llt().solve(h_target);
  const double norm = w.norm();
  if (norm > 0.0) w /= norm;
  return w;
}

/// SINR for a caller-supplied beamformer. Interference sums over the
/// co-scheduled set only: users absent from the RB do not transmit on it.
inline double sinr_with_beamformer(const Cvec& w, const CoScheduledSet& coset,
                                   int target, const NetworkInstance& instance) {
  detail::check_member(coset, target);
  const double sigma2 = instance.noise_variance(coset.rb);
  double signal = 0.0;
  double interference = 0.0;
  for (int m : coset.users) {
    const auto& user = detail::user_at(instance, m);
    const Cvec h = rb_channel(user, coset.rb, instance.grid);
    const double coupling = std::norm(w.dot(h));  // |w^H h|^2
    if (m == target) {
      signal = user.tx_power_w * coupling;
    } else {
      interference += user.tx_power_w * coupling;
    }
  }
  return signal / (interference + sigma2);
}

inline double sinr(int target, const CoScheduledSet& coset,
                   const NetworkInstance& instance) {
  const Cvec w = receive_beamformer(coset, target, instance);
  return sinr_with_beamformer(w, coset, target, instance);
}

/// Shannon rate B * log2(1 + SINR) in bits/s.
inline double rb_rate(int target, const CoScheduledSet& coset,
                      const NetworkInstance& instance) {
  const double gamma = sinr(target, coset, instance);
  return instance.grid.bandwidth(coset.rb) * std::log2(1.0 + gamma);
}

}  // namespace raforge
