#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "raforge/errors.hpp"
#include "raforge/rb_grid.hpp"
#include "raforge/rng.hpp"

namespace raforge {

using Cvec = Eigen::VectorXcd;

// Default physical parameters. Power is a fixed per-user uplink budget;
// noise density is -174 dBm/Hz thermal plus a 7 dB noise figure.
inline constexpr double kDefaultTxPowerW = 0.1;
inline constexpr double kDefaultTxTimeS = 4.848e-3;
inline constexpr double kPacketBits = 12000.0;
inline constexpr int kMaxQueuePackets = 50;
inline constexpr double kMinDistanceM = 10.0;
inline constexpr double kMaxDistanceM = 100.0;

inline double default_noise_density_w_per_hz() {
  return std::pow(10.0, (-174.0 + 7.0) / 10.0 - 3.0);
}

/// Queue backlog sentinel: +inf makes min{rate, Q/T} return the rate exactly.
inline constexpr double kInfiniteQueueBits = std::numeric_limits<double>::infinity();

enum class QueueModel { Finite, Infinite };

struct UserState {
  int index = 0;
  double distance_m = 0.0;
  double tx_power_w = kDefaultTxPowerW;
  double queue_bits = 0.0;       // kInfiniteQueueBits for the unbounded model
  double min_rate_bps = 0.0;
  std::array<Cvec, kNumBasicRbs> ru_channels;  // one N-dim vector per 26-tone RB
};

struct InstanceConfig {
  int users = 0;
  int antennas = 4;
  std::uint64_t seed = 0;
  QueueModel queue_model = QueueModel::Finite;
  double min_rate_bps = 0.0;
};

/// One generated problem instance. Immutable once built.
struct NetworkInstance {
  std::vector<UserState> users;
  int antennas = 4;
  double noise_density_w_per_hz = 0.0;
  double tx_time_s = kDefaultTxTimeS;
  RbGrid grid;
  std::uint64_t seed = 0;

  int user_count() const { return static_cast<int>(users.size()); }

  double noise_variance(RbId rb) const {
    return noise_density_w_per_hz * grid.bandwidth(rb);
  }
};

/// Log-distance path loss with a 10 m breakpoint: 46.7 dB at 1 m (5 GHz),
/// 20 dB/decade to the breakpoint, 35 dB/decade beyond. Returns linear gain.
inline double path_loss(double distance_m) {
  if (distance_m <= 0.0) throw std::invalid_argument("path_loss: distance must be > 0");
  const double near = std::min(distance_m, 10.0);
  const double far = std::max(distance_m, 10.0);
  const double pl_db = 46.7 + 20.0 * std::log10(near) + 35.0 * std::log10(far / 10.0);
  return std::pow(10.0, -pl_db / 10.0);
}

/// Draw order is fixed per user: distance, then the 9 RU channels
/// (antenna-major), then the queue draw. The queue uniform is consumed under
/// both queue models so finite/infinite instances share channels for a seed.
inline NetworkInstance generate_instance(const InstanceConfig& config, Rng& rng) {
  if (config.users < 0) throw ConfigError("generate_instance: negative user count");
  if (config.antennas < 1) throw ConfigError("generate_instance: antennas must be >= 1");

  NetworkInstance instance;
  instance.antennas = config.antennas;
  instance.noise_density_w_per_hz = default_noise_density_w_per_hz();
  instance.tx_time_s = kDefaultTxTimeS;
  instance.seed = config.seed;

  instance.users.reserve(static_cast<std::size_t>(config.users));
  for (int k = 0; k < config.users; ++k) {
    UserState user;
    user.index = k;
    user.distance_m = rng.uniform(kMinDistanceM, kMaxDistanceM);
    user.tx_power_w = kDefaultTxPowerW;
    user.min_rate_bps = config.min_rate_bps;

    const double amplitude = std::sqrt(path_loss(user.distance_m));
    for (int ru = 0; ru < kNumBasicRbs; ++ru) {
      Cvec h(config.antennas);
      for (int a = 0; a < config.antennas; ++a) h(a) = amplitude * rng.complex_normal();
      user.ru_channels[static_cast<std::size_t>(ru)] = std::move(h);
    }

    const double packets = static_cast<double>(rng.uniform_int(kMaxQueuePackets + 1));
    user.queue_bits = config.queue_model == QueueModel::Finite
                          ? packets * kPacketBits
                          : kInfiniteQueueBits;
    instance.users.push_back(std::move(user));
  }
  return instance;
}

inline NetworkInstance generate_instance(const InstanceConfig& config) {
  Rng rng(config.seed);
  return generate_instance(config, rng);
}

/// Channel seen on any RB: the stored vector at level 0, the arithmetic mean
/// of the constituent 26-tone channels above.
inline Cvec rb_channel(const UserState& user, RbId rb, const RbGrid& grid) {
  const auto& info = grid.info(rb);
  if (rb.level == 0) return user.ru_channels[static_cast<std::size_t>(rb.index)];
  Cvec sum = Cvec::Zero(user.ru_channels[0].size());
  for (int ru : info.basic_rus) sum += user.ru_channels[static_cast<std::size_t>(ru)];
  return sum / static_cast<double>(info.basic_rus.size());
}

// --- JSON serialization ----------------------------------------------------
// Self-describing document in SI units; channels as interleaved re/im arrays.

inline nlohmann::json to_json(const NetworkInstance& instance) {
  nlohmann::json doc;
  doc["format"] = "ra-forge-instance";
  doc["version"] = 1;
  doc["seed"] = instance.seed;
  doc["antennas"] = instance.antennas;
  doc["noise_density_w_per_hz"] = instance.noise_density_w_per_hz;
  doc["tx_time_s"] = instance.tx_time_s;
  doc["users"] = nlohmann::json::array();
  for (const auto& user : instance.users) {
    nlohmann::json u;
    u["index"] = user.index;
    u["distance_m"] = user.distance_m;
    u["tx_power_w"] = user.tx_power_w;
    if (std::isinf(user.queue_bits)) {
      u["queue_bits"] = "inf";
    } else {
      u["queue_bits"] = user.queue_bits;
    }
    u["min_rate_bps"] = user.min_rate_bps;
    u["ru_channels"] = nlohmann::json::array();
    for (const auto& h : user.ru_channels) {
      nlohmann::json arr = nlohmann::json::array();
      for (Eigen::Index a = 0; a < h.size(); ++a) {
        arr.push_back(h(a).real());
        arr.push_back(h(a).imag());
      }
      u["ru_channels"].push_back(std::move(arr));
    }
    doc["users"].push_back(std::move(u));
  }
  return doc;
}

inline NetworkInstance instance_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "ra-forge-instance")
    throw ConfigError("instance_from_json: not an instance document");
  NetworkInstance instance;
  instance.seed = doc.at("seed").get<std::uint64_t>();
  instance.antennas = doc.at("antennas").get<int>();
  instance.noise_density_w_per_hz = doc.at("noise_density_w_per_hz").get<double>();
  instance.tx_time_s = doc.at("tx_time_s").get<double>();
  for (const auto& u : doc.at("users")) {
    UserState user;
    user.index = u.at("index").get<int>();
    user.distance_m = u.at("distance_m").get<double>();
    user.tx_power_w = u.at("tx_power_w").get<double>();
    const auto& q = u.at("queue_bits");
    user.queue_bits = q.is_string() ? kInfiniteQueueBits : q.get<double>();
    user.min_rate_bps = u.at("min_rate_bps").get<double>();
    const auto& channels = u.at("ru_channels");
    if (channels.size() != kNumBasicRbs)
      throw ConfigError("instance_from_json: expected 9 RU channels per user");
    for (std::size_t ru = 0; ru < kNumBasicRbs; ++ru) {
      const auto& arr = channels[ru];
      Cvec h(static_cast<Eigen::Index>(arr.size() / 2));
      for (Eigen::Index a = 0; a < h.size(); ++a) {
        h(a) = {arr[static_cast<std::size_t>(2 * a)].get<double>(),
                arr[static_cast<std::size_t>(2 * a + 1)].get<double>()};
      }
      user.ru_channels[ru] = std::move(h);
    }
    instance.users.push_back(std::move(user));
  }
  return instance;
}

/// FNV-1a over the serialized document; used to assert that solvers at one
/// grid point consumed the identical instance.
inline std::uint64_t instance_hash(const NetworkInstance& instance) {
  return fnv1a(to_json(instance).dump());
}

}  // namespace raforge
