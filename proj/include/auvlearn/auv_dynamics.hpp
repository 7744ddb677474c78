#pragma once

// Horizontal-plane (surge, sway, yaw) vehicle model used as ground truth:
//
//   M nu_dot = tau(n) - C(nu) nu - D_l nu - D_q |nu| o nu,   psi_dot = r
//   tau(n)   = B (k_t o n |n|)
//
// with depth and pitch assumed stabilized, so restoring forces vanish.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace auvlearn {

enum class ConfigLabel : int { default_config = 1, thruster_damage = 2, damping_change = 3 };

std::string to_string(ConfigLabel label);

struct VehicleConfig {
  Eigen::Matrix3d mass;            // rigid body + added mass
  Eigen::Vector3d damping_linear;  // diagonal of D_l
  Eigen::Vector3d damping_quad;    // diagonal of D_q
  Eigen::Vector3d thrust_gain;     // N / (rev/s)^2 per thruster
  Eigen::Matrix3d allocation;      // column i: body wrench of thruster i per newton
  ConfigLabel label = ConfigLabel::default_config;

  /// Throws std::invalid_argument if M is not SPD, damping is negative or the
  /// allocation is singular.
  void validate() const;
};

/// ~70 kg hovering vehicle: surge thruster plus a fore/aft lateral pair.
VehicleConfig default_vehicle();

/// default_vehicle() with the changes of one configuration applied:
/// thruster_damage scales thruster 1's gain by 0.4, damping_change scales both
/// damping matrices by 1.6.
VehicleConfig make_configuration(ConfigLabel label);

struct SimState {
  Eigen::Vector3d nu = Eigen::Vector3d::Zero();  // u, v, r
  double psi = 0.0;
  double t = 0.0;
};

struct StateDerivative {
  Eigen::Vector3d nu_dot;
  double psi_dot;
};

Eigen::Matrix3d coriolis(const Eigen::Matrix3d& mass, const Eigen::Vector3d& nu);

Eigen::Vector3d thrust_wrench(const Eigen::Vector3d& thruster_speeds, const VehicleConfig& cfg);

StateDerivative derivative(const SimState& state, const Eigen::Vector3d& thruster_speeds,
                           const VehicleConfig& cfg);

class SimulationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One classical RK4 step with thruster speeds held constant.
SimState integrate_step(const SimState& state, const Eigen::Vector3d& thruster_speeds,
                        const VehicleConfig& cfg, double dt);

/// Per-thruster sine excitation whose period is redrawn from U[20, 70] s each
/// time a cycle completes. Schedules are precomputed up to `horizon`.
class ExcitationPlan {
 public:
  ExcitationPlan(std::uint64_t seed, double horizon, std::array<double, 3> amplitudes,
                 std::array<double, 3> phases);

  static ExcitationPlan with_defaults(std::uint64_t seed, double horizon, double amplitude = 15.0);

  double value(std::size_t thruster, double t) const;
  Eigen::Vector3d speeds(double t) const;

  // Realized periods of one thruster, in order.
  const std::vector<double>& periods(std::size_t thruster) const { return periods_[thruster]; }
  double horizon() const { return horizon_; }
  std::uint64_t seed() const { return seed_; }

  static constexpr double kMinPeriod = 20.0;
  static constexpr double kMaxPeriod = 70.0;

 private:
  std::uint64_t seed_;
  double horizon_;
  std::array<double, 3> amplitude_;
  std::array<double, 3> phase_;
  std::array<std::vector<double>, 3> periods_;
  std::array<std::vector<double>, 3> starts_;
};

double excitation(const ExcitationPlan& plan, std::size_t thruster_index, double t);

/// One sampled row: state, thruster speeds and the resulting accelerations.
struct DatasetRow {
  double t = 0.0;
  std::array<double, 3> nu{};
  std::array<double, 3> n{};
  std::array<double, 3> accel{};
  int config = 1;

  std::vector<double> features() const { return {nu[0], nu[1], nu[2], n[0], n[1], n[2]}; }
};

using Dataset = std::vector<DatasetRow>;

struct NoiseSpec {
  // Standard deviation per acceleration channel. When `relative`, each value
  // is a fraction of that channel's noise-free standard deviation.
  std::array<double, 3> std_dev{0.02, 0.02, 0.02};
  bool relative = true;
};

struct SimulationSegment {
  VehicleConfig config;
  double duration = 0.0;
};

/// Integrates the segments back to back at `dt` and samples at `sample_rate`.
/// Accelerations are the exact model derivative plus Gaussian noise.
Dataset generate_dataset(const std::vector<SimulationSegment>& segments, const ExcitationPlan& plan,
                         double sample_rate, const NoiseSpec& noise, std::uint64_t seed,
                         double dt = 0.01);

/// Three equal segments, one per configuration, with the default excitation.
Dataset generate_default_dataset(std::uint64_t seed, double segment_duration = 10000.0,
                                 double sample_rate = 1.0, double noise_fraction = 0.02,
                                 double amplitude = 15.0, double dt = 0.01);

// Dataset file: header `t,u,v,r,n1,n2,n3,du,dv,dr,config`, shortest round-trip
// decimal for every value.
inline constexpr std::array<const char*, 11> kDatasetColumns{"t",  "u",  "v",  "r",  "n1",    "n2",
                                                             "n3", "du", "dv", "dr", "config"};

void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::string& path);

}  // namespace auvlearn
