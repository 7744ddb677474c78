#include "auvlearn/auv_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace auvlearn {

std::string to_string(ConfigLabel label) {
  switch (label) {
    case ConfigLabel::default_config: return "default";
    case ConfigLabel::thruster_damage: return "thruster_damage";
    case ConfigLabel::damping_change: return "damping_change";
  }
  return "unknown";
}

void VehicleConfig::validate() const {
  if (!mass.isApprox(mass.transpose(), 1e-12))
    throw std::invalid_argument("VehicleConfig: mass matrix not symmetric");
  Eigen::LLT<Eigen::Matrix3d> llt(mass);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("VehicleConfig: mass matrix not positive definite");
  if ((damping_linear.array() < 0.0).any() || (damping_quad.array() < 0.0).any())
    throw std::invalid_argument("VehicleConfig: negative damping");
  if (Eigen::FullPivLU<Eigen::Matrix3d>(allocation).rank() < 3)
    throw std::invalid_argument("VehicleConfig: thrust allocation is rank deficient");
}

VehicleConfig default_vehicle() {
  VehicleConfig cfg;
  cfg.mass = Eigen::Vector3d(90.0, 120.0, 20.0).asDiagonal();
  cfg.damping_linear = {20.0, 40.0, 8.0};
  cfg.damping_quad = {35.0, 60.0, 12.0};
  cfg.thrust_gain = Eigen::Vector3d::Constant(0.05);
  // Thrusters 1 and 2: lateral pair 0.5 m fore and aft. Thruster 3: surge.
  cfg.allocation << 0.0, 0.0, 1.0,
                    1.0, 1.0, 0.0,
                    0.5, -0.5, 0.0;
  cfg.label = ConfigLabel::default_config;
  return cfg;
}

VehicleConfig make_configuration(ConfigLabel label) {
  VehicleConfig cfg = default_vehicle();
  cfg.label = label;
  switch (label) {
    case ConfigLabel::default_config: break;
    case ConfigLabel::thruster_damage: cfg.thrust_gain[0] *= 0.4; break;
    case ConfigLabel::damping_change:
      cfg.damping_linear *= 1.6;
      cfg.damping_quad *= 1.6;
      break;
  }
  return cfg;
}

Eigen::Matrix3d coriolis(const Eigen::Matrix3d& m, const Eigen::Vector3d& nu) {
  const double a = m(1, 0) * nu[0] + m(1, 1) * nu[1] + m(1, 2) * nu[2];
  const double b = m(0, 0) * nu[0] + m(0, 1) * nu[1] + m(0, 2) * nu[2];
  Eigen::Matrix3d c;
  c << 0.0, 0.0, -a,
       0.0, 0.0, b,
       a, -b, 0.0;
  return c;
}

Eigen::Vector3d thrust_wrench(const Eigen::Vector3d& n, const VehicleConfig& cfg) {
  const Eigen::Vector3d force = cfg.thrust_gain.cwiseProduct(n.cwiseProduct(n.cwiseAbs()));
  return cfg.allocation * force;
}

StateDerivative derivative(const SimState& state, const Eigen::Vector3d& n, const VehicleConfig& cfg) {
  const Eigen::Vector3d& nu = state.nu;
  const Eigen::Vector3d damping =
      cfg.damping_linear.cwiseProduct(nu) + cfg.damping_quad.cwiseProduct(nu.cwiseAbs().cwiseProduct(nu));
  const Eigen::Vector3d rhs = thrust_wrench(n, cfg) - coriolis(cfg.mass, nu) * nu - damping;
  return {cfg.mass.llt().solve(rhs), nu[2]};
}

SimState integrate_step(const SimState& s, const Eigen::Vector3d& n, const VehicleConfig& cfg, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_step: dt must be positive");
  auto shifted = [&](const StateDerivative& d, double h) {
    SimState x = s;
    x.nu += h * d.nu_dot;
    x.psi += h * d.psi_dot;
    x.t += h;
    return x;
  };
  const StateDerivative k1 = derivative(s, n, cfg);
  const StateDerivative k2 = derivative(shifted(k1, dt / 2), n, cfg);
  const StateDerivative k3 = derivative(shifted(k2, dt / 2), n, cfg);
  const StateDerivative k4 = derivative(shifted(k3, dt), n, cfg);
  SimState next = s;
  next.nu += dt / 6.0 * (k1.nu_dot + 2.0 * k2.nu_dot + 2.0 * k3.nu_dot + k4.nu_dot);
  next.psi += dt / 6.0 * (k1.psi_dot + 2.0 * k2.psi_dot + 2.0 * k3.psi_dot + k4.psi_dot);
  next.t = s.t + dt;
  if (!next.nu.allFinite() || !std::isfinite(next.psi)) {
    std::ostringstream msg;
    msg << "integrate_step: non-finite state at t=" << next.t << " (from nu=[" << s.nu.transpose()
        << "], psi=" << s.psi << ", n=[" << n.transpose() << "], config=" << to_string(cfg.label) << ")";
    throw SimulationDiverged(msg.str());
  }
  return next;
}

// ---- excitation ------------------------------------------------------------

ExcitationPlan::ExcitationPlan(std::uint64_t seed, double horizon, std::array<double, 3> amplitudes,
                               std::array<double, 3> phases)
    : seed_(seed), horizon_(horizon), amplitude_(amplitudes), phase_(phases) {
  if (!(horizon > 0.0)) throw std::invalid_argument("ExcitationPlan: horizon must be positive");
  for (std::size_t i = 0; i < 3; ++i) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> period(kMinPeriod, kMaxPeriod);
    double start = 0.0;
    while (start <= horizon) {
      const double p = period(rng);
      starts_[i].push_back(start);
      periods_[i].push_back(p);
      start += p;
    }
  }
}

ExcitationPlan ExcitationPlan::with_defaults(std::uint64_t seed, double horizon, double amplitude) {
  constexpr double third = 2.0 * std::numbers::pi / 3.0;
  return {seed, horizon, {amplitude, amplitude, amplitude}, {0.0, third, 2.0 * third}};
}

double ExcitationPlan::value(std::size_t thruster, double t) const {
  if (thruster >= 3) throw std::out_of_range("ExcitationPlan: thruster index out of range");
  if (t < 0.0 || t > horizon_) throw std::out_of_range("ExcitationPlan: time outside the planned horizon");
  const auto& starts = starts_[thruster];
  const auto it = std::upper_bound(starts.begin(), starts.end(), t);
  const auto k = static_cast<std::size_t>(std::distance(starts.begin(), it)) - 1;
  const double local = t - starts[k];
  return amplitude_[thruster] * std::sin(2.0 * std::numbers::pi * local / periods_[thruster][k] + phase_[thruster]);
}

Eigen::Vector3d ExcitationPlan::speeds(double t) const { return {value(0, t), value(1, t), value(2, t)}; }

double excitation(const ExcitationPlan& plan, std::size_t thruster_index, double t) {
  return plan.value(thruster_index, t);
}

// ---- dataset generation ----------------------------------------------------

Dataset generate_dataset(const std::vector<SimulationSegment>& segments, const ExcitationPlan& plan,
                         double sample_rate, const NoiseSpec& noise, std::uint64_t seed, double dt) {
  if (!(sample_rate > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("generate_dataset: sample rate and dt must be positive");
  const double ratio = 1.0 / (sample_rate * dt);
  const auto substeps = static_cast<std::size_t>(std::llround(ratio));
  if (substeps == 0 || std::abs(ratio - static_cast<double>(substeps)) > 1e-9 * ratio)
    throw std::invalid_argument("generate_dataset: sample rate must divide the integration rate");

  Dataset rows;
  SimState state;
  std::size_t tick = 0;  // integration steps since t = 0
  std::size_t sample_index = 0;
  for (const auto& seg : segments) {
    seg.config.validate();
    if (!(seg.duration > 0.0)) throw std::invalid_argument("generate_dataset: segment duration must be positive");
    const auto count = static_cast<std::size_t>(std::llround(seg.duration * sample_rate));
    for (std::size_t r = 0; r < count; ++r) {
      state.t = static_cast<double>(sample_index++) / sample_rate;
      const Eigen::Vector3d n = plan.speeds(state.t);
      const StateDerivative d = derivative(state, n, seg.config);
      DatasetRow row;
      row.t = state.t;
      row.config = static_cast<int>(seg.config.label);
      for (int c = 0; c < 3; ++c) {
        row.nu[c] = state.nu[c];
        row.n[c] = n[c];
        row.accel[c] = d.nu_dot[c];
      }
      rows.push_back(row);
      for (std::size_t s = 0; s < substeps; ++s) {
        const double t = static_cast<double>(tick) * dt;
        state.t = t;
        try {
          state = integrate_step(state, plan.speeds(t), seg.config, dt);
        } catch (const SimulationDiverged& e) {
          throw SimulationDiverged(std::string("generate_dataset: simulator diverged: ") + e.what());
        }
        ++tick;
      }
    }
  }

  std::array<double, 3> sigma = noise.std_dev;
  if (noise.relative && !rows.empty()) {
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (const auto& r : rows) mean += r.accel[c];
      mean /= static_cast<double>(rows.size());
      double var = 0.0;
      for (const auto& r : rows) var += (r.accel[c] - mean) * (r.accel[c] - mean);
      var /= static_cast<double>(std::max<std::size_t>(rows.size() - 1, 1));
      sigma[c] = noise.std_dev[c] * std::sqrt(var);
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& r : rows)
    for (int c = 0; c < 3; ++c)
      if (sigma[c] > 0.0) r.accel[c] += sigma[c] * gauss(rng);
  return rows;
}

Dataset generate_default_dataset(std::uint64_t seed, double segment_duration, double sample_rate,
                                 double noise_fraction, double amplitude, double dt) {
  std::vector<SimulationSegment> segments;
  for (ConfigLabel label :
       {ConfigLabel::default_config, ConfigLabel::thruster_damage, ConfigLabel::damping_change})
    segments.push_back({make_configuration(label), segment_duration});
  const ExcitationPlan plan = ExcitationPlan::with_defaults(seed, 3.0 * segment_duration + 1.0, amplitude);
  NoiseSpec noise;
  noise.std_dev = {noise_fraction, noise_fraction, noise_fraction};
  noise.relative = true;
  return generate_dataset(segments, plan, sample_rate, noise, seed + 1, dt);
}

}  // namespace auvlearn
