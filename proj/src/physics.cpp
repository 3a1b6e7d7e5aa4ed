#include "snspd/physics.hpp"

#include <cmath>

namespace snspd {

void SnspdParams::validate() const {
  auto pos = [](double v, const char* name) {
    if (!(v > 0.0))
      throw std::invalid_argument(std::string("SnspdParams: ") + name +
                                  " must be > 0");
  };
  pos(c_e, "c_e");
  pos(c_p, "c_p");
  pos(tau_ep, "tau_ep");
  pos(tau_es, "tau_es");
  pos(t_c, "t_c");
  pos(d, "d");
  pos(tau_pulse, "tau_pulse");
  pos(i_bias, "i_bias");
  pos(z0, "z0");
  pos(spot_area, "spot_area");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("SnspdParams: gamma must be in (0, 1]");
  if (!(t0 >= 0.0 && t0 < t_c))
    throw std::invalid_argument("SnspdParams: need 0 <= t0 < t_c");
}

double photon_energy_from_wavelength(double wavelength) {
  if (!(wavelength > 0.0))
    throw std::invalid_argument("photon_energy: wavelength must be > 0");
  return kPlanck * kLightSpeed / wavelength;
}

double photon_energy(const PhotonEvent& event) {
  return photon_energy_from_wavelength(event.wavelength);
}

double absorbed_power(double t_rel, double energy, const SnspdParams& p) {
  if (t_rel < 0.0)
    throw std::invalid_argument("absorbed_power: t_rel must be >= 0");
  double xi = t_rel / p.tau_pulse;
  double ef = energy / p.spot_area;
  double m3 = p.m_shape * p.m_shape * p.m_shape;
  return p.gamma * ef * m3 / (2.0 * p.d * p.tau_pulse) * xi * xi *
         std::exp(-p.n_shape * xi);
}

ThermalState thermal_step(const ThermalState& s, double dt, double power,
                          const SnspdParams& p) {
  return thermal_step(s, dt, [power](double) { return power; }, p);
}

HotspotResult simulate_hotspot(const PhotonEvent& event, const SnspdParams& params,
                               double dt, double duration) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_hotspot: dt must be > 0");
  if (!(duration >= dt))
    throw std::invalid_argument("simulate_hotspot: duration must be >= dt");
  double energy = event.wavelength == 0.0 ? 0.0 : photon_energy(event);
  auto power = [energy, &params](double t) {
    return energy == 0.0 ? 0.0 : absorbed_power(t, energy, params);
  };
  auto n = static_cast<size_t>(std::llround(duration / dt));
  HotspotResult out;
  out.states.reserve(n + 1);
  out.states.push_back(ThermalState{0.0, params.t0, params.t0});
  for (size_t k = 0; k < n; ++k)
    out.states.push_back(thermal_step(out.states.back(), dt, power, params));
  out.truncated =
      std::abs(out.states.back().t_e - params.t0) > 0.01 * params.t0;
  return out;
}

double voltage_response(double t_e, const SnspdParams& p) {
  if (t_e < 0.0)
    throw std::invalid_argument("voltage_response: t_e must be >= 0");
  double t = t_e < p.t_c ? t_e : p.t_c;
  double x = (t / p.t_c) * (t / p.t_c);
  double suppressed = 1.0 - x;
  return (p.i_bias - p.i_bias * suppressed * suppressed) * p.z0;
}

PulseResult simulate_pulse(const PhotonEvent& event, const SnspdParams& params,
                           double dt, double duration) {
  auto hs = simulate_hotspot(event, params, dt, duration);
  VoltageTrace trace;
  trace.dt = dt;
  trace.t_start = 0.0;
  trace.samples.reserve(hs.states.size());
  for (const auto& s : hs.states)
    trace.samples.push_back(voltage_response(s.t_e, params));
  return PulseResult{std::move(trace), hs.truncated};
}

}  // namespace snspd
