#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace snspd {

constexpr double kPlanck = 6.62607015e-34;     // J s
constexpr double kLightSpeed = 299792458.0;    // m/s

enum class Polarization { vertical, horizontal };
enum class EventKind { signal, dark };

struct SnspdParams {
  double c_e = 500.0;        // electron specific heat, J K^-1 m^-3
  double c_p = 1000.0;       // phonon specific heat, J K^-1 m^-3
  double tau_ep = 40e-9;     // electron-phonon interaction time, s
  double tau_es = 80e-9;     // phonon escape time, s
  double t0 = 0.1;           // substrate temperature, K
  double t_c = 3.7;          // critical temperature, K
  double gamma = 0.8;        // film absorption fraction
  double d = 5e-9;           // film thickness, m
  double tau_pulse = 16e-9;  // absorbed-power pulse time constant, s
  double m_shape = 1.0;
  double n_shape = 1.0;
  double i_bias = 0.07e-3;   // bias current, A
  double z0 = 50.0;          // load resistance, ohm
  double spot_area = 7.0e-15;  // effective absorption area, m^2

  void validate() const;
};

struct ThermalState {
  double t;    // s, relative to photon absorption
  double t_e;  // electron temperature, K
  double t_p;  // phonon temperature, K
};

struct PhotonEvent {
  double arrival = 0.0;      // s
  double wavelength = 1535e-9;  // m; 0 is the degenerate zero-energy test hook
  Polarization polarization = Polarization::vertical;
  EventKind kind = EventKind::signal;
};

struct VoltageTrace {
  double dt;       // s
  double t_start;  // s
  std::vector<double> samples;  // V
};

// E = h c / lambda.
double photon_energy(const PhotonEvent& event);
double photon_energy_from_wavelength(double wavelength);

// Volumetric power absorbed by the film at time t_rel after absorption:
// gamma * E_f * m^3 / (2 d tau) * xi^2 * exp(-n xi), xi = t_rel / tau,
// E_f = energy / spot_area.
double absorbed_power(double t_rel, double energy, const SnspdParams& params);

// One RK4 step of the coupled electron/phonon temperature system
//   C_e dT_e/dt = -(C_e/tau_ep)(T_e - T_p) + P(t)
//   C_p dT_p/dt = +(C_e/tau_ep)(T_e - T_p) - (C_p/tau_es)(T_p - T_0)
// with the drive re-evaluated at the substage times t, t+dt/2, t+dt.
template <class PowerFn>
ThermalState thermal_step(const ThermalState& s, double dt, PowerFn&& power,
                          const SnspdParams& p) {
  if (!(dt > 0.0)) throw std::invalid_argument("thermal_step: dt must be > 0");
  auto deriv = [&p](double te, double tp, double pw, double& de, double& dp) {
    double ex = (te - tp) / p.tau_ep;
    de = -ex + pw / p.c_e;
    dp = (p.c_e / p.c_p) * ex - (tp - p.t0) / p.tau_es;
  };
  double p0 = power(s.t);
  double pm = power(s.t + 0.5 * dt);
  double p1 = power(s.t + dt);
  double k1e, k1p, k2e, k2p, k3e, k3p, k4e, k4p;
  deriv(s.t_e, s.t_p, p0, k1e, k1p);
  deriv(s.t_e + 0.5 * dt * k1e, s.t_p + 0.5 * dt * k1p, pm, k2e, k2p);
  deriv(s.t_e + 0.5 * dt * k2e, s.t_p + 0.5 * dt * k2p, pm, k3e, k3p);
  deriv(s.t_e + dt * k3e, s.t_p + dt * k3p, p1, k4e, k4p);
  return ThermalState{s.t + dt,
                      s.t_e + dt / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e),
                      s.t_p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)};
}

// Constant-power convenience overload (fixed-point and relaxation tests).
ThermalState thermal_step(const ThermalState& s, double dt, double power,
                          const SnspdParams& p);

struct HotspotResult {
  std::vector<ThermalState> states;
  bool truncated;  // final T_e more than 1% (of t0) away from t0
};

HotspotResult simulate_hotspot(const PhotonEvent& event, const SnspdParams& params,
                               double dt, double duration);

// v = (i_c(0) - i_c(0) (1 - (T/T_c)^2)^2) z0 with T clamped to T_c.
double voltage_response(double t_e, const SnspdParams& params);

struct PulseResult {
  VoltageTrace trace;
  bool truncated;
};

PulseResult simulate_pulse(const PhotonEvent& event, const SnspdParams& params,
                           double dt, double duration);

}  // namespace snspd
