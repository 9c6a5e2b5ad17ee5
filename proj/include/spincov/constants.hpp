#pragma once

namespace spincov::constants {

inline constexpr double kPi = 3.14159265358979323846;

/// Bohr magneton over the Planck constant, in Hz per milligauss.
inline constexpr double kMuBOverH_Hz_per_mG = 1399.624493;

/// Lande factor for the f = 1 ground manifold of 87Rb, nuclear corrections
/// dropped. Overridable through the field configuration.
inline constexpr double kDefaultGF = -0.5;

/// Signed gyromagnetic ratio gamma = g_F * mu_B / hbar in rad s^-1 mG^-1.
inline constexpr double gyromagnetic_ratio(double g_f) {
  return g_f * 2.0 * kPi * kMuBOverH_Hz_per_mG;
}

inline constexpr double kDefaultGamma_rad_per_s_mG = gyromagnetic_ratio(kDefaultGF);

}  // namespace spincov::constants
