// constants.hpp — atomic-unit conversion factors used across the package
//
// Everything internal is in atomic units (hbar = m_e = e = 1, k_B = 1).
// These factors convert *into* atomic units: multiply a quantity given in the
// named unit by the factor to obtain its value in a.u.

#pragma once

namespace qdyn::constants {

// mass: 1 u (unified atomic mass unit) in electron masses
inline constexpr double mass_u = 1822.888486;

// time: 1 ps / 1 fs in atomic time units
inline constexpr double time_ps = 41341.37;
inline constexpr double time_fs = 41.34137;

// length: 1 angstrom in bohr
inline constexpr double length_angstrom = 1.8897261254578281;

// dipole: 1 debye in e*bohr
inline constexpr double dipole_debye = 1.0 / 2.5417464519610984;

}  // namespace qdyn::constants
