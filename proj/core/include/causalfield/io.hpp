#pragma once

#include <string>

#include "causalfield/geometry.hpp"
#include "causalfield/grid.hpp"

namespace causalfield {

/// Files are one line of JSON header followed by little-endian payload bytes.
/// Perturbations: one float64 block per tensor component (upper triangle, then q).
/// Regions: bit-packed mask, least significant bit first. Fields: one float64 block.
void save_perturbation(const KineticPerturbation& p, const std::string& path);
KineticPerturbation load_perturbation(const std::string& path);

void save_region(const Region& r, const std::string& path);
Region load_region(const std::string& path);

void save_field(const LatticeField& f, const std::string& path);
LatticeField load_field(const std::string& path);

}  // namespace causalfield
