#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mrcd/image.hpp"
#include "mrcd/operators.hpp"
#include "mrcd/unmix.hpp"

namespace mrcd {

enum class ChangeRule { zero_abundance, same_abundance, block_abundance };

ChangeRule parse_change_rule(const std::string& name);
std::string change_rule_name(ChangeRule rule);

/// A set of HR pixels plus the abundance rewrite applied inside it.
struct ChangeRegion {
  std::vector<std::size_t> pixels;
  ChangeRule rule = ChangeRule::zero_abundance;
};

/// The designed changes of one simulation: regions are applied in list order
/// (later rules overwrite earlier ones on overlap), randomness drawn from the
/// seed.
struct ChangeSpec {
  std::vector<ChangeRegion> regions;
  std::uint64_t seed = 0;
};

/// Which acquisition date feeds which degradation.
enum class TemporalConfig { config1 = 1, config2 = 2 };

struct SimulatedPair {
  ImageCube y_hr;
  ImageCube y_lr;
  ChangeMask d_hr;
  ChangeMask d_lr;
  ImageCube x_t1;
  ImageCube x_t2;
  TemporalConfig config = TemporalConfig::config1;
};

/// Applies one change rule to the abundance matrix (k x pixels, row-major)
/// inside `region`; returns the rewritten matrix. The endmember matrix is
/// unchanged by all three rules. Outputs keep nonnegativity and sum-to-one.
///
/// zero_abundance: zero the endmember with the largest total abundance in the
/// region and rescale each affected column; columns where that endmember held
/// everything are redistributed uniformly over the remaining endmembers.
/// same_abundance: copy the abundance vector of one seeded random pixel
/// (anywhere in the image) to every region pixel.
/// block_abundance: copy the columns of a seeded random same-shape region
/// that lies fully in bounds.
std::vector<double> apply_change_rule(const std::vector<double>& abundances, std::size_t k,
                                      std::size_t rows, std::size_t cols,
                                      const std::vector<std::size_t>& region, ChangeRule rule,
                                      std::uint64_t seed);

/// Union of the regions as a binary mask.
ChangeMask build_mask(const std::vector<ChangeRegion>& regions, std::size_t rows,
                      std::size_t cols);

/// LR pixel = OR over its d_r x d_c HR block (block footprint aligned with
/// the decimation phase).
ChangeMask degrade_mask(const ChangeMask& d_hr, const SpatialDegradation& spatial);

/// Axis-aligned random rectangles with side lengths in [min_side, max_side],
/// placed uniformly in bounds.
std::vector<std::size_t> random_rectangle_region(std::size_t rows, std::size_t cols,
                                                 std::size_t min_side, std::size_t max_side,
                                                 std::uint64_t seed);

/// The full protocol on a reference cube: unmix, rewrite abundances inside
/// the change regions, rebuild both latent images, then emit the observed
/// pair under the requested temporal configuration with ground-truth masks.
/// k == 0 selects the endmember count automatically.
SimulatedPair simulate_pair(const ImageCube& x_ref, const ChangeSpec& spec,
                            const DegradationModel& model, TemporalConfig config,
                            const NoiseModel& noise, std::size_t k = 0);

/// Same protocol starting from an existing unmixing of the reference.
SimulatedPair simulate_pair_from_unmix(const UnmixResult& um, std::size_t rows, std::size_t cols,
                                       const ChangeSpec& spec, const DegradationModel& model,
                                       TemporalConfig config, const NoiseModel& noise);

/// Seeded synthetic reference cube built from k smooth abundance blobs over
/// random positive endmember spectra; a stand-in when no real cube is at hand.
ImageCube make_synthetic_reference(std::size_t bands, std::size_t rows, std::size_t cols,
                                   std::size_t k, std::uint64_t seed);

}  // namespace mrcd
