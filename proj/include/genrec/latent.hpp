#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "genrec/tensor.hpp"

namespace genrec {

/// k × T matrix whose column t is the latent code of frame t.
using LatentMatrix = Tensor;

/// Codes expressed as mean + Σ_j α_jt u_j.
struct LatentBasis {
  std::vector<double> mean;                      ///< length k; zero for a pure rank-r projection
  std::vector<std::vector<double>> directions;   ///< d orthonormal vectors of length k
  std::vector<std::vector<double>> coefficients; ///< d rows of length T
  std::size_t frames = 0;

  std::size_t dimension() const noexcept { return directions.size(); }
  std::vector<double> code(std::size_t t) const;
  LatentMatrix reconstruct() const;
  /// True when the coefficients along the first direction are monotone in t.
  bool order_preserved() const;
};

struct Projection {
  LatentMatrix codes;
  LatentBasis basis;
};

/// Best Frobenius rank-r approximation via truncated SVD.
Projection project_rank(LatentMatrix const &z, std::size_t r);

/// Replaces each column by the column mean plus its deviation projected onto the top-d
/// principal directions of the centred matrix. d = 1 puts every code on a line.
Projection project_affine(LatentMatrix const &z, std::size_t d);

/// Rank-d_global projection of the whole matrix followed by affine(d_per_group) within each
/// contiguous group. `group_starts` lists the first column of every group, beginning with 0.
LatentMatrix project_affine_grouped(LatentMatrix const &z, std::span<std::size_t const> group_starts,
                                    std::size_t d_global, std::size_t d_per_group);

enum class InterpolationMode { strict, lenient };

struct Interpolated {
  std::vector<double> code;
  bool extrapolated = false;
};

/// (1 - s)·z_a + s·z_b. Strict mode rejects s outside [0, 1]; lenient mode flags it.
Interpolated interpolate(std::span<double const> z_a, std::span<double const> z_b, double s,
                         InterpolationMode mode = InterpolationMode::strict);

/// Largest distance from any column to the line mean + span(first direction) of its affine fit.
double max_line_distance(LatentMatrix const &z);

/// CSV export: one row "mean,..." then "direction_j,..." rows then "coefficient_j,..." rows.
void write_basis_csv(std::ostream &os, LatentBasis const &basis);
LatentBasis read_basis_csv(std::istream &is);

} // namespace genrec
