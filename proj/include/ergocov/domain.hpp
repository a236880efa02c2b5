#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>

namespace ergocov {

using Vec = Eigen::VectorXd;
/// Point sets are stored column-wise: one column per point.
using Points = Eigen::MatrixXd;

/// Weighted target samples in physical units (meters by convention).
class DomainSamples {
 public:
  /// Weights default to uniform 1/M and are normalized to sum to one.
  /// Throws DegenerateDomain if fewer than two points are given and
  /// InvalidArgument for non-finite coordinates or negative weights.
  explicit DomainSamples(Points points, std::optional<Vec> weights = std::nullopt);

  const Points& points() const { return points_; }
  const Vec& weights() const { return weights_; }
  Eigen::Index dim() const { return points_.rows(); }
  Eigen::Index size() const { return points_.cols(); }
  bool uniform_weights() const { return uniform_; }

 private:
  Points points_;
  Vec weights_;
  bool uniform_ = true;
};

/// Largest per-axis span of the sample bounding box.
double compute_extent(const DomainSamples& samples);

/// Rounds to a 2^-34 grid. Normalized quantities are snapped so that problems
/// differing only by a physical scale factor normalize to identical bits.
double snap_coordinate(double x);
/// Rounds to 33 significant bits; for normalized scalars such as speeds.
double snap_relative(double x);

/// Physical <-> dimensionless coordinates: normalized = (p - offset) / extent.
/// The stored normalized samples are additionally snapped with
/// snap_coordinate. The extent is fixed from the target samples
/// and never recomputed.
class NormalizedDomain {
 public:
  explicit NormalizedDomain(DomainSamples samples);

  /// Identity transform (extent 1, zero offset) over the given samples. Used
  /// by the unnormalized baseline objective.
  static NormalizedDomain identity(DomainSamples samples);

  double extent() const { return extent_; }
  const Vec& offset() const { return offset_; }
  const DomainSamples& source() const { return source_; }
  const Points& normalized_points() const { return normalized_; }
  Eigen::Index dim() const { return source_.dim(); }

  Vec normalize(const Eigen::Ref<const Vec>& point) const;
  Vec denormalize(const Eigen::Ref<const Vec>& point) const;
  Points normalize_points(const Points& points) const;
  Points denormalize_points(const Points& points) const;

 private:
  NormalizedDomain(DomainSamples samples, double extent, Vec offset);

  DomainSamples source_;
  double extent_;
  Vec offset_;
  Points normalized_;
};

enum class SampleFormat { csv, obj, ply };

std::optional<SampleFormat> format_from_path(const std::filesystem::path& path);
std::string to_string(SampleFormat format);

/// CSV rows are `x,y[,z][,weight]`; `#` starts a comment line. OBJ and ASCII
/// PLY contribute vertex positions only. `dim` disambiguates a 3-column CSV
/// (x,y,weight versus x,y,z); without it three columns are read as x,y,z.
DomainSamples load_samples(const std::filesystem::path& path, SampleFormat format,
                           std::optional<int> dim = std::nullopt);
DomainSamples load_samples(const std::filesystem::path& path);

DomainSamples parse_csv_samples(const std::string& text, const std::string& source_name = "<csv>",
                                std::optional<int> dim = std::nullopt);
DomainSamples parse_obj_samples(const std::string& text, const std::string& source_name = "<obj>");
DomainSamples parse_ply_samples(const std::string& text, const std::string& source_name = "<ply>");

}  // namespace ergocov
