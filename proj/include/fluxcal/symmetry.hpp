#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fluxcal/image.hpp"

namespace fxc {

/// Binary similarity matrix of image bias slices.  values(i, j) = 1 marks
/// index pairs considered recurrent; 45-degree lines in it correspond to
/// translations between the two source images.
struct RecurrencePlot {
    Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic> values;
    double epsilon = 0.0;

    int size() const { return static_cast<int>(values.rows()); }
};

/// Correlation of an image with its reflection about every bias index.
struct CorrelationProfile {
    Eigen::VectorXd rho;
    Eigen::Array<bool, Eigen::Dynamic, 1> valid;
};

/// Correlation of an image with its point-reflected copy about every pixel.
struct CorrelationMap {
    Eigen::MatrixXd rho;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> valid;
};

/// Sub-pixel symmetry-center candidate, in pixel coordinates of the source
/// map (p1 along axis1, p2 along axis2).
struct Blob {
    double p1 = 0.0, p2 = 0.0;
    double score = 0.0;
};

/// Affine map from bias-axis coordinates to reduced flux, fitted so that
/// detected symmetry centers land on a rectangular lattice with the given
/// spacings.
struct SymmetryLattice {
    Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
    Eigen::Vector2d t = Eigen::Vector2d::Zero();
    std::vector<Eigen::Vector2d> centers;
    std::vector<Eigen::Vector2i> assignments;
    std::vector<bool> inlier;
    double rms_residual = 0.0;
    int inlier_count = 0;

    Eigen::Vector2d apply(const Eigen::Vector2d& c) const { return a * c + t; }
};

/// Divides each fixed-frequency slice by its componentwise complex median
/// over the bias dimension, flattening the frequency-dependent background.
/// Requires at least 3 bias rows.
TransmissionImage background_filter(const TransmissionImage& img);

/// 1-D median smoothing along the frequency (second) axis, independently for
/// each bias row.  Window must be odd and no longer than the axis; shrinks
/// symmetrically at the borders.  Output is magnitude-valued.
TransmissionImage median_smooth(const TransmissionImage& img, int window);

double otsu_threshold(const Eigen::MatrixXd& values, int bins = 256);

/// Recurrence plot of two images sharing the same second-axis grid.
/// With an explicit epsilon the raw bias-slice distance matrix is
/// thresholded directly (distance <= epsilon).  With epsilon unset, the
/// distance matrix is passed through horizontal and vertical Sobel filters
/// (absolute value after each) and thresholded by Otsu, which is the
/// automated pipeline used for period extraction.
RecurrencePlot recurrence_plot(const TransmissionImage& a, const TransmissionImage& b,
                               std::optional<double> epsilon = std::nullopt);

struct LineHit {
    int intercept = 0;  // in pixels; b in the line j = i + b
    int votes = 0;
    double density = 0.0;  // votes / diagonal length
};

/// 45-degree Hough line detection on a recurrence plot, restricted to
/// intercepts in [d_min, d_max].  Returns hits ranked by votes.  Throws a
/// detection error when no line reaches the density floor.
std::vector<LineHit> detect_lines(const RecurrencePlot& plot, int d_min, int d_max,
                                  double density_floor = 0.25);

/// rho(j): Pearson-style correlation between the image and its reflection
/// about bias index j, over the overlap region.  Overlaps under 2 rows are
/// masked invalid.
CorrelationProfile reflection_correlation(const TransmissionImage& img);
CorrelationProfile reflection_correlation(const Eigen::MatrixXd& mag);

/// rho(j1, j2) for point reflection about every pixel, with an optional
/// border margin masked invalid (the correlation is unreliable near edges).
CorrelationMap point_reflection_correlation(const TransmissionImage& img, int margin1 = 0,
                                            int margin2 = 0);
CorrelationMap point_reflection_correlation(const Eigen::MatrixXd& mag, int margin1 = 0,
                                            int margin2 = 0);

/// Least-squares Lorentzian fit around a local maximum; returns the fitted
/// center in (fractional) pixel units.  Falls back to the quadratic vertex
/// when the fit diverges (reported through fell_back).
double refine_peak_lorentzian(const Eigen::VectorXd& profile, int peak_index, int window = 7,
                              bool* fell_back = nullptr);

struct BlobOptions {
    double rel_floor = 0.05;     // determinant-of-Hessian floor, relative to the strongest blob
    double score_floor = 0.15;   // minimum rho at the blob
    bool require_lattice = false;
};

/// Determinant-of-Hessian blob detection at a single scale tied to the
/// expected center spacing, filtered to candidates near a local maximum of
/// rho and refined to sub-pixel by a 2-D quadratic fit.
std::vector<Blob> detect_symmetry_centers(const CorrelationMap& map, double spacing1_px,
                                          double spacing2_px, const BlobOptions& opts = {});

struct LatticeFitOptions {
    Eigen::Vector2d spacing{0.5, 0.5};           // lattice pitch in flux units
    std::optional<Eigen::Matrix2d> prior_a;      // approximate bias->flux map
    std::optional<Eigen::Vector2d> prior_t;
    double outlier_threshold = 0.3;              // in units of the spacing
    int max_iterations = 24;
};

/// Fits the 6-parameter affine map sending centers onto the rectangular
/// lattice n .* spacing.  Integer assignments start from a seed (prior map
/// when given, otherwise a basis built from nearest-neighbor differences)
/// and are jointly refined with the fit; centers that do not land near a
/// lattice node are dropped as outliers.
SymmetryLattice fit_affine_lattice(const std::vector<Eigen::Vector2d>& centers,
                                   const LatticeFitOptions& opts = {});

struct Shift2D {
    double d1 = 0.0, d2 = 0.0;
    double confidence = 0.0;
};

struct RegisterOptions {
    Eigen::Vector2d search_center{0.0, 0.0};
    Eigen::Vector2d search_radius{-1.0, -1.0};  // negative: unrestricted
    int upsample = 8;
    double min_confidence = 0.02;
};

/// Sub-pixel rigid translation between two same-sized images via
/// frequency-domain phase correlation with locally upsampled refinement.
/// Sign convention: B is approximately A shifted by +d (B(i) = A(i - d)).
Shift2D register_translation(const TransmissionImage& a, const TransmissionImage& b,
                             const RegisterOptions& opts = {});
Shift2D register_translation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const RegisterOptions& opts = {});

struct PeriodOffsetOptions {
    int min_period_px = 8;
    int median_window = 5;
    int lorentzian_window = 7;
    double rho_floor = 0.4;
    double line_density_floor = 0.25;
    // A mirror center counts as integer flux when the dip there reaches below
    // background - dip_fraction * (background - image minimum).
    double dip_fraction = 0.5;
    bool classify_by_dip_frequency = true;
};

struct PeriodOffsetResult {
    double period_px = 0.0;
    double period_axis = 0.0;
    double zero_px = 0.0;
    double zero_axis = 0.0;
    std::vector<double> mirror_centers_px;
    std::vector<bool> center_is_integer;
};

/// Extracts the bias period and the zero-flux bias coordinate of a
/// resonator spectrum image (bias x frequency).  The period comes from
/// 45-degree lines in the self-recurrence plot refined by the ladder of
/// mirror-symmetry centers; integer/half-integer centers are disambiguated
/// by the presence of a transmission dip.
PeriodOffsetResult period_and_offset(const TransmissionImage& img,
                                     const PeriodOffsetOptions& opts = {});

}  // namespace fxc
