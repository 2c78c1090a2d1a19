#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "saddle_scope/noise_models.hpp"
#include "saddle_scope/root_finding.hpp"
#include "saddle_scope/sgd_sim.hpp"
#include "saddle_scope/stability.hpp"

namespace saddle {

enum class AxisScale { linear, log };

struct Axis {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  std::size_t n = 2;
  AxisScale scale = AxisScale::linear;

  /// Coordinate of index i; the ratio i/(n-1) is formed first so that an
  /// n-point and a (2n-1)-point axis share coordinates bit for bit.
  double value(std::size_t i) const;
  void validate() const;
};

/// Parses "name:min:max:n" or "name:min:max:n:log".
Axis parse_axis(std::string_view text);

enum class Classifier { analytic, empirical };

struct GridSpec {
  Axis x;
  Axis y;
  std::map<std::string, double> fixed_params;
  Classifier classifier = Classifier::analytic;
  Seed seed = 0;

  void validate() const;
};

/// What a grid point evaluates: the learning rate and the xy values a batch is
/// drawn from. `chi` overrides the batch law when the caller already has it.
struct CellProblem {
  double lr = 0.0;
  std::vector<double> products;
  std::size_t batch_size = 1;
  std::optional<ScalarNoiseDistribution> chi;
};

using CellFactory = std::function<CellProblem(double x, double y)>;

struct CellRates {
  double r_m = 0.0;
  double r_h = 0.0;
  double q_m = 0.0;
};

class PhaseGrid {
 public:
  PhaseGrid() = default;
  explicit PhaseGrid(GridSpec spec);

  const GridSpec& spec() const noexcept { return spec_; }
  std::size_t nx() const noexcept { return spec_.x.n; }
  std::size_t ny() const noexcept { return spec_.y.n; }

  Phase label(std::size_t ix, std::size_t iy) const { return labels_[iy * nx() + ix]; }
  const CellRates& rates(std::size_t ix, std::size_t iy) const { return rates_[iy * nx() + ix]; }
  void set(std::size_t ix, std::size_t iy, Phase p, CellRates r);

  /// Fraction of cells carrying label p.
  double fraction(Phase p) const;
  /// Number of connected regions carrying label p; `diagonal` adds the four
  /// corner neighbours (8-connectivity).
  std::size_t regions(Phase p, bool diagonal = false) const;

 private:
  GridSpec spec_;
  std::vector<Phase> labels_;
  std::vector<CellRates> rates_;
};

/// Law of chi for one cell: chi if given, otherwise exact enumeration when the
/// multiset count allows it and Monte Carlo (1e5 draws, seeded) past the cap.
ScalarNoiseDistribution cell_distribution(const CellProblem& cell, Seed seed);

/// Labels every cell with classify_phase. A cell whose factory throws is
/// labeled Phase::Error with NaN rates.
PhaseGrid sweep_analytic(const GridSpec& spec, const CellFactory& factory, unsigned threads = 1);

/// Majority label of run_uv_model over n_seeds runs; seed s of cell (row, col)
/// is mix64(spec.seed, row, col, s). Ties go to the lower label. Stored rates
/// are the seed-averaged empirical log growth per step and time-averaged q_m.
PhaseGrid sweep_empirical(const GridSpec& spec, const CellFactory& factory, std::size_t n_seeds,
                          const UvConfig& base = {}, unsigned threads = 1);

enum class BoundaryCondition { m, h, l2 };

/// Sign changes in lr of r_m (m), r_h (h) or q_m - 1 (l2) on [lo, hi].
std::vector<double> find_boundary(BoundaryCondition cond, const ScalarNoiseDistribution& chi,
                                  double lo, double hi, const RootOptions& opt = {});

// ---------------------------------------------------------------------------
// Datasets bound to grid axes

/// Two-point law {1, a}. Axis names: "lr", "a"; fixed params may set "lr", "a",
/// "S" (batch size).
CellFactory two_point_factory(const GridSpec& spec);

/// Gaussian label dataset. Axis names: "lr", "mu", "S"; the dataset draws are
/// fixed and only the labels move with mu.
CellFactory gaussian_factory(const GridSpec& spec, const GaussianLabelDataset& data);

/// Fixed list of xy values (e.g. loaded from a dataset file). Axis names: "lr", "S".
CellFactory products_factory(const GridSpec& spec, std::vector<double> products);

struct FiniteSizeFamily {
  std::vector<std::size_t> sizes;
  std::vector<PhaseGrid> grids;
  std::vector<double> phase2_fraction;
};

inline const std::vector<std::size_t> kDefaultFiniteSizes = {3, 4, 8, 10, 24, 100};

/// One analytic grid per N over GaussianLabelDataset::generate(N, mu,
/// noise_std, base_seed). The datasets are nested: size N is the first N
/// points of the same stream. noise_std is fixed_params["noise_std"]
/// (default 2).
FiniteSizeFamily finite_size_family(const std::vector<std::size_t>& sizes, double mu,
                                    Seed base_seed, const GridSpec& spec, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Serialization

std::string phase_grid_csv(const PhaseGrid& grid);
std::string phase_grid_json(const PhaseGrid& grid);
PhaseGrid parse_phase_grid_json(const std::string& text);

}  // namespace saddle
