#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace specdraft {

/// One calibration observation: cumulative meta-path entropy x (nats) and its
/// confidence-rank label y.
struct CalibrationSample {
  double x = 0.0;
  double y = 0.0;
};

/// Split loss. kNormalizedVariance divides each side's squared deviations by
/// that side's size; kSumOfSquares is the classic unnormalized CART criterion.
enum class SplitCriterion { kNormalizedVariance, kSumOfSquares };

std::string to_string(SplitCriterion c);
SplitCriterion parse_split_criterion(const std::string& text);

struct SplitResult {
  double threshold = 0.0;  ///< x < threshold goes left
  double loss = 0.0;
  /// The parent already had zero label variance, so no split can help.
  bool no_benefit = false;
};

/// Best threshold over midpoints of consecutive distinct x values; near-equal
/// losses (within 1e-12 relative) go to the smaller threshold. Returns nullopt
/// when fewer than two distinct x values exist.
std::optional<SplitResult> best_split(std::span<const CalibrationSample> samples,
                                      SplitCriterion criterion = SplitCriterion::kNormalizedVariance);

/// Loss contributed by one leaf under a criterion (two-pass mean).
double leaf_loss(std::span<const CalibrationSample> samples, SplitCriterion criterion);

/// One entropy interval [lower, upper).
struct EntropyBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_label = 0.0;
  std::size_t count = 0;
};

/// Provenance stored with a trained binning model.
struct BinningMetadata {
  std::size_t entropy_k = 0;
  int base_depth = 0;
  std::string filter;
  std::string label;
  std::string corpus_hash;
};

/// Ordered, contiguous entropy intervals covering [0, inf) produced by a shallow
/// regression tree over calibration samples.
class BinningModel {
 public:
  /// Validates that the bins are non-empty, start at 0, are contiguous and
  /// strictly increasing, and end at +inf. Throws ConfigError otherwise.
  BinningModel(std::vector<EntropyBin> bins, SplitCriterion criterion, double training_loss,
               BinningMetadata metadata = {});

  std::size_t bin_count() const noexcept { return bins_.size(); }
  const std::vector<EntropyBin>& bins() const noexcept { return bins_; }
  /// Interior boundaries, ascending (bin_count() - 1 of them).
  std::vector<double> thresholds() const;
  SplitCriterion criterion() const noexcept { return criterion_; }
  double training_loss() const noexcept { return training_loss_; }
  const BinningMetadata& metadata() const noexcept { return metadata_; }
  BinningMetadata& metadata() noexcept { return metadata_; }
  std::size_t sample_count() const noexcept;

  /// Index of the bin containing x; a value equal to a threshold belongs to the right-hand bin.
  std::size_t assign_bin(double x) const noexcept;

  /// Bins lying below the third-lowest threshold: {0, 1, 2} for a full model,
  /// fewer when early stopping left less than four bins. Never the unbounded last bin.
  std::vector<std::size_t> low_bins() const;

 private:
  std::vector<EntropyBin> bins_;
  SplitCriterion criterion_;
  double training_loss_;
  BinningMetadata metadata_;
};

/// Greedy recursive CART to `depth` levels (up to 2^depth bins). A node stops
/// early when it holds fewer than two distinct x or zero label variance.
/// Throws ConfigError on an empty sample set or negative x.
BinningModel train_cart(std::span<const CalibrationSample> samples, int depth = 3,
                        SplitCriterion criterion = SplitCriterion::kNormalizedVariance);

/// Versioned text format; doubles are written with 17 significant digits.
void write_bins(const BinningModel& model, std::ostream& out);
BinningModel read_bins(std::istream& in);
void save_bins(const BinningModel& model, const std::string& path);
BinningModel load_bins(const std::string& path);

}  // namespace specdraft
