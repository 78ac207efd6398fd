#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "specdraft/binning.hpp"
#include "specdraft/metrics.hpp"

namespace specdraft {

/// Which iterations contribute calibration samples.
enum class CalibrationFilter {
  kFullyAccepted,  ///< accepted length equals the base depth
  kAnyAccepted,    ///< accepted length >= 1
  kAll,
};

/// Which rank becomes the label y.
enum class CalibrationLabel {
  kTcr,           ///< terminal confidence rank of the iteration
  kMetaPathRank,  ///< rank of the meta-path leaf within T2
};

std::string to_string(CalibrationFilter f);
CalibrationFilter parse_calibration_filter(const std::string& text);
std::string to_string(CalibrationLabel l);
CalibrationLabel parse_calibration_label(const std::string& text);

/// One sample per record passing the filter. Throws CalibrationError with the
/// record and acceptance counts when nothing passes.
std::vector<CalibrationSample> collect_calibration(std::span<const IterationRecord> records, int base_depth,
                                                   CalibrationFilter filter = CalibrationFilter::kFullyAccepted,
                                                   CalibrationLabel label = CalibrationLabel::kTcr);

/// "#schema=specdraft.calibration/1" followed by x,y rows.
void write_calibration_csv(std::span<const CalibrationSample> samples, std::ostream& out);

}  // namespace specdraft
