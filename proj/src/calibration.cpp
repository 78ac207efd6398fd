#include "specdraft/calibration.hpp"

#include <cstdio>
#include <ostream>

#include "specdraft/errors.hpp"

namespace specdraft {

std::string to_string(CalibrationFilter f) {
  switch (f) {
    case CalibrationFilter::kFullyAccepted: return "fully-accepted";
    case CalibrationFilter::kAnyAccepted: return "any-accepted";
    case CalibrationFilter::kAll: return "all";
  }
  return "?";
}

CalibrationFilter parse_calibration_filter(const std::string& text) {
  if (text == "fully-accepted") return CalibrationFilter::kFullyAccepted;
  if (text == "any-accepted") return CalibrationFilter::kAnyAccepted;
  if (text == "all") return CalibrationFilter::kAll;
  throw ConfigError("unknown calibration filter '" + text + "'");
}

std::string to_string(CalibrationLabel l) { return l == CalibrationLabel::kTcr ? "tcr" : "meta-path-rank"; }

CalibrationLabel parse_calibration_label(const std::string& text) {
  if (text == "tcr") return CalibrationLabel::kTcr;
  if (text == "meta-path-rank") return CalibrationLabel::kMetaPathRank;
  throw ConfigError("unknown calibration label '" + text + "'");
}

std::vector<CalibrationSample> collect_calibration(std::span<const IterationRecord> records, int base_depth,
                                                   CalibrationFilter filter, CalibrationLabel label) {
  std::vector<CalibrationSample> samples;
  std::size_t accepting = 0;
  std::size_t full = 0;
  for (const auto& r : records) {
    if (r.accepted_len > 0) ++accepting;
    if (r.accepted_len == static_cast<std::size_t>(base_depth)) ++full;
    bool keep = true;
    if (filter == CalibrationFilter::kFullyAccepted) keep = r.accepted_len == static_cast<std::size_t>(base_depth);
    if (filter == CalibrationFilter::kAnyAccepted) keep = r.accepted_len > 0;
    if (!keep) continue;
    const auto y = label == CalibrationLabel::kTcr ? r.tcr : r.meta_path_rank;
    samples.push_back({r.entropy, static_cast<double>(y)});
  }
  if (samples.empty()) {
    throw CalibrationError("no calibration samples after filter '" + to_string(filter) + "': records=" +
                           std::to_string(records.size()) + " accepting=" + std::to_string(accepting) +
                           " fully_accepted=" + std::to_string(full));
  }
  return samples;
}

void write_calibration_csv(std::span<const CalibrationSample> samples, std::ostream& out) {
  out << "#schema=specdraft.calibration/1\nentropy,label\n";
  char buf[64];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", s.x, s.y);
    out << buf;
  }
}

}  // namespace specdraft
