#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "certsal/certificates.hpp"

namespace certsal {

// Binary PGM (P5, 8-bit). Values are clamped to [0,1] and scaled to 0..255.
void write_pgm(const std::string& path, int rows, int cols, std::span<const double> values);

// Extra per-input fields around a CertificateReport for the JSON report.
struct ReportContext {
  long input_id = 0;
  std::string transform;
  std::optional<double> tau;
  std::optional<double> gamma;
  int class_index = 0;
  std::optional<long> median_rank_bound;
  bool median_rank_bound_applicable = false;
  std::vector<std::optional<long>> certified_ranks;  // per index; nullopt = uncertified
};

// Serializes one per-input certificate report; validates against
// schemas/certificate_report.schema.json (schema_version 1).
std::string report_to_json(const CertificateReport& report, const ReportContext& context);

}  // namespace certsal
