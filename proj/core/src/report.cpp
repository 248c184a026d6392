#include "certsal/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace certsal {

void write_pgm(const std::string& path, int rows, int cols, std::span<const double> values) {
  if (static_cast<long>(values.size()) != static_cast<long>(rows) * cols) {
    throw std::invalid_argument("write_pgm: geometry does not match value count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P5\n" << cols << " " << rows << "\n255\n";
  std::vector<unsigned char> bytes(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string report_to_json(const CertificateReport& report, const ReportContext& context) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["input_id"] = context.input_id;
  j["transform"] = context.transform;
  j["tau"] = context.tau ? nlohmann::json(*context.tau) : nlohmann::json(nullptr);
  j["gamma"] = context.gamma ? nlohmann::json(*context.gamma) : nlohmann::json(nullptr);
  j["class_index"] = context.class_index;
  j["k"] = report.k;
  j["r_cert"] = report.r_cert;
  j["r_cert_over_k"] = static_cast<double>(report.r_cert) / static_cast<double>(report.k);
  j["margin_c"] = report.margin_c;
  j["params"] = {{"rho", report.params.rho},
                 {"sigma", report.params.sigma},
                 {"q", report.params.q},
                 {"p", report.params.p},
                 {"n", report.params.n}};
  nlohmann::json gaps = nlohmann::json::array();
  for (const auto& [i, gap] : report.gap_profile) {
    gaps.push_back({{"i", i}, {"gap", gap}});
  }
  j["gap_profile"] = std::move(gaps);
  if (context.median_rank_bound_applicable) {
    j["median_rank_bound"] = context.median_rank_bound
                                 ? nlohmann::json(*context.median_rank_bound)
                                 : nlohmann::json(nullptr);
  } else {
    j["median_rank_bound"] = nlohmann::json(nullptr);
  }
  nlohmann::json ranks = nlohmann::json::array();
  for (const auto& r : context.certified_ranks) {
    ranks.push_back(r ? nlohmann::json(*r) : nlohmann::json(nullptr));
  }
  j["certified_ranks"] = std::move(ranks);
  return j.dump(2);
}

}  // namespace certsal
