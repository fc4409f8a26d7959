#pragma once

#include <complex>
#include <map>
#include <string>
#include <vector>

#include "ciltlab/coulomb.hpp"

namespace ciltlab {

inline constexpr const char* kVersion = "0.1.0";

// Deterministic JSON report: insertion order is preserved and numbers use
// shortest round-trip formatting, so identical runs produce identical bytes.
class Report {
 public:
  explicit Report(const std::string& subcommand);
  ~Report();
  Report(Report&&) noexcept;
  Report& operator=(Report&&) noexcept;

  void set_string(const std::string& key, const std::string& value);
  void set_number(const std::string& key, double value);
  void set_integer(const std::string& key, int64_t value);
  void set_bool(const std::string& key, bool value);
  void set_complex(const std::string& key, std::complex<double> value);
  void set_estimate(const std::string& key, const McEstimate& e);
  void set_number_list(const std::string& key, const std::vector<double>& v);

  std::string to_string() const;
  void write(const std::string& path) const;

 private:
  struct Impl;
  Impl* impl_;
};

struct CsvRow {
  std::string term_id;
  double value_re = 0.0;
  double value_im = 0.0;
  double stderr_ = 0.0;
  uint64_t n_samples = 0;
};

// columns: term_id, value_re, value_im, stderr, n_samples
void write_csv(const std::string& path, const std::vector<CsvRow>& rows);

}  // namespace ciltlab
