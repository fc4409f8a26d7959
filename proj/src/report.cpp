#include "ciltlab/report.hpp"

#include <fstream>

#include "json.hpp"

namespace ciltlab {

using OrderedJson = nlohmann::ordered_json;

struct Report::Impl {
  OrderedJson doc;
};

Report::Report(const std::string& subcommand) : impl_(new Impl) {
  impl_->doc["subcommand"] = subcommand;
  impl_->doc["version"] = kVersion;
}

Report::~Report() { delete impl_; }

Report::Report(Report&& o) noexcept : impl_(o.impl_) { o.impl_ = nullptr; }

Report& Report::operator=(Report&& o) noexcept {
  std::swap(impl_, o.impl_);
  return *this;
}

void Report::set_string(const std::string& key, const std::string& value) {
  impl_->doc[key] = value;
}

void Report::set_number(const std::string& key, double value) {
  impl_->doc[key] = value;
}

void Report::set_integer(const std::string& key, int64_t value) {
  impl_->doc[key] = value;
}

void Report::set_bool(const std::string& key, bool value) {
  impl_->doc[key] = value;
}

void Report::set_complex(const std::string& key, std::complex<double> value) {
  impl_->doc[key] = OrderedJson{{"re", value.real()}, {"im", value.imag()}};
}

void Report::set_estimate(const std::string& key, const McEstimate& e) {
  impl_->doc[key] = OrderedJson{{"value_re", e.value.real()},
                                {"value_im", e.value.imag()},
                                {"stderr", e.stderr_},
                                {"n_samples", e.n_samples},
                                {"seed", e.seed},
                                {"epsilon", e.epsilon}};
}

void Report::set_number_list(const std::string& key,
                             const std::vector<double>& v) {
  impl_->doc[key] = v;
}

std::string Report::to_string() const { return impl_->doc.dump(2) + "\n"; }

void Report::write(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  os << to_string();
}

void write_csv(const std::string& path, const std::vector<CsvRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  os << "term_id,value_re,value_im,stderr,n_samples\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.term_id << ',' << r.value_re << ',' << r.value_im << ','
       << r.stderr_ << ',' << r.n_samples << '\n';
}

}  // namespace ciltlab
