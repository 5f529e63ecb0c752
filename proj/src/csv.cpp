#include "mlrhar/csv.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace mlrhar {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  ensure(out.good(), "cannot open " + path + " for writing");
  out << std::setprecision(17);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  ensure(in.good(), "cannot open " + path + " for reading");
  return in;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_double(const std::string& field, const std::string& path, long line_no) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, value);
  ensure(res.ec == std::errc() && res.ptr == end,
         path + ":" + std::to_string(line_no) + ": not a number: '" + field + "'");
  return value;
}

long parse_index(const std::string& field, const std::string& path, long line_no) {
  long value = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, value);
  ensure(res.ec == std::errc() && res.ptr == end && value >= 1,
         path + ":" + std::to_string(line_no) + ": not a positive index: '" + field + "'");
  return value;
}

bool is_number(const std::string& field) {
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

}  // namespace

void write_panel_csv(const std::string& path, const RealizedPanel& panel) {
  auto out = open_out(path);
  out << "day,asset,value\n";
  for (Index d = 0; d < panel.days(); ++d)
    for (Index i = 0; i < panel.assets(); ++i)
      out << d + 1 << ',' << i + 1 << ',' << panel.values(d, i) << '\n';
  ensure(out.good(), "write failed: " + path);
}

namespace {

RealizedPanel read_long_panel(std::ifstream& in, const std::string& path) {
  std::string line;
  long line_no = 1;
  std::getline(in, line);
  ensure(trim(line) == "day,asset,value",
         path + ":1: expected header 'day,asset,value', got '" + trim(line) + "'");

  std::map<std::pair<long, long>, double> cells;
  long max_day = 0, max_asset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    ensure(fields.size() == 3,
           path + ":" + std::to_string(line_no) + ": expected 3 fields, got " +
               std::to_string(fields.size()));
    const long d = parse_index(fields[0], path, line_no);
    const long a = parse_index(fields[1], path, line_no);
    const double v = parse_double(fields[2], path, line_no);
    ensure(cells.emplace(std::make_pair(d, a), v).second,
           path + ":" + std::to_string(line_no) + ": duplicate cell day=" + std::to_string(d) +
               " asset=" + std::to_string(a));
    max_day = std::max(max_day, d);
    max_asset = std::max(max_asset, a);
  }
  ensure(max_day > 0 && max_asset > 0, path + ": no data rows");
  ensure(static_cast<long>(cells.size()) == max_day * max_asset,
         path + ": incomplete grid, " + std::to_string(cells.size()) + " cells for " +
             std::to_string(max_day) + " days x " + std::to_string(max_asset) + " assets");

  RealizedPanel panel;
  panel.values.resize(max_day, max_asset);
  for (const auto& [key, v] : cells) panel.values(key.first - 1, key.second - 1) = v;
  return panel;
}

RealizedPanel read_wide_panel(std::ifstream& in, const std::string& path) {
  std::string line;
  long line_no = 0;
  std::vector<std::vector<double>> rows;
  Index width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (rows.empty() && width == 0 && !is_number(fields[0])) continue;  // name header
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double(f, path, line_no));
    if (width == 0) width = static_cast<Index>(row.size());
    ensure(static_cast<Index>(row.size()) == width,
           path + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
               " fields, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  ensure(!rows.empty(), path + ": no data rows");

  RealizedPanel panel;
  panel.values.resize(static_cast<Index>(rows.size()), width);
  for (Index d = 0; d < panel.days(); ++d)
    for (Index i = 0; i < width; ++i)
      panel.values(d, i) = rows[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)];
  return panel;
}

}  // namespace

RealizedPanel read_panel_csv(const std::string& path, bool wide) {
  auto in = open_in(path);
  return wide ? read_wide_panel(in, path) : read_long_panel(in, path);
}

void write_prices_csv(const std::string& path, const HighFreqPanel& panel) {
  auto out = open_out(path);
  out << "day,asset,value\n";
  for (Index k = 0; k < panel.log_prices.rows(); ++k)
    for (Index i = 0; i < panel.assets(); ++i)
      out << k << ',' << i + 1 << ',' << panel.log_prices(k, i) << '\n';
  ensure(out.good(), "write failed: " + path);
}

void write_coefficients_csv(const std::string& path, const Tensor3& coeffs) {
  require(coeffs.dim1() == coeffs.dim2(), "write_coefficients_csv: tensor is not N x N x P");
  auto out = open_out(path);
  out << "# N=" << coeffs.dim1() << " P=" << coeffs.dim3() << '\n';
  const auto m1 = coeffs.mode1();
  for (Index r = 0; r < m1.rows(); ++r) {
    for (Index c = 0; c < m1.cols(); ++c) out << (c ? "," : "") << m1(r, c);
    out << '\n';
  }
  ensure(out.good(), "write failed: " + path);
}

Tensor3 read_coefficients_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  long n = 0, p = 0;
  {
    std::istringstream header(trim(line));
    std::string hash, nf, pf;
    header >> hash >> nf >> pf;
    const bool ok = hash == "#" && nf.rfind("N=", 0) == 0 && pf.rfind("P=", 0) == 0;
    ensure(ok, path + ":1: expected header '# N=<n> P=<p>'");
    n = parse_index(nf.substr(2), path, 1);
    p = parse_index(pf.substr(2), path, 1);
  }

  Eigen::MatrixXd m1(n, n * p);
  long line_no = 1;
  for (long r = 0; r < n; ++r) {
    ensure(static_cast<bool>(std::getline(in, line)),
           path + ": expected " + std::to_string(n) + " coefficient rows, got " +
               std::to_string(r));
    ++line_no;
    const auto fields = split_fields(line);
    ensure(static_cast<long>(fields.size()) == n * p,
           path + ":" + std::to_string(line_no) + ": expected " + std::to_string(n * p) +
               " fields, got " + std::to_string(fields.size()));
    for (long c = 0; c < n * p; ++c) m1(r, c) = parse_double(fields[static_cast<std::size_t>(c)], path, line_no);
  }
  return fold(m1, 1, n, n, p);
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix) {
  auto out = open_out(path);
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c) out << (c ? "," : "") << matrix(r, c);
    out << '\n';
  }
  ensure(out.good(), "write failed: " + path);
}

std::vector<std::string> write_fit_result(const std::string& stem, const FitResult& fit) {
  const std::string csv_path = stem + ".csv";
  const std::string json_path = stem + ".json";
  write_coefficients_csv(csv_path, fit.tensor);

  nlohmann::json j;
  j["method"] = method_name(fit.method);
  j["ranks"] = {fit.ranks[0], fit.ranks[1], fit.ranks[2]};
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["final_loss"] = fit.final_loss;
  j["loss_trace"] = fit.loss_trace;
  if (!fit.warning.empty()) j["warning"] = fit.warning;

  auto out = open_out(json_path);
  out << j.dump(2) << '\n';
  ensure(out.good(), "write failed: " + json_path);
  return {csv_path, json_path};
}

std::vector<std::string> write_report(const std::string& stem, const ExperimentReport& report) {
  std::vector<std::string> written;
  const std::string table_path = stem + "_table.csv";
  {
    auto out = open_out(table_path);
    out << "# experiment=" << report.experiment_id << " replications=" << report.replications
        << " seed=" << report.master_seed << '\n';
    for (const auto& note : report.notes) out << "# " << note << '\n';
    for (std::size_t c = 0; c < report.columns.size(); ++c)
      out << (c ? "," : "") << report.columns[c];
    out << '\n';
    for (const auto& row : report.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
      out << '\n';
    }
    ensure(out.good(), "write failed: " + table_path);
  }
  written.push_back(table_path);

  for (std::size_t k = 0; k < report.curves.size(); ++k) {
    std::ostringstream name;
    name << stem << "_curve_" << std::setw(2) << std::setfill('0') << k + 1 << ".csv";
    auto out = open_out(name.str());
    out << "# " << report.curves[k].name << '\n' << "x,y\n";
    for (std::size_t i = 0; i < report.curves[k].x.size(); ++i)
      out << report.curves[k].x[i] << ',' << report.curves[k].y[i] << '\n';
    ensure(out.good(), "write failed: " + name.str());
    written.push_back(name.str());
  }
  return written;
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  ensure(in.good(), "cannot open " + path + " for checksum");
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buffer[4096];
  while (in.read(buffer, sizeof buffer) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << hash;
  return hex.str();
}

}  // namespace mlrhar
