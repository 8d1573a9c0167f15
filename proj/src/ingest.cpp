#include "ovbsens/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ovbsens/rng.hpp"

namespace ovbsens {

namespace {

// One CSV record; handles quoted fields, embedded separators, and CRLF.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    const char c = char(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else {
      if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        fields.push_back(field);
        field.clear();
      } else if (c == '\n') {
        break;
      } else if (c == '\r') {
        if (in.peek() == '\n') in.get();
        break;
      } else {
        field.push_back(c);
      }
    }
  }
  if (!any) return false;
  fields.push_back(field);
  return true;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return s.substr(b, e - b);
}

void strip_bom(std::string& s) {
  if (s.size() >= 3 && (unsigned char)s[0] == 0xEF &&
      (unsigned char)s[1] == 0xBB && (unsigned char)s[2] == 0xBF)
    s.erase(0, 3);
}

// empty field = missing; anything else must parse as a number
bool parse_cell(const std::string& raw, double& out, bool& missing) {
  const std::string s = trim(raw);
  if (s.empty()) {
    missing = true;
    return true;
  }
  missing = false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

LoadResult load_dataset(const DatasetSpec& spec) {
  std::ifstream in(spec.path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + spec.path);

  std::vector<std::string> selected;
  selected.push_back(spec.outcome);
  selected.push_back(spec.treatment);
  for (const auto& c : spec.calibration) selected.push_back(c);
  for (const auto& c : spec.controls) selected.push_back(c);
  for (std::size_t i = 0; i < selected.size(); ++i)
    for (std::size_t j = i + 1; j < selected.size(); ++j)
      if (selected[i] == selected[j])
        throw RoleMismatch("column selected twice: " + selected[i]);

  std::vector<std::string> header;
  if (!read_record(in, header)) throw ParseError("missing header row");
  if (!header.empty()) strip_bom(header[0]);
  for (auto& h : header) h = trim(h);

  std::vector<std::size_t> col_of;
  for (const auto& name : selected) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw MissingColumn("column not found: " + name);
    col_of.push_back(std::size_t(it - header.begin()));
  }

  const std::size_t p = selected.size();
  std::vector<std::vector<double>> rows;
  std::vector<std::string> fields;
  std::int64_t n_read = 0;
  std::int64_t line = 1;  // header was line 1
  while (read_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    ++n_read;
    if (fields.size() < header.size()) {
      std::ostringstream os;
      os << "row " << line << ": expected " << header.size()
         << " fields, got " << fields.size();
      throw ParseError(os.str());
    }
    std::vector<double> row(p);
    bool drop = false;
    for (std::size_t j = 0; j < p; ++j) {
      double v = 0.0;
      bool missing = false;
      if (!parse_cell(fields[col_of[j]], v, missing)) {
        std::ostringstream os;
        os << "row " << line << ", column '" << selected[j]
           << "': cannot parse '" << fields[col_of[j]] << "'";
        throw ParseError(os.str());
      }
      if (missing) {
        drop = true;
        break;
      }
      row[j] = v;
    }
    if (!drop) rows.push_back(std::move(row));
  }

  const std::int64_t n = std::int64_t(rows.size());
  if (n < std::int64_t(p) + 2) {
    std::ostringstream os;
    os << "need at least " << p + 2 << " complete rows for " << p
       << " variables, have " << n;
    throw TooFewRows(os.str());
  }

  // compensated accumulation keeps the estimate invariant to row order
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(Eigen::Index(p));
  {
    std::vector<double> sum(p, 0.0), comp(p, 0.0);
    for (const auto& row : rows)
      for (std::size_t j = 0; j < p; ++j) {
        const double y = row[j] - comp[j];
        const double t = sum[j] + y;
        comp[j] = (t - sum[j]) - y;
        sum[j] = t;
      }
    for (std::size_t j = 0; j < p; ++j)
      mean(Eigen::Index(j)) = sum[j] / double(n);
  }

  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(Eigen::Index(p),
                                                Eigen::Index(p));
  {
    std::vector<double> sum(p * p, 0.0), comp(p * p, 0.0);
    for (const auto& row : rows) {
      for (std::size_t j = 0; j < p; ++j) {
        const double dj = row[j] - mean(Eigen::Index(j));
        for (std::size_t k = j; k < p; ++k) {
          const double prod = dj * (row[k] - mean(Eigen::Index(k)));
          const std::size_t at = j * p + k;
          const double y = prod - comp[at];
          const double t = sum[at] + y;
          comp[at] = (t - sum[at]) - y;
          sum[at] = t;
        }
      }
    }
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = j; k < p; ++k) {
        const double v = sum[j * p + k] / double(n - 1);
        sigma(Eigen::Index(j), Eigen::Index(k)) = v;
        sigma(Eigen::Index(k), Eigen::Index(j)) = v;
      }
  }

  for (std::size_t j = 0; j < p; ++j) {
    if (sigma(Eigen::Index(j), Eigen::Index(j)) <= 0.0)
      throw ConstantColumn("column has zero variance: " + selected[j]);
  }

  std::map<std::string, Role> roles;
  roles[spec.outcome] = Role::outcome;
  roles[spec.treatment] = Role::treatment;
  for (const auto& c : spec.calibration) roles[c] = Role::calibration;
  for (const auto& c : spec.controls) roles[c] = Role::control;

  LoadResult out{CovarianceModel(sigma, selected, roles),
                 SampleSummary{n_read, n, mean, sigma}};
  out.model.validate_roles();
  return out;
}

CovarianceModel load_covariance(const std::string& path,
                                const std::map<std::string, Role>& roles) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::vector<std::string> header;
  if (!read_record(in, header)) throw ParseError("missing header row");
  if (!header.empty()) strip_bom(header[0]);
  for (auto& h : header) h = trim(h);
  const std::size_t p = header.size();

  Eigen::MatrixXd sigma(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  std::vector<std::string> fields;
  std::size_t r = 0;
  while (read_record(in, fields)) {
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    if (r >= p) throw ParseError("more rows than header labels");
    if (fields.size() != p) {
      std::ostringstream os;
      os << "row " << r + 2 << ": expected " << p << " fields, got "
         << fields.size();
      throw ParseError(os.str());
    }
    for (std::size_t cidx = 0; cidx < p; ++cidx) {
      double v = 0.0;
      bool missing = false;
      if (!parse_cell(fields[cidx], v, missing) || missing) {
        std::ostringstream os;
        os << "row " << r + 2 << ", column " << cidx + 1
           << ": cannot parse '" << fields[cidx] << "'";
        throw ParseError(os.str());
      }
      sigma(Eigen::Index(r), Eigen::Index(cidx)) = v;
    }
    ++r;
  }
  if (r != p) throw ParseError("matrix is not square");

  const double scale = std::max(sigma.cwiseAbs().maxCoeff(), 1.0);
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * scale) {
    std::ostringstream os;
    os << "covariance file not symmetric: max |A - A'| = " << asym;
    throw NotSymmetric(os.str());
  }
  sigma = ((sigma + sigma.transpose()) / 2.0).eval();

  for (const auto& h : header)
    if (roles.find(h) == roles.end())
      throw RoleMismatch("no role given for label: " + h);
  for (const auto& [l, role] : roles)
    if (std::find(header.begin(), header.end(), l) == header.end())
      throw RoleMismatch("role given for unknown label: " + l);

  CovarianceModel model(sigma, header, roles);
  model.validate_roles();
  return model;
}

void write_covariance(const CovarianceModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  const auto& labels = model.labels();
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (j) out << ',';
    out << labels[j];
  }
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < model.sigma().rows(); ++i) {
    for (Eigen::Index j = 0; j < model.sigma().cols(); ++j) {
      if (j) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", model.sigma()(i, j));
      out << buf;
    }
    out << '\n';
  }
}

Eigen::MatrixXd sample_gaussian(const CovarianceModel& model, std::int64_t n,
                                std::uint64_t seed) {
  const Eigen::MatrixXd chol = model.sigma().llt().matrixL();
  const Eigen::Index p = model.sigma().rows();
  Eigen::MatrixXd rows(n, p);
  for (std::int64_t i = 0; i < n; ++i) {
    Rng rng(seed, std::uint64_t(i));
    Eigen::VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
    rows.row(i) = (chol * z).transpose();
  }
  return rows;
}

void write_dataset_csv(const std::vector<std::string>& columns,
                       const Eigen::MatrixXd& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (j) out << ',';
    out << columns[j];
  }
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", rows(i, j));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace ovbsens
