// Command-line front end: data loading, subcommand dispatch, JSON/CSV
// emission for tables and plot-ready data.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ovbsens/calibrate.hpp"
#include "ovbsens/covkernel.hpp"
#include "ovbsens/frontier.hpp"
#include "ovbsens/identify.hpp"
#include "ovbsens/ingest.hpp"
#include "ovbsens/oracle.hpp"
#include "ovbsens/simsel.hpp"

namespace {

using namespace ovbsens;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// number formatting: <= 12 significant digits, round-half-even via the
// default IEEE binary-to-decimal conversion; infinities as "inf"/"-inf"
std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// minimal ordered JSON writer; keys are emitted in insertion order so the
// output is byte-stable
class JsonWriter {
 public:
  explicit JsonWriter(std::ostream& out) : out_(out) {}

  void begin_object() { open('{'); }
  void end_object() { close('}'); }
  void begin_array() { open('['); }
  void end_array() { close(']'); }

  void key(const std::string& k) {
    comma();
    out_ << '"' << escape(k) << "\":";
    pending_value_ = true;
  }
  void value(double v) {
    comma();
    if (std::isfinite(v))
      out_ << fmt_num(v);
    else
      out_ << '"' << fmt_num(v) << '"';
  }
  void value(const std::string& s) {
    comma();
    out_ << '"' << escape(s) << '"';
  }
  void value(const char* s) { value(std::string(s)); }
  void value(bool b) {
    comma();
    out_ << (b ? "true" : "false");
  }
  void value(std::int64_t v) {
    comma();
    out_ << v;
  }
  void kv(const std::string& k, double v) {
    key(k);
    value(v);
  }
  void kv(const std::string& k, const std::string& v) {
    key(k);
    value(v);
  }
  void kv(const std::string& k, const char* v) { kv(k, std::string(v)); }
  void kv(const std::string& k, bool v) {
    key(k);
    value(v);
  }
  void kv(const std::string& k, std::int64_t v) {
    key(k);
    value(v);
  }
  void kv(const std::string& k, int v) { kv(k, std::int64_t(v)); }

 private:
  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    return out;
  }
  void open(char c) {
    comma();
    out_ << c;
    first_.push_back(true);
    pending_value_ = false;
  }
  void close(char c) {
    out_ << c;
    first_.pop_back();
    pending_value_ = false;
  }
  void comma() {
    if (pending_value_) {
      pending_value_ = false;
      return;
    }
    if (!first_.empty()) {
      if (!first_.back()) out_ << ',';
      first_.back() = false;
    }
  }

  std::ostream& out_;
  std::vector<bool> first_;
  bool pending_value_ = false;
};

// ---------------------------------------------------------------------------
// shared configuration

struct InputConfig {
  std::string data_path;
  std::string cov_path;
  std::string y = "Y";
  std::string x = "X";
  std::vector<std::string> w1;
  std::vector<std::string> w0;
};

struct OutputConfig {
  std::string out_path;
  std::string format = "json";
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// "start:step:stop", inclusive of stop within 1e-12
std::vector<double> parse_grid(const std::string& s) {
  const auto parts = split_list([&] {
    std::string t = s;
    for (auto& c : t)
      if (c == ':') c = ',';
    return t;
  }());
  if (parts.size() == 1) return {std::stod(parts[0])};
  if (parts.size() != 3)
    throw CLI::ValidationError("grid", "expected start:step:stop, got " + s);
  const double start = std::stod(parts[0]);
  const double step = std::stod(parts[1]);
  const double stop = std::stod(parts[2]);
  if (step <= 0.0 || stop < start)
    throw CLI::ValidationError("grid", "need step > 0 and stop >= start");
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    const double v = start + step * double(i);
    if (v > stop + 1e-12) break;
    grid.push_back(std::min(v, stop));
  }
  return grid;
}

CovarianceModel load_model(const InputConfig& in) {
  if (in.data_path.empty() == in.cov_path.empty())
    throw CLI::ValidationError("input",
                               "exactly one of --data / --cov is required");
  if (in.w1.empty())
    throw CLI::ValidationError("input", "--w1 must list the calibration "
                                        "covariates");
  if (!in.data_path.empty()) {
    DatasetSpec spec;
    spec.path = in.data_path;
    spec.outcome = in.y;
    spec.treatment = in.x;
    spec.calibration = in.w1;
    spec.controls = in.w0;
    return load_dataset(spec).model;
  }
  std::map<std::string, Role> roles;
  roles[in.y] = Role::outcome;
  roles[in.x] = Role::treatment;
  for (const auto& l : in.w1) roles[l] = Role::calibration;
  for (const auto& l : in.w0) roles[l] = Role::control;
  return load_covariance(in.cov_path, roles);
}

struct OutputStream {
  std::ofstream file;
  std::ostream* out = &std::cout;
  explicit OutputStream(const std::string& path) {
    if (!path.empty()) {
      file.open(path, std::ios::binary);
      if (!file) throw ParseError("cannot open output file: " + path);
      out = &file;
    }
  }
};

// thread count deliberately left out: outputs are identical for any value
void write_meta(JsonWriter& j, const std::string& subcommand,
                std::uint64_t seed) {
  j.key("meta");
  j.begin_object();
  j.kv("tool", "ovbsens");
  j.kv("version", kVersion);
  j.kv("subcommand", subcommand);
  j.kv("seed", std::int64_t(seed));
  j.end_object();
}

void write_inputs(JsonWriter& j, const InputConfig& in) {
  j.key("inputs");
  j.begin_object();
  j.kv("source", in.data_path.empty() ? in.cov_path : in.data_path);
  j.kv("source_kind", in.data_path.empty() ? "covariance" : "dataset");
  j.kv("y", in.y);
  j.kv("x", in.x);
  j.key("w1");
  j.begin_array();
  for (const auto& l : in.w1) j.value(l);
  j.end_array();
  j.key("w0");
  j.begin_array();
  for (const auto& l : in.w0) j.value(l);
  j.end_array();
  j.end_object();
}

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("OVBSENS_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

// run fn(i) for i in [0, n) over a fixed thread pool; results must be
// written to index i only, keeping any thread count numerically identical
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  const int t = std::max(1, std::min(threads, n));
  if (t == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int w = 0; w < t; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsRow {
  double rx_bar = 0.0;
  IdentifiedInterval iv;
  std::optional<IdentifiedInterval> oracle;
  bool oracle_agrees = true;
};

int run_bounds(const InputConfig& in, const OutputConfig& outc,
               const std::string& rx_grid, double ry_bar, double c_low,
               double c_high, bool verify, std::int64_t draws,
               std::uint64_t seed, int threads) {
  const auto model = load_model(in);
  const auto nm = prepare(model);
  const auto grid = parse_grid(rx_grid);
  const double xs = nm.x_scale;
  const bool joint = std::isfinite(ry_bar);

  std::vector<BoundsRow> rows(grid.size());
  parallel_for(int(grid.size()), threads, [&](int i) {
    BoundsRow& row = rows[std::size_t(i)];
    row.rx_bar = grid[std::size_t(i)];
    row.iv = joint ? bounds_rx_ry(nm, row.rx_bar, ry_bar, c_low, c_high)
                   : bounds_rx_c(nm, row.rx_bar, c_low, c_high);
    if (verify && row.iv.finite) {
      SensitivityBudget budget;
      budget.rx_bar = row.rx_bar;
      budget.ry_bar = ry_bar;
      budget.c_low = c_low;
      budget.c_high = c_high;
      const auto hull = brute_force_bounds(nm, budget, draws, seed);
      row.oracle = hull;
      const double width = row.iv.upper - row.iv.lower;
      const bool contained =
          hull.lower >= row.iv.lower - 1e-12 - 1e-6 * width &&
          hull.upper <= row.iv.upper + 1e-12 + 1e-6 * width;
      const bool close =
          width == 0.0
              ? hull.upper - hull.lower <= 1e-12
              : std::abs(hull.lower - row.iv.lower) <= 0.02 * width &&
                    std::abs(hull.upper - row.iv.upper) <= 0.02 * width;
      row.oracle_agrees = contained && close;
    }
  });

  OutputStream os(outc.out_path);
  if (outc.format == "csv") {
    *os.out << "rx_bar,lower,upper,finite";
    if (verify) *os.out << ",oracle_lower,oracle_upper,oracle_agrees";
    *os.out << "\n";
    for (const auto& row : rows) {
      *os.out << fmt_num(row.rx_bar) << ','
              << (row.iv.lower_finite ? fmt_num(row.iv.lower) : "-inf") << ','
              << (row.iv.upper_finite ? fmt_num(row.iv.upper) : "inf") << ','
              << (row.iv.finite ? 1 : 0);
      if (verify) {
        if (row.oracle)
          *os.out << ',' << fmt_num(row.oracle->lower) << ','
                  << fmt_num(row.oracle->upper) << ','
                  << (row.oracle_agrees ? 1 : 0);
        else
          *os.out << ",,,";
      }
      *os.out << "\n";
    }
    return 0;
  }

  JsonWriter j(*os.out);
  j.begin_object();
  write_meta(j, "bounds", seed);
  write_inputs(j, in);
  j.key("results");
  j.begin_object();
  j.kv("beta_med", nm.beta_med / xs);
  j.kv("beta_med_normalized", nm.beta_med);
  j.kv("x_sd", xs);
  j.kv("r2_x_w1", nm.r2_x_w1);
  j.kv("r2_y_x_dot_w1", nm.r2_yx_dot_w1);
  j.kv("breakdown_point_rx", breakdown_point_rx_c(nm, c_low, c_high));
  j.kv("c_low", c_low);
  j.kv("c_high", c_high);
  j.key("rows");
  j.begin_array();
  for (const auto& row : rows) {
    j.begin_object();
    j.kv("rx_bar", row.rx_bar);
    j.kv("lower", row.iv.lower_finite
                      ? row.iv.lower / xs
                      : -std::numeric_limits<double>::infinity());
    j.kv("upper", row.iv.upper_finite
                      ? row.iv.upper / xs
                      : std::numeric_limits<double>::infinity());
    j.kv("finite", row.iv.finite);
    if (row.oracle) {
      j.kv("oracle_lower", row.oracle->lower / xs);
      j.kv("oracle_upper", row.oracle->upper / xs);
      j.kv("oracle_agrees", row.oracle_agrees);
    }
    j.end_object();
  }
  j.end_array();
  j.end_object();
  j.end_object();
  *os.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// breakdown

int run_breakdown(const InputConfig& in, const OutputConfig& outc,
                  double b_low, double c_low, double c_high, int sim_d1,
                  std::int64_t draws, std::uint64_t seed, int threads) {
  const auto model = load_model(in);
  const auto nm = prepare(model);

  const double rx_bp = breakdown_point_rx_c(nm, c_low, c_high);
  const double r_bp = common_breakdown(nm, b_low, c_low, c_high);

  std::optional<SamplingSummary> sum_rx, sum_do, sum_dr;
  if (sim_d1 > 0) {
    CovarianceModel base = model;
    if (!in.w0.empty()) base = partial_out(model, in.w0);
    const auto dgp = make_dgp_from_covariance(base, in.y, in.x, in.w1);
    sum_rx = covariate_sampling_distribution(dgp, sim_d1, RatioKind::r_x,
                                             draws, seed, threads)
                 .summary;
    sum_do = covariate_sampling_distribution(dgp, sim_d1,
                                             RatioKind::delta_orig, draws,
                                             seed, threads)
                 .summary;
    sum_dr = covariate_sampling_distribution(dgp, sim_d1,
                                             RatioKind::delta_resid, draws,
                                             seed, threads)
                 .summary;
  }

  OutputStream os(outc.out_path);
  if (outc.format == "csv") {
    *os.out << "quantity,fraction,percent\n";
    *os.out << "rx_breakdown," << fmt_num(rx_bp) << ','
            << fmt_num(100.0 * rx_bp) << "\n";
    *os.out << "common_breakdown," << fmt_num(r_bp) << ','
            << fmt_num(100.0 * r_bp) << "\n";
    return 0;
  }

  const auto write_summary = [&](JsonWriter& j, const SamplingSummary& s) {
    j.begin_object();
    j.kv("n", s.n);
    j.kv("n_degenerate", s.n_degenerate);
    j.kv("mode", s.mode);
    j.kv("prob_le_1", s.prob_le_1);
    j.kv("min", s.min);
    j.kv("p25", s.p25);
    j.kv("median", s.median);
    j.kv("p75", s.p75);
    j.kv("max", s.max);
    j.kv("mean", s.mean);
    j.kv("sd", s.sd);
    j.end_object();
  };

  JsonWriter j(*os.out);
  j.begin_object();
  write_meta(j, "breakdown", seed);
  write_inputs(j, in);
  j.key("results");
  j.begin_object();
  j.kv("beta_med", nm.beta_med / nm.x_scale);
  j.kv("b_low", b_low);
  j.kv("c_low", c_low);
  j.kv("c_high", c_high);
  j.kv("rx_breakdown", rx_bp);
  j.kv("rx_breakdown_percent", 100.0 * rx_bp);
  j.kv("common_breakdown", r_bp);
  j.kv("common_breakdown_percent", 100.0 * r_bp);
  j.kv("rx_le_common", rx_bp <= r_bp + 1e-9);
  if (sum_rx) {
    j.key("covariate_sampling");
    j.begin_object();
    j.kv("d1", sim_d1);
    j.key("r_x");
    write_summary(j, *sum_rx);
    j.key("delta_orig");
    write_summary(j, *sum_do);
    j.key("delta_resid");
    write_summary(j, *sum_dr);
    j.end_object();
  }
  j.end_object();
  j.end_object();
  *os.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// frontier

int run_frontier(const InputConfig& in, const OutputConfig& outc,
                 const std::string& rx_grid, double b_low, double c_low,
                 const std::string& chigh_list, std::uint64_t seed,
                 int threads) {
  const auto model = load_model(in);
  const auto nm = prepare(model);
  const auto grid = parse_grid(rx_grid);
  std::vector<double> chighs;
  for (const auto& s : split_list(chigh_list)) chighs.push_back(std::stod(s));
  if (chighs.empty()) chighs.push_back(1.0);

  std::vector<FrontierCurve> curves(chighs.size());
  for (std::size_t ci = 0; ci < chighs.size(); ++ci) {
    FrontierCurve& curve = curves[ci];
    curve.b_low = b_low;
    curve.c_low = c_low;
    curve.c_high = chighs[ci];
    curve.points.resize(grid.size());
    parallel_for(int(grid.size()), threads, [&](int i) {
      curve.points[std::size_t(i)] = breakdown_frontier_c(
          nm, grid[std::size_t(i)], b_low, c_low, chighs[ci]);
    });
  }

  const auto write_csv = [&](std::ostream& out, const FrontierCurve& curve) {
    out << "rx_bar,ry_bf,case\n";
    for (const auto& p : curve.points) {
      out << fmt_num(p.rx_bar) << ','
          << (p.is_infinite() ? "inf" : fmt_num(p.ry_bf)) << ','
          << frontier_case_name(p.case_tag) << "\n";
    }
  };

  if (outc.format == "csv") {
    if (curves.size() == 1) {
      OutputStream os(outc.out_path);
      write_csv(*os.out, curves[0]);
    } else if (!outc.out_path.empty()) {
      // one file per c_high value
      const auto dot = outc.out_path.rfind('.');
      const std::string stem =
          dot == std::string::npos ? outc.out_path : outc.out_path.substr(0, dot);
      const std::string ext =
          dot == std::string::npos ? "" : outc.out_path.substr(dot);
      for (const auto& curve : curves) {
        OutputStream os(stem + "_chigh" + fmt_num(curve.c_high) + ext);
        write_csv(*os.out, curve);
      }
    } else {
      for (const auto& curve : curves) {
        std::cout << "# c_high=" << fmt_num(curve.c_high) << "\n";
        write_csv(std::cout, curve);
      }
    }
    return 0;
  }

  OutputStream os(outc.out_path);
  JsonWriter j(*os.out);
  j.begin_object();
  write_meta(j, "frontier", seed);
  write_inputs(j, in);
  j.key("results");
  j.begin_object();
  j.kv("beta_med", nm.beta_med / nm.x_scale);
  j.kv("b_low", b_low);
  j.kv("c_low", c_low);
  j.key("curves");
  j.begin_array();
  for (const auto& curve : curves) {
    j.begin_object();
    j.kv("c_high", curve.c_high);
    j.key("points");
    j.begin_array();
    for (const auto& p : curve.points) {
      j.begin_object();
      j.kv("rx_bar", p.rx_bar);
      j.kv("ry_bf", p.is_infinite()
                        ? std::numeric_limits<double>::infinity()
                        : p.ry_bf);
      j.kv("case", frontier_case_name(p.case_tag));
      if (p.case_tag == FrontierCase::interior) {
        j.kv("solver_restarts", p.solver_report.restarts);
        j.kv("solver_feasible_restarts", p.solver_report.feasible_restarts);
        j.kv("solver_p_slack", p.solver_report.p_slack);
        j.kv("solver_devsq_slack", p.solver_report.devsq_slack);
      }
      j.end_object();
    }
    j.end_array();
    j.end_object();
  }
  j.end_array();
  j.end_object();
  j.end_object();
  *os.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate

int run_calibrate(const InputConfig& in, const OutputConfig& outc,
                  std::uint64_t seed, int threads) {
  (void)threads;
  const auto model = load_model(in);
  const auto rep = calibration_report(model);

  OutputStream os(outc.out_path);
  if (outc.format == "csv") {
    *os.out << "label,rho,c,c_sq\n";
    for (const auto& [label, rho] : rep.rho) {
      *os.out << label << ',' << fmt_num(rho) << ','
              << fmt_num(rep.c.at(label)) << ','
              << fmt_num(rep.c_sq.at(label)) << "\n";
    }
    return 0;
  }

  JsonWriter j(*os.out);
  j.begin_object();
  write_meta(j, "calibrate", seed);
  write_inputs(j, in);
  j.key("results");
  j.begin_object();
  j.key("covariates");
  j.begin_array();
  for (const auto& [label, rho] : rep.rho) {
    j.begin_object();
    j.kv("label", label);
    j.kv("rho", rho);
    j.kv("rho_percent", 100.0 * rho);
    j.kv("c", rep.c.at(label));
    j.kv("c_sq", rep.c_sq.at(label));
    j.end_object();
  }
  j.end_array();
  j.kv("c_suggest_low", rep.c_suggest_low);
  j.kv("c_suggest_high", rep.c_suggest_high);
  if (rep.breakdown_reference)
    j.kv("breakdown_point_rx", *rep.breakdown_reference);
  j.end_object();
  j.end_object();
  *os.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// simsel

struct Histogram {
  std::vector<double> edges;
  std::vector<std::int64_t> counts;
};

Histogram histogram(const std::vector<double>& values, int bins) {
  Histogram h;
  if (values.empty()) return h;
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  h.edges.resize(std::size_t(bins) + 1);
  for (int i = 0; i <= bins; ++i)
    h.edges[std::size_t(i)] = lo + (hi - lo) * double(i) / double(bins);
  h.counts.assign(std::size_t(bins), 0);
  for (double v : values) {
    int b = int((v - lo) / (hi - lo) * double(bins));
    b = std::max(0, std::min(bins - 1, b));
    ++h.counts[std::size_t(b)];
  }
  return h;
}

int run_simsel(const InputConfig& in, const OutputConfig& outc,
               const std::string& dgp_name, int K, int d1, double rho,
               double C, double r, std::int64_t draws, std::uint64_t seed,
               int threads, bool demo_deltanonconv) {
  SelectionDgp dgp;
  if (!in.data_path.empty() || !in.cov_path.empty()) {
    auto model = load_model(in);
    if (!in.w0.empty()) model = partial_out(model, in.w0);
    dgp = make_dgp_from_covariance(model, in.y, in.x, in.w1);
  } else if (dgp_name == "deltanonconv") {
    dgp = make_dgp_delta_nonconv(C, r, rho, K);
  } else {
    DgpParams params;
    params.rho = rho;
    DgpKind kind;
    if (dgp_name == "ma1")
      kind = DgpKind::ma1;
    else if (dgp_name == "ar1")
      kind = DgpKind::ar1;
    else if (dgp_name == "exch")
      kind = DgpKind::exchangeable;
    else if (dgp_name == "factor")
      kind = DgpKind::factor;
    else
      throw CLI::ValidationError("--dgp", "unknown dgp kind: " + dgp_name);
    dgp = make_dgp(kind, params, K, seed);
  }
  if (d1 <= 0 || d1 >= dgp.K)
    throw CLI::ValidationError("--d1", "need 1 <= d1 <= K-1");

  const auto rx = covariate_sampling_distribution(dgp, d1, RatioKind::r_x,
                                                  draws, seed, threads);
  const auto dorig = covariate_sampling_distribution(
      dgp, d1, RatioKind::delta_orig, draws, seed, threads);
  const auto dresid = covariate_sampling_distribution(
      dgp, d1, RatioKind::delta_resid, draws, seed, threads);

  OutputStream os(outc.out_path);
  if (outc.format == "csv") {
    *os.out << "ratio,bin_lo,bin_hi,count\n";
    const auto emit = [&](const char* name, const std::vector<double>& vals) {
      const auto h = histogram(vals, 40);
      for (std::size_t b = 0; b < h.counts.size(); ++b)
        *os.out << name << ',' << fmt_num(h.edges[b]) << ','
                << fmt_num(h.edges[b + 1]) << ',' << h.counts[b] << "\n";
    };
    emit("r_x", rx.values);
    emit("delta_orig", dorig.values);
    emit("delta_resid", dresid.values);
    return 0;
  }

  const auto write_dist = [&](JsonWriter& j, const DistributionResult& d) {
    j.begin_object();
    j.key("summary");
    j.begin_object();
    j.kv("n", d.summary.n);
    j.kv("n_degenerate", d.summary.n_degenerate);
    j.kv("mode", d.summary.mode);
    j.kv("prob_le_1", d.summary.prob_le_1);
    j.kv("min", d.summary.min);
    j.kv("p25", d.summary.p25);
    j.kv("median", d.summary.median);
    j.kv("p75", d.summary.p75);
    j.kv("max", d.summary.max);
    j.kv("mean", d.summary.mean);
    j.kv("sd", d.summary.sd);
    j.kv("n_lt_1", d.summary.n_lt_1);
    j.kv("n_gt_1", d.summary.n_gt_1);
    j.end_object();
    const auto h = histogram(d.values, 40);
    j.key("histogram");
    j.begin_array();
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      j.begin_object();
      j.kv("lo", h.edges[b]);
      j.kv("hi", h.edges[b + 1]);
      j.kv("count", h.counts[b]);
      j.end_object();
    }
    j.end_array();
    j.end_object();
  };

  JsonWriter j(*os.out);
  j.begin_object();
  write_meta(j, "simsel", seed);
  j.key("inputs");
  j.begin_object();
  j.kv("dgp", dgp_kind_name(dgp.kind));
  j.kv("K", dgp.K);
  j.kv("d1", d1);
  j.kv("rho", dgp.rho);
  if (dgp.kind == DgpKind::delta_nonconv) {
    j.kv("C", C);
    j.kv("r", r);
  }
  j.kv("draws", draws);
  j.end_object();
  j.key("results");
  j.begin_object();
  j.kv("n_designs_total", std::int64_t(n_choose_k(dgp.K, d1)));
  j.key("r_x");
  write_dist(j, rx);
  j.key("delta_orig");
  write_dist(j, dorig);
  j.key("delta_resid");
  write_dist(j, dresid);
  if (demo_deltanonconv) {
    j.kv("delta_resid_mean_target", C);
    j.kv("delta_resid_mean_gap", dresid.summary.mean - C);
    j.kv("r_x_mean_gap", rx.summary.mean - 1.0);
  }
  j.end_object();
  j.end_object();
  *os.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify

int run_verify(const InputConfig& in, const OutputConfig& outc, double rx_bar,
               double ry_bar, double c_low, double c_high, std::int64_t draws,
               std::uint64_t seed, int threads) {
  (void)threads;
  const auto model = load_model(in);
  const auto nm = prepare(model);

  struct Line {
    std::string quantity;
    double closed_lo, closed_hi, oracle_lo, oracle_hi;
    bool pass;
  };
  std::vector<Line> lines;

  const auto closed = bounds_rx_c(nm, rx_bar, c_low, c_high);
  if (closed.finite) {
    SensitivityBudget budget;
    budget.rx_bar = rx_bar;
    budget.c_low = c_low;
    budget.c_high = c_high;
    const auto hull = brute_force_bounds(nm, budget, draws, seed);
    const double dev = closed.upper - closed.center;
    const double hull_dev = 0.5 * (hull.upper - hull.lower);
    const bool pass = hull.lower >= closed.lower - 1e-12 &&
                      hull.upper <= closed.upper + 1e-12 &&
                      (dev == 0.0 ? hull_dev <= 1e-12
                                  : std::abs(hull_dev - dev) <= 0.02 * dev);
    lines.push_back({"bounds_rx_c", closed.lower, closed.upper, hull.lower,
                     hull.upper, pass});
  }

  const double zclosed = zbar_x(rx_bar, c_low, c_high, nm.sigma_w1x.norm());
  if (std::isfinite(zclosed)) {
    const double zsearch = zbar_oracle(nm, rx_bar, c_low, c_high, 300, seed);
    const bool pass = zsearch <= zclosed * (1.0 + 1e-9) &&
                      std::abs(zsearch - zclosed) <= 0.01 * zclosed + 1e-12;
    lines.push_back({"zbar_x", zclosed, zclosed, zsearch, zsearch, pass});
  }

  if (std::isfinite(ry_bar)) {
    const auto joint = bounds_rx_ry(nm, rx_bar, ry_bar, c_low, c_high);
    if (joint.finite) {
      SensitivityBudget budget;
      budget.rx_bar = rx_bar;
      budget.ry_bar = ry_bar;
      budget.c_low = c_low;
      budget.c_high = c_high;
      const auto hull = brute_force_bounds(nm, budget, draws, seed);
      const double width = joint.upper - joint.lower;
      const bool pass = hull.lower >= joint.lower - 1e-6 * width &&
                        hull.upper <= joint.upper + 1e-6 * width &&
                        std::abs(hull.lower - joint.lower) <= 0.02 * width &&
                        std::abs(hull.upper - joint.upper) <= 0.02 * width;
      lines.push_back({"bounds_rx_ry", joint.lower, joint.upper, hull.lower,
                       hull.upper, pass});
    }
  }

  OutputStream os(outc.out_path);
  if (outc.format == "csv") {
    *os.out << "quantity,closed_lower,closed_upper,oracle_lower,oracle_upper,"
               "pass\n";
    for (const auto& l : lines)
      *os.out << l.quantity << ',' << fmt_num(l.closed_lo) << ','
              << fmt_num(l.closed_hi) << ',' << fmt_num(l.oracle_lo) << ','
              << fmt_num(l.oracle_hi) << ',' << (l.pass ? 1 : 0) << "\n";
  } else {
    JsonWriter j(*os.out);
    j.begin_object();
    write_meta(j, "verify", seed);
    write_inputs(j, in);
    j.key("results");
    j.begin_object();
    j.kv("rx_bar", rx_bar);
    j.kv("ry_bar", ry_bar);
    j.kv("c_low", c_low);
    j.kv("c_high", c_high);
    j.kv("n_samples", draws);
    j.key("checks");
    j.begin_array();
    for (const auto& l : lines) {
      j.begin_object();
      j.kv("quantity", l.quantity);
      j.kv("closed_lower", l.closed_lo);
      j.kv("closed_upper", l.closed_hi);
      j.kv("oracle_lower", l.oracle_lo);
      j.kv("oracle_upper", l.oracle_hi);
      j.kv("pass", l.pass);
      j.end_object();
    }
    j.end_array();
    j.end_object();
    j.end_object();
    *os.out << "\n";
  }
  bool all = true;
  for (const auto& l : lines) all = all && l.pass;
  return all ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Omitted-variable-bias sensitivity analysis for linear "
               "regression with endogenous controls"};
  app.require_subcommand(1);

  InputConfig in;
  OutputConfig outc;
  std::string w1_list, w0_list;
  std::uint64_t seed = 12345;
  int threads_flag = 0;
  std::int64_t draws = 100000;

  const auto add_common = [&](CLI::App* sub, bool needs_input) {
    if (needs_input) {
      sub->add_option("--data", in.data_path, "CSV dataset path");
      sub->add_option("--cov", in.cov_path, "covariance CSV path");
      sub->add_option("--y", in.y, "outcome column");
      sub->add_option("--x", in.x, "treatment column");
      sub->add_option("--w1", w1_list, "calibration covariates, comma list");
      sub->add_option("--w0", w0_list, "control covariates, comma list");
    }
    sub->add_option("--out", outc.out_path, "output path (default stdout)");
    sub->add_option("--format", outc.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--threads", threads_flag,
                    "worker threads (or OVBSENS_THREADS)");
  };

  // bounds
  auto* sb = app.add_subcommand("bounds", "identified set as rx_bar grows");
  std::string rx_grid = "0:0.05:1";
  double c_low = 0.0, c_high = 1.0;
  double ry_bar = std::numeric_limits<double>::infinity();
  bool verify = false;
  add_common(sb, true);
  sb->add_option("--rx-grid", rx_grid, "rx grid start:step:stop");
  sb->add_option("--ry", ry_bar,
                 "also restrict the outcome equation (joint budget)");
  sb->add_option("--clow", c_low, "lower bound on control endogeneity");
  sb->add_option("--chigh", c_high, "upper bound on control endogeneity");
  sb->add_flag("--verify", verify, "append oracle agreement columns");
  sb->add_option("--draws", draws, "oracle sample count");

  // breakdown
  auto* sk = app.add_subcommand("breakdown", "breakdown points");
  double b_low = 0.0;
  int sim_d1 = 0;
  add_common(sk, true);
  sk->add_option("--blow", b_low, "conclusion threshold");
  sk->add_option("--clow", c_low, "lower bound on control endogeneity");
  sk->add_option("--chigh", c_high, "upper bound on control endogeneity");
  sk->add_option("--d1", sim_d1,
                 "also report covariate-sampling summaries at this d1");
  sk->add_option("--draws", draws, "sampling draws when enumeration is large");

  // frontier
  auto* sf = app.add_subcommand("frontier", "breakdown frontier curves");
  std::string chigh_list = "1";
  add_common(sf, true);
  sf->add_option("--rx-grid", rx_grid, "rx grid start:step:stop");
  sf->add_option("--blow", b_low, "conclusion threshold");
  sf->add_option("--clow", c_low, "lower bound on control endogeneity");
  sf->add_option("--chigh", chigh_list,
                 "comma list of c_high values, one curve each");

  // calibrate
  auto* sc = app.add_subcommand("calibrate", "rho_k and c_k diagnostics");
  add_common(sc, true);

  // simsel
  auto* ss = app.add_subcommand("simsel",
                                "covariate sampling distributions");
  std::string dgp_name = "exch";
  int K = 22;
  int d1 = 11;
  double rho = 0.5, C = 1.0, r = 1.0;
  bool demo = false;
  add_common(ss, true);
  ss->add_option("--dgp", dgp_name, "ma1|ar1|exch|factor|deltanonconv");
  ss->add_option("--K", K, "number of potentially observable covariates");
  ss->add_option("--d1", d1, "number observed");
  ss->add_option("--rho", rho, "dgp correlation parameter");
  ss->add_option("--C", C, "delta-nonconv target constant");
  ss->add_option("--r", r, "delta-nonconv d2/d1 ratio");
  ss->add_option("--draws", draws, "draws when enumeration exceeds the cap");
  ss->add_flag("--demo-deltanonconv", demo,
               "report the gap to the target constant");

  // verify
  auto* sv = app.add_subcommand("verify", "oracle agreement report");
  double rx_bar = 0.3;
  add_common(sv, true);
  sv->add_option("--rx", rx_bar, "rx budget");
  sv->add_option("--ry", ry_bar, "ry budget (omit for unrestricted)");
  sv->add_option("--clow", c_low, "lower bound on control endogeneity");
  sv->add_option("--chigh", c_high, "upper bound on control endogeneity");
  sv->add_option("--draws", draws, "oracle sample count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  in.w1 = split_list(w1_list);
  in.w0 = split_list(w0_list);
  const int threads = resolve_threads(threads_flag);

  try {
    if (sb->parsed())
      return run_bounds(in, outc, rx_grid, ry_bar, c_low, c_high, verify,
                        draws, seed, threads);
    if (sk->parsed())
      return run_breakdown(in, outc, b_low, c_low, c_high, sim_d1, draws,
                           seed, threads);
    if (sf->parsed())
      return run_frontier(in, outc, rx_grid, b_low, c_low, chigh_list, seed,
                          threads);
    if (sc->parsed()) return run_calibrate(in, outc, seed, threads);
    if (ss->parsed())
      return run_simsel(in, outc, dgp_name, K, d1, rho, C, r, draws, seed,
                        threads, demo);
    if (sv->parsed())
      return run_verify(in, outc, rx_bar, ry_bar, c_low, c_high, draws, seed,
                        threads);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
