// case_io.hpp
//
// Grid case parsing (MATPOWER-style .m text tables), case serialization,
// and dataset handling: min-max normalization to [0,1], CSV persistence
// with a JSON sidecar carrying the normalization metadata and RNG seed.

#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrc/csv.hpp"
#include "mrc/linalg.hpp"

namespace mrc::case_io {

enum class BusType { slack, pv, pq };

struct Bus {
  int id = 0;
  BusType type = BusType::pq;
  double pd = 0, qd = 0;    // p.u. load
  double gs = 0, bs = 0;    // p.u. shunt
  double v_setpoint = 1.0;  // used for slack and PV buses
};

struct Branch {
  int from = 0, to = 0;
  double r = 0, x = 0;
  double b_charge = 0;  // total line charging susceptance, p.u.
  double tap = 1.0;     // off-nominal ratio, from side; 1.0 = none
  bool in_service = true;

  double series_g() const { return r / (r * r + x * x); }
  double series_b() const { return -x / (r * r + x * x); }
};

struct Gen {
  int bus = 0;
  double pg = 0, qg = 0;  // p.u.
  double v_setpoint = 1.0;
  double qmin = -1e9, qmax = 1e9;  // p.u.
};

struct ParseError : std::runtime_error {
  int line;
  ParseError(int ln, const std::string& msg)
      : std::runtime_error("parse error (line " + std::to_string(ln) + "): " + msg), line(ln) {}
};

struct SemanticError : std::runtime_error {
  explicit SemanticError(const std::string& msg) : std::runtime_error("case error: " + msg) {}
};

struct GridCase {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Gen> gens;
  std::vector<std::string> warnings;
  std::string name;

  int bus_pos(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == id) return static_cast<int>(i);
    throw SemanticError("unknown bus id " + std::to_string(id));
  }

  void validate() const {
    int slack_count = 0;
    for (const auto& b : buses)
      if (b.type == BusType::slack) ++slack_count;
    if (slack_count != 1)
      throw SemanticError("expected exactly one slack bus, found " + std::to_string(slack_count));
    for (const auto& br : branches) {
      bus_pos(br.from);
      bus_pos(br.to);
      if (br.in_service && br.r * br.r + br.x * br.x <= 0.0)
        throw SemanticError("zero-impedance in-service branch " + std::to_string(br.from) + "-" +
                            std::to_string(br.to));
    }
    for (const auto& g : gens) bus_pos(g.bus);
  }
};

// --------------------------------------------------------------------------
// MATPOWER-style parser
// --------------------------------------------------------------------------
namespace detail {

struct Matrix {
  std::vector<std::vector<double>> rows;
  int line = 0;
};

// strips % comments, keeps line structure
inline std::string strip_comments(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool comment = false;
  for (char c : text) {
    if (c == '%') comment = true;
    if (c == '\n') comment = false;
    out.push_back(comment ? (c == '\n' ? '\n' : ' ') : c);
  }
  return out;
}

inline std::optional<Matrix> find_matrix(const std::string& text, const std::string& key) {
  const std::string pat = "mpc." + key;
  std::size_t pos = 0;
  while (true) {
    pos = text.find(pat, pos);
    if (pos == std::string::npos) return std::nullopt;
    std::size_t q = pos + pat.size();
    while (q < text.size() && std::isspace(static_cast<unsigned char>(text[q]))) ++q;
    if (q < text.size() && text[q] == '=') break;
    pos += pat.size();
  }
  auto line_of = [&](std::size_t p) {
    int ln = 1;
    for (std::size_t i = 0; i < p && i < text.size(); ++i)
      if (text[i] == '\n') ++ln;
    return ln;
  };
  std::size_t open = text.find('[', pos);
  if (open == std::string::npos) throw ParseError(line_of(pos), "expected '[' after mpc." + key);
  std::size_t close = text.find(']', open);
  if (close == std::string::npos) throw ParseError(line_of(open), "unterminated matrix mpc." + key);

  Matrix m;
  m.line = line_of(pos);
  std::vector<double> row;
  std::string tok;
  int ln = line_of(open);
  auto flush_tok = [&]() {
    if (tok.empty()) return;
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      row.push_back(v);
    } catch (...) {
      throw ParseError(ln, "bad number '" + tok + "' in mpc." + key);
    }
    tok.clear();
  };
  auto flush_row = [&]() {
    flush_tok();
    if (!row.empty()) m.rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = open + 1; i < close; ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++ln;
      flush_row();
    } else if (c == ';') {
      flush_row();
    } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      flush_tok();
    } else {
      tok.push_back(c);
    }
  }
  flush_row();
  return m;
}

inline double scalar_after(const std::string& text, const std::string& key, double fallback, bool& found) {
  const std::string pat = "mpc." + key;
  std::size_t pos = text.find(pat);
  found = false;
  if (pos == std::string::npos) return fallback;
  std::size_t q = text.find('=', pos);
  if (q == std::string::npos) return fallback;
  ++q;
  while (q < text.size() && (std::isspace(static_cast<unsigned char>(text[q])))) ++q;
  std::size_t end = q;
  while (end < text.size() && text[end] != ';' && text[end] != '\n') ++end;
  try {
    found = true;
    return std::stod(text.substr(q, end - q));
  } catch (...) {
    return fallback;
  }
}

}  // namespace detail

inline GridCase parse_case(const std::string& raw_text) {
  const std::string text = detail::strip_comments(raw_text);
  GridCase gc;

  bool found = false;
  gc.base_mva = detail::scalar_after(text, "baseMVA", 100.0, found);
  if (!found) throw ParseError(1, "missing mpc.baseMVA");
  if (gc.base_mva <= 0) throw SemanticError("baseMVA must be positive");

  auto bus = detail::find_matrix(text, "bus");
  auto gen = detail::find_matrix(text, "gen");
  auto branch = detail::find_matrix(text, "branch");
  if (!bus) throw ParseError(1, "missing mpc.bus matrix");
  if (!gen) throw ParseError(1, "missing mpc.gen matrix");
  if (!branch) throw ParseError(1, "missing mpc.branch matrix");

  for (const char* extra : {"gencost", "dcline", "areas"})
    if (text.find(std::string("mpc.") + extra) != std::string::npos)
      gc.warnings.push_back(std::string("ignored unsupported table mpc.") + extra);

  const double base = gc.base_mva;
  for (const auto& r : bus->rows) {
    if (r.size() < 9) throw ParseError(bus->line, "bus row needs at least 9 columns");
    Bus b;
    b.id = static_cast<int>(r[0]);
    const int t = static_cast<int>(r[1]);
    if (t == 3) b.type = BusType::slack;
    else if (t == 2) b.type = BusType::pv;
    else if (t == 1) b.type = BusType::pq;
    else throw SemanticError("unsupported bus type " + std::to_string(t) + " at bus " + std::to_string(b.id));
    b.pd = r[2] / base;
    b.qd = r[3] / base;
    b.gs = r[4] / base;
    b.bs = r[5] / base;
    b.v_setpoint = r[7] > 0 ? r[7] : 1.0;
    gc.buses.push_back(b);
  }
  for (const auto& r : gen->rows) {
    if (r.size() < 6) throw ParseError(gen->line, "gen row needs at least 6 columns");
    const bool in_service = r.size() < 8 || r[7] > 0;
    if (!in_service) {
      gc.warnings.push_back("skipped out-of-service generator at bus " + std::to_string(static_cast<int>(r[0])));
      continue;
    }
    Gen g;
    g.bus = static_cast<int>(r[0]);
    g.pg = r[1] / base;
    g.qg = r[2] / base;
    g.qmax = r[3] / base;
    g.qmin = r[4] / base;
    g.v_setpoint = r[5] > 0 ? r[5] : 1.0;
    gc.gens.push_back(g);
  }
  for (const auto& r : branch->rows) {
    if (r.size() < 5) throw ParseError(branch->line, "branch row needs at least 5 columns");
    Branch br;
    br.from = static_cast<int>(r[0]);
    br.to = static_cast<int>(r[1]);
    br.r = r[2];
    br.x = r[3];
    br.b_charge = r[4];
    br.tap = (r.size() > 8 && r[8] != 0.0) ? r[8] : 1.0;
    br.in_service = r.size() <= 10 || r[10] > 0;
    gc.branches.push_back(br);
  }

  // PV setpoints come from the generator table; PV buses without an
  // in-service generator are demoted to PQ (load-only bus)
  for (auto& b : gc.buses) {
    if (b.type == BusType::pq) continue;
    bool has_gen = false;
    for (const auto& g : gc.gens)
      if (g.bus == b.id) {
        b.v_setpoint = g.v_setpoint;
        has_gen = true;
      }
    if (!has_gen) {
      if (b.type == BusType::slack) throw SemanticError("slack bus has no in-service generator");
      gc.warnings.push_back("PV bus " + std::to_string(b.id) + " has no generator; treated as PQ");
      b.type = BusType::pq;
    }
  }

  gc.validate();
  return gc;
}

inline GridCase parse_case_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open case file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  GridCase gc = parse_case(ss.str());
  gc.name = path;
  return gc;
}

inline std::string serialize(const GridCase& gc) {
  std::ostringstream os;
  const double base = gc.base_mva;
  os << "function mpc = case_export\n";
  os << "mpc.version = '2';\n";
  os << "mpc.baseMVA = " << fmt_g17(base) << ";\n";
  os << "mpc.bus = [\n";
  for (const auto& b : gc.buses) {
    const int t = b.type == BusType::slack ? 3 : (b.type == BusType::pv ? 2 : 1);
    os << "\t" << b.id << "\t" << t << "\t" << fmt_g17(b.pd * base) << "\t" << fmt_g17(b.qd * base) << "\t"
       << fmt_g17(b.gs * base) << "\t" << fmt_g17(b.bs * base) << "\t1\t" << fmt_g17(b.v_setpoint)
       << "\t0\t345\t1\t1.06\t0.94;\n";
  }
  os << "];\n";
  os << "mpc.gen = [\n";
  for (const auto& g : gc.gens) {
    os << "\t" << g.bus << "\t" << fmt_g17(g.pg * base) << "\t" << fmt_g17(g.qg * base) << "\t"
       << fmt_g17(g.qmax * base) << "\t" << fmt_g17(g.qmin * base) << "\t" << fmt_g17(g.v_setpoint)
       << "\t" << fmt_g17(base) << "\t1\t0\t0;\n";
  }
  os << "];\n";
  os << "mpc.branch = [\n";
  for (const auto& br : gc.branches) {
    os << "\t" << br.from << "\t" << br.to << "\t" << fmt_g17(br.r) << "\t" << fmt_g17(br.x) << "\t"
       << fmt_g17(br.b_charge) << "\t0\t0\t0\t" << fmt_g17(br.tap == 1.0 ? 0.0 : br.tap) << "\t0\t"
       << (br.in_service ? 1 : 0) << "\t-360\t360;\n";
  }
  os << "];\n";
  return os.str();
}

// --------------------------------------------------------------------------
// Dataset: normalized feature/target matrix
// --------------------------------------------------------------------------
struct ColNorm {
  std::string name;
  double min = 0, max = 1;
  bool constant = false;
};

struct Dataset {
  int m = 0;
  std::vector<std::string> feature_names;
  std::string target_name;
  Mat x;                  // m x p, normalized to [0,1]
  std::vector<double> y;  // m, normalized to [0,1]
  std::vector<ColNorm> norm;  // features followed by target
  nlohmann::json provenance;  // seed, scenario, case info

  int p() const { return x.cols(); }
  const ColNorm& target_norm() const { return norm.back(); }

  double denorm_target(double v) const {
    const auto& c = norm.back();
    return c.constant ? c.min : c.min + v * (c.max - c.min);
  }
  double target_range() const {
    const auto& c = norm.back();
    return c.constant ? 0.0 : c.max - c.min;
  }
};

// raw: m x (p+1) matrix, last column is the target
inline Dataset normalize(const Mat& raw, const std::vector<std::string>& names) {
  if (raw.cols() != static_cast<int>(names.size()))
    throw std::invalid_argument("normalize: names/columns mismatch");
  if (raw.rows() < 1) throw std::invalid_argument("normalize: empty matrix");
  for (int i = 0; i < raw.rows(); ++i)
    for (int j = 0; j < raw.cols(); ++j)
      if (!std::isfinite(raw(i, j))) throw std::invalid_argument("normalize: NaN/Inf in input");

  Dataset d;
  d.m = raw.rows();
  const int p = raw.cols() - 1;
  d.feature_names.assign(names.begin(), names.end() - 1);
  d.target_name = names.back();
  d.x = Mat(d.m, p);
  d.y.resize(d.m);
  d.norm.resize(p + 1);
  for (int j = 0; j <= p; ++j) {
    double lo = raw(0, j), hi = raw(0, j);
    for (int i = 1; i < d.m; ++i) {
      lo = std::min(lo, raw(i, j));
      hi = std::max(hi, raw(i, j));
    }
    ColNorm c;
    c.name = names[j];
    c.min = lo;
    c.max = hi;
    c.constant = (hi - lo) <= 1e-12 * std::max(1.0, std::abs(hi));
    if (c.constant) c.max = c.min;  // canonical
    d.norm[j] = c;
    for (int i = 0; i < d.m; ++i) {
      const double v = c.constant ? 0.5 : (raw(i, j) - c.min) / (c.max - c.min);
      if (j < p) d.x(i, j) = v;
      else d.y[i] = v;
    }
  }
  return d;
}

// normalize raw data against existing column metadata (no re-fitting);
// used when several generated datasets must share one scale
inline Dataset normalize_with(const Mat& raw, const std::vector<std::string>& names,
                              const std::vector<ColNorm>& meta) {
  if (raw.cols() != static_cast<int>(names.size()) || raw.cols() != static_cast<int>(meta.size()))
    throw std::invalid_argument("normalize_with: shape mismatch");
  Dataset d;
  d.m = raw.rows();
  const int p = raw.cols() - 1;
  d.feature_names.assign(names.begin(), names.end() - 1);
  d.target_name = names.back();
  d.norm = meta;
  d.x = Mat(d.m, p);
  d.y.resize(d.m);
  for (int j = 0; j <= p; ++j) {
    const auto& c = meta[j];
    for (int i = 0; i < d.m; ++i) {
      const double v = c.constant ? 0.5 : (raw(i, j) - c.min) / (c.max - c.min);
      if (j < p) d.x(i, j) = v;
      else d.y[i] = v;
    }
  }
  return d;
}

inline Mat denormalize(const Dataset& d) {
  const int p = d.p();
  Mat raw(d.m, p + 1);
  for (int j = 0; j <= p; ++j) {
    const auto& c = d.norm[j];
    for (int i = 0; i < d.m; ++i) {
      const double v = (j < p) ? d.x(i, j) : d.y[i];
      raw(i, j) = c.constant ? c.min : c.min + v * (c.max - c.min);
    }
  }
  return raw;
}

inline void save_dataset(const Dataset& d, const std::string& csv_path) {
  CsvTable t;
  t.header = d.feature_names;
  t.header.push_back(d.target_name);
  t.rows.resize(d.m);
  for (int i = 0; i < d.m; ++i) {
    auto& row = t.rows[i];
    row.resize(d.p() + 1);
    for (int j = 0; j < d.p(); ++j) row[j] = d.x(i, j);
    row[d.p()] = d.y[i];
  }
  write_csv(csv_path, t);

  nlohmann::json meta;
  meta["feature_names"] = d.feature_names;
  meta["target"] = d.target_name;
  nlohmann::json norms = nlohmann::json::array();
  for (const auto& c : d.norm)
    norms.push_back({{"name", c.name}, {"min", c.min}, {"max", c.max}, {"constant", c.constant}});
  meta["norm"] = norms;
  meta["provenance"] = d.provenance;
  std::string meta_path = csv_path;
  if (meta_path.size() > 4 && meta_path.substr(meta_path.size() - 4) == ".csv")
    meta_path = meta_path.substr(0, meta_path.size() - 4);
  meta_path += ".meta.json";
  std::ofstream ms(meta_path);
  if (!ms) throw std::runtime_error("cannot write " + meta_path);
  ms << meta.dump(2) << "\n";
}

inline Dataset load_dataset(const std::string& csv_path) {
  CsvTable t = read_csv(csv_path);
  std::string meta_path = csv_path;
  if (meta_path.size() > 4 && meta_path.substr(meta_path.size() - 4) == ".csv")
    meta_path = meta_path.substr(0, meta_path.size() - 4);
  meta_path += ".meta.json";
  std::ifstream ms(meta_path);
  if (!ms) throw std::invalid_argument("missing dataset sidecar " + meta_path);
  nlohmann::json meta = nlohmann::json::parse(ms);

  Dataset d;
  d.m = static_cast<int>(t.rows.size());
  const int pc = static_cast<int>(t.header.size());
  d.feature_names.assign(t.header.begin(), t.header.end() - 1);
  d.target_name = t.header.back();
  d.x = Mat(d.m, pc - 1);
  d.y.resize(d.m);
  for (int i = 0; i < d.m; ++i) {
    if (static_cast<int>(t.rows[i].size()) != pc) throw std::runtime_error("ragged dataset csv");
    for (int j = 0; j < pc - 1; ++j) d.x(i, j) = t.rows[i][j];
    d.y[i] = t.rows[i][pc - 1];
  }
  for (const auto& jn : meta.at("norm")) {
    ColNorm c;
    c.name = jn.at("name").get<std::string>();
    c.min = jn.at("min").get<double>();
    c.max = jn.at("max").get<double>();
    c.constant = jn.at("constant").get<bool>();
    d.norm.push_back(c);
  }
  if (meta.contains("provenance")) d.provenance = meta["provenance"];
  if (static_cast<int>(d.norm.size()) != pc) throw std::runtime_error("norm metadata does not match columns");
  return d;
}

}  // namespace mrc::case_io
