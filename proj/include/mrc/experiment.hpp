// experiment.hpp
//
// Config-driven experiment orchestration behind the CLI: parse a sectioned
// key=value config, run generate -> train -> certify cells (optionally over
// an m x knowledge x model sweep), run the gap stage, and emit an artifact
// directory with datasets, models, report.json, CSV tables, SVG figures and
// a manifest. Any stage failure leaves a FAILED marker naming the stage.
//
// All randomness is derived from one master seed; datasets and sigma draws
// are shared across knowledge settings at the same sample size, which the
// dominance comparisons rely on.

#pragma once

#include <cctype>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrc/bound.hpp"
#include "mrc/case_io.hpp"
#include "mrc/csv.hpp"
#include "mrc/hypothesis.hpp"
#include "mrc/knowledge.hpp"
#include "mrc/powerflow.hpp"
#include "mrc/rademacher.hpp"
#include "mrc/svg.hpp"

namespace mrc::experiment {

inline constexpr const char* kToolVersion = "0.1.0";

// --------------------------------------------------------------------------
// Config: sections of key = value lines, '#' comments
// --------------------------------------------------------------------------
class Config {
 public:
  static Config parse(const std::string& text) {
    Config cfg;
    cfg.raw_ = text;
    std::istringstream is(text);
    std::string line, section = "global";
    int ln = 0;
    while (std::getline(is, line)) {
      ++ln;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(ln) + ": expected key = value");
      cfg.values_[section + "." + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  std::string require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("config missing required key '" + key + "'");
    return it->second;
  }
  double get_num(const std::string& key, double fallback) const {
    return has(key) ? std::stod(get(key)) : fallback;
  }
  long get_int(const std::string& key, long fallback) const {
    return has(key) ? std::stol(get(key)) : fallback;
  }
  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto a = item.find_first_not_of(" \t");
      const auto b = item.find_last_not_of(" \t");
      if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    return out;
  }
  std::vector<int> get_ints(const std::string& key) const {
    std::vector<int> out;
    for (const auto& s : get_list(key)) out.push_back(std::stoi(s));
    return out;
  }
  const std::string& raw() const { return raw_; }

 private:
  std::map<std::string, std::string> values_;
  std::string raw_;
};

// --------------------------------------------------------------------------
// Target spec: "branch:16-17:Q" or "border:17:P"
// --------------------------------------------------------------------------
struct TargetSpec {
  bool border = false;
  int from = 0, to = 0;
  int bus = 0;
  bool reactive = false;
  bool svr_inputs = false;
  std::vector<int> border_buses, internal_buses;

  static TargetSpec parse(const std::string& text) {
    TargetSpec t;
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw std::invalid_argument("target spec must be kind:where:quantity, got '" + text + "'");
    const std::string& kind = parts[0];
    const std::string& qty = parts[2];
    if (qty != "P" && qty != "Q") throw std::invalid_argument("target quantity must be P or Q");
    t.reactive = qty == "Q";
    if (kind == "branch") {
      const auto dash = parts[1].find('-');
      if (dash == std::string::npos) throw std::invalid_argument("branch target needs from-to");
      t.from = std::stoi(parts[1].substr(0, dash));
      t.to = std::stoi(parts[1].substr(dash + 1));
    } else if (kind == "border") {
      t.border = true;
      t.bus = std::stoi(parts[1]);
    } else {
      throw std::invalid_argument("target kind must be branch or border");
    }
    return t;
  }

  powerflow::RawDataset extract(const case_io::GridCase& gc,
                                const std::vector<powerflow::Snapshot>& snaps) const {
    if (!border) {
      powerflow::BranchFlowTarget bt;
      bt.from = from;
      bt.to = to;
      bt.reactive = reactive;
      return powerflow::extract_features(gc, snaps, bt);
    }
    powerflow::BorderBusTarget bt;
    bt.bus = bus;
    bt.reactive = reactive;
    bt.border_buses = border_buses;
    bt.internal_buses = internal_buses;
    bt.svr_inputs = svr_inputs;
    return powerflow::extract_features(gc, snaps, bt);
  }

  bound::GapTarget gap_target() const {
    bound::GapTarget g;
    if (!border) {
      powerflow::BranchFlowTarget bt;
      bt.from = from;
      bt.to = to;
      bt.reactive = reactive;
      g.target = bt;
    } else {
      powerflow::BorderBusTarget bt;
      bt.bus = bus;
      bt.reactive = reactive;
      bt.border_buses = border_buses;
      bt.internal_buses = internal_buses;
      bt.svr_inputs = svr_inputs;
      g.target = bt;
    }
    return g;
  }
};

// --------------------------------------------------------------------------
// Knowledge spec: none | angle(delta) | box(auto) | box(path) | svr(C,eps)
// --------------------------------------------------------------------------
struct KnowledgeSpec {
  enum class Kind { none, angle, box_auto, box_file, svr } kind = Kind::none;
  double angle_delta = 1e-2;
  std::string box_path;
  double svr_c = 0.2, svr_eps = 0.01;

  static KnowledgeSpec parse(const std::string& text) {
    KnowledgeSpec k;
    auto args_of = [&](const std::string& s) {
      const auto open = s.find('(');
      const auto close = s.rfind(')');
      if (open == std::string::npos || close == std::string::npos || close < open)
        throw std::invalid_argument("knowledge spec needs parentheses: " + s);
      return s.substr(open + 1, close - open - 1);
    };
    if (text == "none" || text.empty()) {
      k.kind = Kind::none;
    } else if (text.rfind("angle", 0) == 0) {
      k.kind = Kind::angle;
      k.angle_delta = std::stod(args_of(text));
      if (k.angle_delta < 0) throw std::invalid_argument("angle delta must be >= 0");
    } else if (text.rfind("box", 0) == 0) {
      const std::string arg = args_of(text);
      if (arg == "auto") {
        k.kind = Kind::box_auto;
      } else {
        k.kind = Kind::box_file;
        k.box_path = arg;
      }
    } else if (text.rfind("svr", 0) == 0) {
      k.kind = Kind::svr;
      const std::string arg = args_of(text);
      const auto comma = arg.find(',');
      if (comma == std::string::npos) throw std::invalid_argument("svr knowledge needs svr(C,eps)");
      k.svr_c = std::stod(arg.substr(0, comma));
      k.svr_eps = std::stod(arg.substr(comma + 1));
    } else {
      throw std::invalid_argument("unknown knowledge spec '" + text + "'");
    }
    return k;
  }

  std::string canonical() const {
    switch (kind) {
      case Kind::none: return "none";
      case Kind::angle: return "angle(" + fmt_g17(angle_delta) + ")";
      case Kind::box_auto: return "box(auto)";
      case Kind::box_file: return "box(" + box_path + ")";
      case Kind::svr: return "svr(" + fmt_g17(svr_c) + "," + fmt_g17(svr_eps) + ")";
    }
    return "none";
  }
};

// Build the constraint set for a dataset/target. The automatic box for a
// branch target comes from the branch-flow sensitivity recipe intersected
// with the angle-coupling strip; for a border target from the
// admittance/load scale box. Derived boxes are returned as data (physical
// bounds) so callers can persist them.
struct BuiltKnowledge {
  knowledge::ConstraintSet cs;
  std::optional<knowledge::PhysBox> derived_box;
};

inline BuiltKnowledge build_knowledge(const KnowledgeSpec& spec, const case_io::GridCase& gc,
                                      const TargetSpec& target, const case_io::Dataset& d,
                                      double angle_delta_default = 1e-2) {
  BuiltKnowledge out;
  const int np = d.p() + 1;
  switch (spec.kind) {
    case KnowledgeSpec::Kind::none:
      out.cs = knowledge::none();
      out.cs.dim = np;
      break;
    case KnowledgeSpec::Kind::angle: {
      if (target.border) throw std::invalid_argument("angle knowledge applies to branch-flow targets");
      // regressor order: vi2, vj2, theta_i, theta_j, intercept
      out.cs = knowledge::angle_constraint(np, 2, 3, spec.angle_delta);
      break;
    }
    case KnowledgeSpec::Kind::box_auto: {
      if (!target.border) {
        const int bi = powerflow::find_branch(gc, target.from, target.to);
        const auto& br = gc.branches[bi];
        knowledge::PhysBox box = knowledge::branch_flow_box(br.series_g(), br.series_b(), target.reactive);
        out.derived_box = box;
        auto cs_box = knowledge::phys_box_to_norm(box.lb, box.ub, d, "box(auto)");
        // keep the box inside the angle strip: the coupling is part of the
        // same first-order structure the box is derived from
        auto cs_angle = knowledge::angle_constraint(np, 2, 3, angle_delta_default);
        out.cs = knowledge::intersect(cs_box, cs_angle);
        out.cs.description = "box(auto)";
      } else {
        knowledge::PhysBox box = knowledge::external_box(gc, d.p());
        out.derived_box = box;
        out.cs = knowledge::phys_box_to_norm(box.lb, box.ub, d, "box(auto)");
      }
      break;
    }
    case KnowledgeSpec::Kind::box_file: {
      std::ifstream is(spec.box_path);
      if (!is) throw std::invalid_argument("cannot open box file " + spec.box_path);
      nlohmann::json j = nlohmann::json::parse(is);
      std::vector<double> lb = j.at("lb").get<std::vector<double>>();
      std::vector<double> ub = j.at("ub").get<std::vector<double>>();
      out.cs = knowledge::phys_box_to_norm(lb, ub, d, "box(" + spec.box_path + ")");
      break;
    }
    case KnowledgeSpec::Kind::svr:
      out.cs = knowledge::svr_structure(spec.svr_c, spec.svr_eps);
      break;
  }
  return out;
}

// --------------------------------------------------------------------------
// Orchestrated run
// --------------------------------------------------------------------------
struct CellResult {
  int m = 0;
  std::string knowledge, model;
  bound::BoundReport report;
};

struct RunResult {
  std::filesystem::path dir;
  std::vector<CellResult> cells;
  std::optional<bound::GapReport> gap;
};

namespace detail {

inline std::uint64_t text_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline std::string sanitize(std::string s) {
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

}  // namespace detail

inline RunResult run_config(const Config& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  RunResult result;
  result.dir = out_dir;
  fs::create_directories(out_dir);
  std::string stage = "setup";
  auto fail_marker = [&](const std::string& what) {
    std::ofstream f(out_dir / "FAILED");
    f << "stage: " << stage << "\n" << what << "\n";
  };

  try {
    std::ofstream snap(out_dir / "config.snapshot.cfg");
    snap << cfg.raw();
    snap.close();

    stage = "case";
    const std::string case_path = cfg.require("case.file");
    case_io::GridCase gc = case_io::parse_case_file(case_path);

    stage = "target";
    TargetSpec target = TargetSpec::parse(cfg.require("target.spec"));
    if (target.border) {
      target.border_buses = cfg.get_ints("target.border");
      target.internal_buses = cfg.get_ints("target.internal");
      if (target.border_buses.empty() || target.internal_buses.empty())
        throw std::invalid_argument("border target needs target.border and target.internal lists");
    }

    const std::uint64_t master_seed = static_cast<std::uint64_t>(cfg.get_int("experiment.seed", 1));
    const double lo = cfg.has("scenario.range") ? std::stod(cfg.get_list("scenario.range").at(0)) : 0.95;
    const double hi = cfg.has("scenario.range") ? std::stod(cfg.get_list("scenario.range").at(1)) : 1.05;
    const int count = static_cast<int>(cfg.get_int("scenario.count", 300));
    if (count < 1) throw std::invalid_argument("scenario.count must be >= 1");

    // sweep lists (single cell if absent)
    std::vector<int> m_list;
    if (cfg.has("sweep.m"))
      for (int v : cfg.get_ints("sweep.m")) m_list.push_back(v);
    else
      m_list.push_back(count);
    std::vector<std::string> knowledge_list =
        cfg.has("sweep.knowledge") ? cfg.get_list("sweep.knowledge")
                                   : std::vector<std::string>{cfg.get("knowledge.spec", "none")};
    std::vector<std::string> model_list = cfg.has("sweep.model")
                                              ? cfg.get_list("sweep.model")
                                              : std::vector<std::string>{cfg.get("model.kind", "lr")};

    bound::CertifyOptions copt;
    copt.delta = cfg.get_num("bound.delta", 0.05);
    copt.n = static_cast<int>(cfg.get_int("bound.n", 10));
    copt.max_iters = static_cast<int>(cfg.get_int("bound.max_iters", 10));
    copt.e0 = cfg.get_num("bound.e0", 1.0);
    copt.k.samp = cfg.get_num("bound.k_samp", 1.4);
    copt.erc.sup.target_gap = cfg.get_num("bound.erc_gap", 1e-7);
    copt.erc.threads = static_cast<int>(cfg.get_int("bound.threads", 0));
    copt.erc.sup.spatial_seconds = cfg.get_num("bound.sup_seconds", 900.0);

    const double svr_C = cfg.get_num("model.C", 0.2);
    const double svr_eps = cfg.get_num("model.eps", 0.01);
    const double svr_kc = cfg.get_num("model.kernel_c", 1.0);

    std::set<std::string> seen_cells;
    nlohmann::json report_cells = nlohmann::json::array();
    CsvTable curve;
    curve.header = {"m", "setting_index", "final_bound", "final_gap_bound", "steps"};
    std::vector<std::string> setting_names;

    for (int m : m_list) {
      stage = "generate(m=" + std::to_string(m) + ")";
      powerflow::ScenarioSpec spec;
      spec.lo = lo;
      spec.hi = hi;
      spec.count = m;
      spec.seed = derive_seed(master_seed, "scenario_m" + std::to_string(m));
      auto snaps = powerflow::sample_scenarios(gc, spec);

      for (const auto& model_kind : model_list) {
        TargetSpec cell_target = target;
        cell_target.svr_inputs = target.border && model_kind == "svr";
        auto raw = cell_target.extract(gc, snaps);
        case_io::Dataset d = case_io::normalize(raw.values, raw.names);
        d.provenance["seed"] = spec.seed;
        d.provenance["range"] = {lo, hi};
        d.provenance["case"] = case_path;
        d.provenance["target"] = cfg.require("target.spec");

        for (const auto& know_text : knowledge_list) {
          KnowledgeSpec kspec = KnowledgeSpec::parse(know_text);
          if (model_kind == "svr" && kspec.kind != KnowledgeSpec::Kind::svr)
            kspec = KnowledgeSpec::parse("svr(" + fmt_g17(svr_C) + "," + fmt_g17(svr_eps) + ")");
          if (model_kind != "svr" && kspec.kind == KnowledgeSpec::Kind::svr) continue;
          const std::string cell_name = "m" + std::to_string(m) + "_" + detail::sanitize(model_kind) +
                                        "_" + detail::sanitize(kspec.canonical());
          if (seen_cells.count(cell_name)) continue;  // svr collapses non-svr knowledge specs
          seen_cells.insert(cell_name);

          stage = "train(" + cell_name + ")";
          case_io::save_dataset(d, (out_dir / ("dataset_" + cell_name + ".csv")).string());
          bound::TrainedModel trained;
          rademacher::ClassSpec cls;
          nlohmann::json model_json;
          if (model_kind == "svr") {
            auto h = hypothesis::fit_svr(d, svr_C, svr_eps, svr_kc);
            trained.emp_error = hypothesis::empirical_error(h, d);
            trained.description = "svr";
            cls = rademacher::SvrClassSpec{svr_C, svr_eps, svr_kc};
            model_json = hypothesis::to_json(h);
          } else {
            auto h = hypothesis::fit_ols(d);
            trained.emp_error = hypothesis::empirical_error(h, d);
            trained.params = h.params();
            trained.description = "lr";
            cls = rademacher::LinearClassSpec{};
            model_json = hypothesis::to_json(h);
          }
          model_json["provenance"] = {{"dataset_hash", hypothesis::dataset_hash(d)},
                                      {"seed", spec.seed},
                                      {"C", svr_C},
                                      {"eps", svr_eps},
                                      {"kernel_c", svr_kc}};
          {
            std::ofstream mf(out_dir / ("model_" + cell_name + ".json"));
            mf << model_json.dump(2) << "\n";
          }

          stage = "certify(" + cell_name + ")";
          BuiltKnowledge built = build_knowledge(kspec, gc, cell_target, d);
          if (built.derived_box) {
            nlohmann::json bj = {{"lb", built.derived_box->lb}, {"ub", built.derived_box->ub}};
            std::ofstream bf(out_dir / ("box_" + cell_name + ".json"));
            bf << bj.dump(2) << "\n";
          }
          bound::CertifyOptions cell_opt = copt;
          cell_opt.seed = derive_seed(master_seed, "certify_m" + std::to_string(m));
          bound::BoundReport rep = bound::iterate(d, cls, built.cs, trained, cell_opt);
          {
            std::ofstream rf(out_dir / ("report_" + cell_name + ".json"));
            rf << bound::report_to_json(rep).dump(2) << "\n";
          }
          const std::string setting = detail::sanitize(model_kind) + "_" + kspec.canonical();
          int setting_idx = -1;
          for (std::size_t i = 0; i < setting_names.size(); ++i)
            if (setting_names[i] == setting) setting_idx = static_cast<int>(i);
          if (setting_idx < 0) {
            setting_idx = static_cast<int>(setting_names.size());
            setting_names.push_back(setting);
          }
          curve.rows.push_back({static_cast<double>(m), static_cast<double>(setting_idx),
                                rep.final_bound, rep.final_gap_bound(),
                                static_cast<double>(rep.final_step)});
          nlohmann::json cj = bound::report_to_json(rep);
          cj["cell"] = cell_name;
          report_cells.push_back(cj);
          result.cells.push_back(CellResult{m, kspec.canonical(), model_kind, rep});
        }
      }
    }

    stage = "figures";
    write_csv((out_dir / "curve.csv").string(), curve);
    {
      nlohmann::json names = nlohmann::json::array();
      for (const auto& s : setting_names) names.push_back(s);
      std::ofstream sf(out_dir / "curve.settings.json");
      sf << names.dump(2) << "\n";
    }
    if (m_list.size() > 1 || setting_names.size() > 1) {
      std::vector<svg::Series> series(setting_names.size());
      for (std::size_t i = 0; i < setting_names.size(); ++i) series[i].name = setting_names[i];
      for (const auto& row : curve.rows) {
        auto& s = series[static_cast<int>(row[1])];
        s.x.push_back(row[0]);
        s.y.push_back(row[2]);
      }
      svg::write_line_chart((out_dir / "fig_bound_vs_m.svg").string(),
                            "certified generalization bound vs training size", "training samples m",
                            "bound", series);
    }
    // per-iteration trace figure for the first cell
    if (!result.cells.empty()) {
      const auto& rep = result.cells.front().report;
      svg::Series total{"total", {}, {}}, model{"complexity term", {}, {}}, sample{"sample term", {}, {}};
      for (const auto& s : rep.trace) {
        total.x.push_back(s.step);
        total.y.push_back(s.total);
        model.x.push_back(s.step);
        model.y.push_back(s.erc_term);
        sample.x.push_back(s.step);
        sample.y.push_back(s.samp_term);
      }
      svg::write_line_chart((out_dir / "fig_iteration_trace.svg").string(),
                            "bound terms per iteration step", "iteration step", "value",
                            {total, model, sample});
    }

    // optional gap stage
    if (cfg.has("gap.trainers")) {
      stage = "gap";
      bound::GapOptions gopt;
      gopt.trainers = static_cast<int>(cfg.get_int("gap.trainers", 20));
      gopt.testers = static_cast<int>(cfg.get_int("gap.testers", 20));
      gopt.m = static_cast<int>(cfg.get_int("gap.m", m_list.front()));
      gopt.train_lo = lo;
      gopt.train_hi = hi;
      gopt.test_lo = cfg.has("gap.test_range") ? std::stod(cfg.get_list("gap.test_range").at(0)) : lo;
      gopt.test_hi = cfg.has("gap.test_range") ? std::stod(cfg.get_list("gap.test_range").at(1)) : hi;
      gopt.certify = copt;
      gopt.certify.seed = derive_seed(master_seed, "gap");
      gopt.svr = cfg.get("model.kind", "lr") == "svr";
      gopt.svr_C = svr_C;
      gopt.svr_eps = svr_eps;
      gopt.svr_kernel_c = svr_kc;
      TargetSpec gap_t = target;
      gap_t.svr_inputs = target.border && gopt.svr;

      // knowledge for the gap run: the configured single spec
      powerflow::ScenarioSpec nspec;
      nspec.lo = lo;
      nspec.hi = hi;
      nspec.count = gopt.m;
      nspec.seed = derive_seed(gopt.certify.seed, "nominal");
      auto nsnaps = powerflow::sample_scenarios(gc, nspec);
      auto nraw = gap_t.extract(gc, nsnaps);
      case_io::Dataset nominal = case_io::normalize(nraw.values, nraw.names);
      KnowledgeSpec kspec = KnowledgeSpec::parse(cfg.get("knowledge.spec", "none"));
      BuiltKnowledge built = build_knowledge(kspec, gc, gap_t, nominal);

      bound::GapReport grep = bound::gap_experiment(gc, gap_t.gap_target(), built.cs, gopt);
      CsvTable gt;
      gt.header = {"trainer", "tester", "gap"};
      for (int t = 0; t < grep.trainers; ++t)
        for (int s = 0; s < grep.testers; ++s)
          gt.rows.push_back({static_cast<double>(t), static_cast<double>(s),
                             grep.gaps[static_cast<std::size_t>(t) * grep.testers + s]});
      write_csv((out_dir / "gap.csv").string(), gt);
      svg::write_gap_histogram((out_dir / "fig_gap_hist.svg").string(),
                               "generalization gap distribution vs certified bound", grep.gaps,
                               grep.gap_bound);
      result.gap = grep;
    }

    stage = "report";
    nlohmann::json top;
    top["cells"] = report_cells;
    top["settings"] = setting_names;
    if (result.gap) {
      top["gap"] = {{"bound", result.gap->gap_bound},
                    {"samples", result.gap->gaps.size()},
                    {"exceedances", result.gap->exceedances}};
    }
    {
      std::ofstream rf(out_dir / "report.json");
      rf << top.dump(2) << "\n";
    }

    nlohmann::json manifest;
    manifest["tool"] = "mrc-certify";
    manifest["version"] = kToolVersion;
    manifest["config_hash"] = detail::text_hash(cfg.raw());
    manifest["created"] = detail::timestamp();
    {
      std::ofstream mf(out_dir / "manifest.json");
      mf << manifest.dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    fail_marker(e.what());
    throw;
  }
  return result;
}

}  // namespace mrc::experiment
