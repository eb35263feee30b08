// mrc-certify: certified generalization bounds for data-driven grid models.
//
// Subcommands: generate, train, certify, gap, report.
// Exit codes: 0 success, 2 validation error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mrc/bound.hpp"
#include "mrc/case_io.hpp"
#include "mrc/experiment.hpp"
#include "mrc/hypothesis.hpp"
#include "mrc/knowledge.hpp"
#include "mrc/optim.hpp"
#include "mrc/powerflow.hpp"
#include "mrc/rademacher.hpp"
#include "mrc/svg.hpp"

using namespace mrc;

namespace {

std::pair<double, double> split_range(const std::string& range) {
  const auto comma = range.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("range must be lo,hi");
  return {std::stod(range.substr(0, comma)), std::stod(range.substr(comma + 1))};
}

struct CommonTarget {
  std::string spec;
  std::vector<int> border, internal;
  bool svr_inputs = false;

  experiment::TargetSpec parse() const {
    experiment::TargetSpec t = experiment::TargetSpec::parse(spec);
    if (t.border) {
      t.border_buses = border;
      t.internal_buses = internal;
      t.svr_inputs = svr_inputs;
      if (t.border_buses.empty() || t.internal_buses.empty())
        throw std::invalid_argument("border targets need --border and --internal bus lists");
    }
    return t;
  }
};

case_io::Dataset generate_dataset(const std::string& case_path, const CommonTarget& target, double lo,
                                  double hi, int count, std::uint64_t seed) {
  case_io::GridCase gc = case_io::parse_case_file(case_path);
  powerflow::ScenarioSpec spec;
  spec.lo = lo;
  spec.hi = hi;
  spec.count = count;
  spec.seed = seed;
  auto snaps = powerflow::sample_scenarios(gc, spec);
  experiment::TargetSpec t = target.parse();
  auto raw = t.extract(gc, snaps);
  case_io::Dataset d = case_io::normalize(raw.values, raw.names);
  d.provenance["seed"] = seed;
  d.provenance["range"] = {lo, hi};
  d.provenance["case"] = case_path;
  d.provenance["target"] = target.spec;
  return d;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"certified generalization bounds for data-driven power grid regression"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "sample operating points and write a dataset");
  std::string g_case, g_out = "dataset.csv", g_range = "0.95,1.05";
  int g_count = 300;
  std::uint64_t g_seed = 1;
  CommonTarget g_tgt;
  gen->add_option("--case", g_case, "case file (.m)")->required();
  gen->add_option("--target", g_tgt.spec, "target spec, e.g. branch:16-17:Q or border:17:P")->required();
  gen->add_option("--range", g_range, "load factor range lo,hi");
  gen->add_option("--count", g_count, "number of snapshots");
  gen->add_option("--seed", g_seed, "rng seed");
  gen->add_option("--border", g_tgt.border, "border bus list (border targets)");
  gen->add_option("--internal", g_tgt.internal, "internal bus list (border targets)");
  gen->add_flag("--svr-inputs", g_tgt.svr_inputs, "raw border inputs for the svr model");
  gen->add_option("--out", g_out, "output csv path");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "fit a model on a dataset");
  std::string t_dataset, t_model = "lr", t_out = "model.json";
  double t_C = 0.2, t_eps = 0.01, t_kc = 1.0;
  tr->add_option("--dataset", t_dataset, "dataset csv")->required();
  tr->add_option("--model", t_model, "lr | svr");
  tr->add_option("--C", t_C, "svr box bound");
  tr->add_option("--eps", t_eps, "svr tube width");
  tr->add_option("--kernel-c", t_kc, "polynomial kernel constant");
  tr->add_option("--out", t_out, "output model json");

  // ---- certify ----
  auto* ce = app.add_subcommand("certify", "run the iterative bound certification");
  std::string c_dataset, c_model = "lr", c_knowledge = "none", c_out = "report.json", c_svg, c_dump;
  std::string c_case, c_target;
  double c_delta = 0.05, c_e0 = 1.0, c_ksamp = 1.4, c_gap = 1e-7, c_C = 0.2, c_eps = 0.01, c_kc = 1.0;
  int c_n = 10, c_iters = 10, c_threads = 0;
  std::uint64_t c_seed = 1;
  ce->add_option("--dataset", c_dataset, "dataset csv")->required();
  ce->add_option("--model", c_model, "lr | svr");
  ce->add_option("--knowledge", c_knowledge, "none | angle(d) | box(file.json) | box(auto) | svr(C,eps)");
  ce->add_option("--case", c_case, "case file, needed for box(auto)");
  ce->add_option("--target", c_target, "target spec, needed for box(auto)");
  ce->add_option("--delta", c_delta, "PAC probability");
  ce->add_option("--n", c_n, "number of sign vectors");
  ce->add_option("--max-iters", c_iters, "iteration cap");
  ce->add_option("--e0", c_e0, "initial budget");
  ce->add_option("--k-samp", c_ksamp, "sample-term budget factor");
  ce->add_option("--seed", c_seed, "rng seed");
  ce->add_option("--erc-gap", c_gap, "certified relative gap per sup value");
  ce->add_option("--threads", c_threads, "parallel sup solves (0 = auto)");
  ce->add_option("--C", c_C, "svr box bound");
  ce->add_option("--eps", c_eps, "svr tube width");
  ce->add_option("--kernel-c", c_kc, "polynomial kernel constant");
  ce->add_option("--out", c_out, "report json path");
  ce->add_option("--svg", c_svg, "iteration trace figure");
  ce->add_option("--dump-milp", c_dump, "write the first sup instance in LP format");

  // ---- gap ----
  auto* ga = app.add_subcommand("gap", "train/test generalization-gap experiment");
  std::string p_case, p_out = "gap.csv", p_svg, p_knowledge = "none", p_range = "0.95,1.05", p_test_range;
  CommonTarget p_tgt;
  int p_trainers = 20, p_testers = 20, p_m = 300, p_n = 10, p_iters = 10, p_threads = 0;
  double p_delta = 0.05, p_gap = 1e-3;
  std::string p_model = "lr";
  double p_C = 0.2, p_eps = 0.01, p_kc = 1.0;
  std::uint64_t p_seed = 1;
  ga->add_option("--case", p_case, "case file")->required();
  ga->add_option("--target", p_tgt.spec, "target spec")->required();
  ga->add_option("--border", p_tgt.border, "border bus list");
  ga->add_option("--internal", p_tgt.internal, "internal bus list");
  ga->add_option("--range", p_range, "training load range lo,hi");
  ga->add_option("--test-range", p_test_range, "testing load range lo,hi (default: training)");
  ga->add_option("--trainers", p_trainers, "number of training datasets");
  ga->add_option("--testers", p_testers, "number of testing datasets");
  ga->add_option("--m", p_m, "snapshots per dataset");
  ga->add_option("--model", p_model, "lr | svr");
  ga->add_option("--C", p_C, "svr box bound");
  ga->add_option("--eps", p_eps, "svr tube width");
  ga->add_option("--kernel-c", p_kc, "polynomial kernel constant");
  ga->add_option("--knowledge", p_knowledge, "knowledge spec for the certified bound");
  ga->add_option("--delta", p_delta, "PAC probability");
  ga->add_option("--n", p_n, "number of sign vectors");
  ga->add_option("--max-iters", p_iters, "iteration cap");
  ga->add_option("--seed", p_seed, "master seed");
  ga->add_option("--erc-gap", p_gap, "certified relative gap per sup value");
  ga->add_option("--threads", p_threads, "parallel sup solves");
  ga->add_option("--out", p_out, "gap csv path");
  ga->add_option("--svg", p_svg, "histogram figure path");

  // ---- report ----
  auto* re = app.add_subcommand("report", "run a full experiment from a config file");
  std::string r_config, r_out = "out";
  re->add_option("--config", r_config, "experiment config")->required();
  re->add_option("--out", r_out, "artifact directory");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    auto range = split_range(g_range);
    case_io::Dataset d = generate_dataset(g_case, g_tgt, range.first, range.second, g_count, g_seed);
    case_io::save_dataset(d, g_out);
    std::printf("wrote %s (%d samples, %d features)\n", g_out.c_str(), d.m, d.p());
    return 0;
  }

  if (tr->parsed()) {
    case_io::Dataset d = case_io::load_dataset(t_dataset);
    nlohmann::json j;
    double mae = 0;
    if (t_model == "svr") {
      auto h = hypothesis::fit_svr(d, t_C, t_eps, t_kc);
      mae = hypothesis::empirical_error(h, d);
      j = hypothesis::to_json(h);
    } else if (t_model == "lr") {
      auto h = hypothesis::fit_ols(d);
      mae = hypothesis::empirical_error(h, d);
      j = hypothesis::to_json(h);
    } else {
      throw std::invalid_argument("model must be lr or svr");
    }
    j["provenance"] = {{"dataset_hash", hypothesis::dataset_hash(d)},
                       {"dataset", t_dataset},
                       {"C", t_C},
                       {"eps", t_eps},
                       {"kernel_c", t_kc}};
    std::ofstream os(t_out);
    os << j.dump(2) << "\n";
    std::printf("trained %s: training MAE %.6g (normalized)\n", t_model.c_str(), mae);
    return 0;
  }

  if (ce->parsed()) {
    case_io::Dataset d = case_io::load_dataset(c_dataset);
    experiment::KnowledgeSpec kspec = experiment::KnowledgeSpec::parse(c_knowledge);
    knowledge::ConstraintSet cs;
    {
      case_io::GridCase gc_local;
      experiment::TargetSpec tspec;
      if (kspec.kind == experiment::KnowledgeSpec::Kind::box_auto) {
        if (c_case.empty() || c_target.empty())
          throw std::invalid_argument("box(auto) needs --case and --target for the derivation");
        gc_local = case_io::parse_case_file(c_case);
        tspec = experiment::TargetSpec::parse(c_target);
      }
      cs = experiment::build_knowledge(kspec, gc_local, tspec, d).cs;
    }

    bound::TrainedModel trained;
    rademacher::ClassSpec cls;
    if (c_model == "svr") {
      auto h = hypothesis::fit_svr(d, c_C, c_eps, c_kc);
      trained.emp_error = hypothesis::empirical_error(h, d);
      trained.description = "svr";
      cls = rademacher::SvrClassSpec{c_C, c_eps, c_kc};
      if (!cs.svr) cs.svr = knowledge::SvrStructure{c_C, c_eps, 0.0};
    } else if (c_model == "lr") {
      auto h = hypothesis::fit_ols(d);
      trained.emp_error = hypothesis::empirical_error(h, d);
      trained.params = h.params();
      trained.description = "lr";
      cls = rademacher::LinearClassSpec{};
    } else {
      throw std::invalid_argument("model must be lr or svr");
    }

    if (!c_dump.empty()) {
      auto sigmas = rademacher::draw_sigmas(d.m, 1, derive_seed(c_seed, "sigma"));
      std::ofstream lpf(c_dump);
      if (c_model == "svr") {
        rademacher::SvrClassSpec svr{c_C, c_eps, c_kc};
        lpf << optim::lp_format(rademacher::build_sup_svr(d, svr, sigmas[0], cs, c_e0).inst);
      } else {
        lpf << optim::lp_format(rademacher::build_sup(d, sigmas[0], cs, c_e0).inst);
      }
    }

    bound::CertifyOptions opt;
    opt.delta = c_delta;
    opt.n = c_n;
    opt.max_iters = c_iters;
    opt.e0 = c_e0;
    opt.k.samp = c_ksamp;
    opt.seed = c_seed;
    opt.erc.sup.target_gap = c_gap;
    opt.erc.threads = c_threads;
    bound::BoundReport rep = bound::iterate(d, cls, cs, trained, opt);
    std::ofstream os(c_out);
    os << bound::report_to_json(rep).dump(2) << "\n";
    if (!c_svg.empty()) {
      svg::Series total{"total", {}, {}}, model{"complexity term", {}, {}}, sample{"sample term", {}, {}};
      for (const auto& s : rep.trace) {
        total.x.push_back(s.step);
        total.y.push_back(s.total);
        model.x.push_back(s.step);
        model.y.push_back(s.erc_term);
        sample.x.push_back(s.step);
        sample.y.push_back(s.samp_term);
      }
      svg::write_line_chart(c_svg, "bound terms per iteration step", "iteration step", "value",
                            {total, model, sample});
    }
    std::printf("certified bound %.6g (normalized), %.6g (target units), %d steps%s\n", rep.final_bound,
                rep.final_bound * rep.target_scale, rep.final_step,
                rep.tightened ? "" : " [no tightening]");
    return 0;
  }

  if (ga->parsed()) {
    case_io::GridCase gc = case_io::parse_case_file(p_case);
    p_tgt.svr_inputs = p_model == "svr";
    experiment::TargetSpec t = p_tgt.parse();
    auto tr_range = split_range(p_range);
    auto te_range = p_test_range.empty() ? tr_range : split_range(p_test_range);

    bound::GapOptions gopt;
    gopt.trainers = p_trainers;
    gopt.testers = p_testers;
    gopt.m = p_m;
    gopt.train_lo = tr_range.first;
    gopt.train_hi = tr_range.second;
    gopt.test_lo = te_range.first;
    gopt.test_hi = te_range.second;
    gopt.certify.delta = p_delta;
    gopt.certify.n = p_n;
    gopt.certify.max_iters = p_iters;
    gopt.certify.seed = p_seed;
    gopt.certify.erc.sup.target_gap = p_gap;
    gopt.certify.erc.threads = p_threads;
    gopt.svr = p_model == "svr";
    gopt.svr_C = p_C;
    gopt.svr_eps = p_eps;
    gopt.svr_kernel_c = p_kc;

    powerflow::ScenarioSpec nspec;
    nspec.lo = gopt.train_lo;
    nspec.hi = gopt.train_hi;
    nspec.count = gopt.m;
    nspec.seed = derive_seed(p_seed, "nominal");
    auto nsnaps = powerflow::sample_scenarios(gc, nspec);
    auto nraw = t.extract(gc, nsnaps);
    case_io::Dataset nominal = case_io::normalize(nraw.values, nraw.names);
    experiment::KnowledgeSpec kspec = experiment::KnowledgeSpec::parse(p_knowledge);
    knowledge::ConstraintSet cs = experiment::build_knowledge(kspec, gc, t, nominal).cs;

    bound::GapReport rep = bound::gap_experiment(gc, t.gap_target(), cs, gopt);
    CsvTable gt;
    gt.header = {"trainer", "tester", "gap"};
    for (int i = 0; i < rep.trainers; ++i)
      for (int s = 0; s < rep.testers; ++s)
        gt.rows.push_back({static_cast<double>(i), static_cast<double>(s),
                           rep.gaps[static_cast<std::size_t>(i) * rep.testers + s]});
    write_csv(p_out, gt);
    if (!p_svg.empty())
      svg::write_gap_histogram(p_svg, "generalization gap distribution vs certified bound", rep.gaps,
                               rep.gap_bound);
    std::printf("gap bound %.6g; %zu samples, %d exceedances\n", rep.gap_bound, rep.gaps.size(),
                rep.exceedances);
    return 0;
  }

  if (re->parsed()) {
    experiment::Config cfg = experiment::Config::parse_file(r_config);
    auto res = experiment::run_config(cfg, r_out);
    std::printf("experiment complete: %zu cells -> %s\n", res.cells.size(), r_out.c_str());
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const case_io::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const case_io::SemanticError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
}
