#include "orthoflow/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "orthoflow/flow.hpp"
#include "orthoflow/kernels.hpp"
#include "orthoflow/sphere.hpp"
#include "orthoflow/verify.hpp"

namespace orthoflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& keypath, const std::string& what) {
  fail(Errc::ParseError, "config." + keypath + ": " + what);
}

template <typename T>
T get_or(const json& j, const std::string& key, T dflt) {
  if (!j.contains(key)) return dflt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(key, e.what());
  }
}

struct RunSpec {
  std::string mode;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  int snapshot_cadence = 0;
  FlowConfig flow;
  InitialRecipe initial;
  // sphere
  int L = 3;
  int sphere_nx = 64, sphere_ny = 1;
  // verify
  int verify_n = 4;
  int verify_trials = 1000;
};

RunSpec parse_config(const json& j) {
  RunSpec rs;
  if (!j.contains("mode")) config_error("mode", "required key missing");
  rs.mode = j.at("mode").get<std::string>();
  if (rs.mode != "fixed" && rs.mode != "moving" && rs.mode != "sphere" && rs.mode != "verify")
    config_error("mode", "expected fixed|moving|sphere|verify, got " + rs.mode);
  rs.seed = get_or<std::uint64_t>(j, "seed", 1);
  rs.output_dir = get_or<std::string>(j, "output_dir", "out");
  rs.snapshot_cadence = get_or<int>(j, "snapshot_cadence", 0);

  rs.flow.T = get_or<double>(j, "T", 0.1);
  rs.flow.N = get_or<int>(j, "N", 16);
  rs.flow.lambda = get_or<double>(j, "lambda", 0.9);
  rs.flow.n = get_or<int>(j, "n", 2);
  rs.L = get_or<int>(j, "L", 3);
  if (rs.mode != "verify") {
    if (rs.flow.N < 2) config_error("N", "N >= 2 required");
    if (!(rs.flow.T > 0.0)) config_error("T", "T > 0 required");
    if (!(rs.flow.lambda > 0.0 && rs.flow.lambda < 1.0))
      config_error("lambda", "lambda in (0,1) required");
  }

  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    rs.flow.grid.geom = geometry_from_name(get_or<std::string>(g, "kind", "FlatBox1D"));
    rs.flow.grid.m_normal = get_or<int>(g, "m_normal", 32);
    rs.flow.grid.m_tangent = get_or<int>(g, "m_tangent", 32);
    rs.flow.grid.iface_pos = get_or<double>(g, "iface_pos", 0.0);
    rs.flow.grid.R = get_or<double>(g, "R", 1.0);
    rs.flow.grid.r_core = get_or<double>(g, "r_core", 0.05);
    rs.flow.grid.r_iface = get_or<double>(g, "r_iface", 0.5);
  }
  if (j.contains("motion")) {
    const json& m = j.at("motion");
    const std::string kind = get_or<std::string>(m, "kind", "Stationary");
    if (kind == "Stationary")
      rs.flow.motion.kind = MotionKind::Stationary;
    else if (kind == "ShrinkingCircle")
      rs.flow.motion.kind = MotionKind::ShrinkingCircle;
    else if (kind == "PrescribedPoint1D")
      rs.flow.motion.kind = MotionKind::PrescribedPoint1D;
    else
      config_error("motion.kind", "unknown motion: " + kind);
    rs.flow.motion.r0 = get_or<double>(m, "r0", 0.8);
    rs.flow.motion.s0 = get_or<double>(m, "s0", 0.0);
    rs.flow.motion.s_amp = get_or<double>(m, "s_amp", 0.0);
    rs.flow.motion.s_omega = get_or<double>(m, "s_omega", 1.0);
  }
  if (rs.mode == "moving") {
    if (rs.flow.motion.kind == MotionKind::Stationary)
      config_error("motion.kind", "moving mode needs ShrinkingCircle or PrescribedPoint1D");
    const double t0 = rs.flow.motion.lifespan();
    if (std::isfinite(t0) && rs.flow.T >= t0 * 0.9)
      config_error("T", "exceeds the interface lifespan margin; T0 = r0^2/2 = " +
                            std::to_string(t0));
  }

  if (j.contains("stepper")) {
    const json& s = j.at("stepper");
    rs.flow.step.max_iters = get_or<int>(s, "max_iters", 2000);
    rs.flow.step.tol_grad = get_or<double>(s, "tol_grad", 1e-7);
    rs.flow.step.tau0 = get_or<double>(s, "tau0", -1.0);
    rs.flow.step.beta = get_or<double>(s, "beta", 0.5);
    rs.flow.step.armijo_c = get_or<double>(s, "armijo_c", 1e-4);
    rs.flow.step.reorthogonalize_every = get_or<int>(s, "reorthogonalize_every", 25);
    if (!(rs.flow.step.beta > 0.0 && rs.flow.step.beta < 1.0))
      config_error("stepper.beta", "beta in (0,1) required");
    if (!(rs.flow.step.armijo_c > 0.0 && rs.flow.step.armijo_c < 1.0))
      config_error("stepper.armijo_c", "armijo_c in (0,1) required");
  } else {
    rs.flow.step.max_iters = 2000;
  }

  rs.initial.kind = InitialRecipe::Kind::SmoothRandom;
  if (j.contains("initial")) {
    const json& i = j.at("initial");
    const std::string recipe = get_or<std::string>(i, "recipe", "smooth-random");
    if (recipe == "constant-pair")
      rs.initial.kind = InitialRecipe::Kind::ConstantPair;
    else if (recipe == "smooth-random")
      rs.initial.kind = InitialRecipe::Kind::SmoothRandom;
    else if (recipe == "user-file")
      rs.initial.kind = InitialRecipe::Kind::UserFile;
    else
      config_error("initial.recipe", "unknown recipe: " + recipe);
    rs.initial.amplitude = get_or<double>(i, "amplitude", 0.5);
    rs.initial.modes = get_or<int>(i, "modes", 3);
    rs.initial.decay = get_or<double>(i, "decay", 2.0);
    rs.initial.path_prefix = get_or<std::string>(i, "path_prefix", "");
  }
  rs.initial.seed = splitmix64(rs.seed ^ 0x5eedULL);

  if (j.contains("sphere_grid")) {
    rs.sphere_nx = get_or<int>(j.at("sphere_grid"), "nx", 64);
    rs.sphere_ny = get_or<int>(j.at("sphere_grid"), "ny", 1);
  }
  if (j.contains("verify")) {
    rs.verify_n = get_or<int>(j.at("verify"), "n", 4);
    rs.verify_trials = get_or<int>(j.at("verify"), "trials", 1000);
  }
  return rs;
}

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(Errc::ParseError, "cannot open config: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    fail(Errc::ParseError, std::string("config parse: ") + e.what());
  }
  return j;
}

fs::path resolve_out(const RunSpec& rs, const std::string& out_override) {
  fs::path out = rs.output_dir;
  if (const char* env = std::getenv("ORTHOFLOW_OUT"))
    out = fs::path(env) / rs.output_dir;
  if (!out_override.empty()) out = out_override;
  fs::create_directories(out);
  return out;
}

struct Verdicts {
  json j = json::object();
  bool all = true;
  void add(const std::string& name, bool ok, double value) {
    j[name] = {{"pass", ok}, {"value", value}};
    all = all && ok;
  }
};

json flow_summary_core(const FlowResult& fr) {
  json r;
  r["initial_dirichlet"] = fr.trace.initial_dirichlet;
  r["final_dirichlet"] = fr.trace.final_dirichlet;
  r["sup_dirichlet"] = fr.trace.sup_dirichlet;
  r["kinetic_sum"] = fr.trace.kinetic_sum;
  r["c_tilde"] = fr.trace.c_tilde;
  r["initial_attach_C"] = fr.trace.initial_attach_C;
  r["interpolant_gap_sq"] = interpolant_gap_sq(fr);
  double elmax = 0.0, orth = 0.0, pairr = 0.0, iters = 0.0;
  for (const auto& s : fr.trace.steps) {
    elmax = std::max(elmax, s.el_residual);
    orth = std::max(orth, s.orth_residual_max);
    pairr = std::max(pairr, s.pair_residual_max);
    iters += s.iterations;
  }
  r["el_residual_max"] = elmax;
  r["orth_residual_max"] = orth;
  r["pair_residual_max"] = pairr;
  r["stepper_iterations_total"] = iters;
  return r;
}

double weak_library_max(const FlowResult& fr, std::uint64_t seed) {
  auto lib = make_weak_test_library(fr.cfg, fr.cfg.n, seed, 6);
  double mx = 0.0;
  for (const auto& w : lib) mx = std::max(mx, weak_neumann_residual(fr, w));
  return mx;
}

json run_flow_mode(const RunSpec& rs, const fs::path& out, bool moving, bool& pass) {
  FlowConfig cfg = rs.flow;
  GridSpec spec0 = cfg.grid;
  if (moving) {
    // The initial grid carries Gamma(0).
    if (cfg.motion.kind == MotionKind::ShrinkingCircle)
      spec0.r_iface = cfg.motion.interface_pos(0.0);
    else
      spec0.iface_pos = cfg.motion.interface_pos(0.0);
  }
  PairedField a0 = make_initial(build_grid(spec0), cfg.n, rs.initial);
  FlowResult fr = moving ? run_moving(a0, cfg) : run_fixed(a0, cfg);

  fr.trace.write_csv((out / "trace.csv").string());
  if (rs.snapshot_cadence > 0) {
    for (int m = 0; m <= cfg.N; m += rs.snapshot_cadence) {
      char name[64];
      std::snprintf(name, sizeof(name), "snap_m%04d", m);
      write_paired_snapshot((out / name).string(), fr.iterates[m]);
    }
  }

  const double d0 = fr.trace.initial_dirichlet;
  Verdicts v;
  // Per-step minimizing property: E_h(V, At; A^{m+1}) <= E_h(V, At; At).
  double worst_descent = -1e300;
  for (int m = 0; m < cfg.N; ++m) {
    const double warm_d = dirichlet_energy(fr.warm_starts[m]);
    worst_descent = std::max(worst_descent, fr.trace.steps[m].total_energy - warm_d);
  }
  v.add("per_step_descent", worst_descent <= 1e-10, worst_descent);
  v.add("orth_residual", flow_summary_core(fr)["orth_residual_max"].get<double>() <= 1e-8,
        flow_summary_core(fr)["orth_residual_max"].get<double>());
  v.add("pair_residual", flow_summary_core(fr)["pair_residual_max"].get<double>() <= 1e-12,
        flow_summary_core(fr)["pair_residual_max"].get<double>());

  auto lst = lambda_pair_statistics(fr, cfg.lambda, std::max(64, cfg.N));
  v.add("lambda_fraction",
        std::abs(lst.fraction_exact - cfg.lambda) <= 1.0 / cfg.N + 1e-12,
        lst.fraction_exact);

  if (!moving) {
    v.add("dirichlet_monotone", fr.trace.dirichlet_monotone, fr.trace.final_dirichlet);
    v.add("energy_telescope", fr.trace.energy_telescope_slack <= 1e-10,
          fr.trace.energy_telescope_slack);
    v.add("initial_attachment", fr.trace.initial_attach_C <= 1.0 + 1e-8,
          fr.trace.initial_attach_C);
  } else {
    const bool finite = std::isfinite(fr.trace.c_tilde);
    v.add("weighted_monotone", finite, fr.trace.c_tilde);
    const double cap = std::exp(fr.trace.c_tilde * cfg.T) * d0 * (1.0 + 1e-9) + 1e-14;
    v.add("apriori_sup_bound", fr.trace.sup_dirichlet <= cap, fr.trace.sup_dirichlet);
    v.add("initial_attachment",
          fr.trace.initial_attach_C <= 4.0 * std::exp(fr.trace.c_tilde * cfg.T),
          fr.trace.initial_attach_C);
  }

  json summary;
  summary["results"] = flow_summary_core(fr);
  summary["results"]["lambda_fraction"] = lst.fraction_exact;
  summary["results"]["weak_neumann_max"] = weak_library_max(fr, rs.seed);
  if (moving) {
    auto rep = fr.diffeos->verify_bounds(fr.grids[0]->dim, 4, 32);
    summary["results"]["C0"] = rep.c0;
    summary["results"]["C1"] = rep.c1;
    summary["results"]["C2"] = rep.c2;
    summary["results"]["jac_dev_max"] = rep.jac_dev;
  }
  summary["invariants"] = v.j;
  pass = v.all;
  return summary;
}

json run_sphere_mode(const RunSpec& rs, const fs::path& out, bool& pass) {
  auto g = build_torus(rs.sphere_nx, rs.sphere_ny);
  SphereField u0 = rs.initial.kind == InitialRecipe::Kind::ConstantPair
                       ? make_sphere_constant(g, rs.L)
                       : make_sphere_random(g, rs.L, rs.initial.seed, rs.initial.amplitude,
                                            rs.initial.modes, rs.initial.decay);
  StepConfig cfg = rs.flow.step;
  SphereFlowResult fr = run_sphere_flow(u0, rs.flow.T, rs.flow.N, rs.flow.lambda, cfg);
  fr.write_csv((out / "trace.csv").string());

  Verdicts v;
  double dprev = fr.initial_dirichlet, descent_slack = -1e300, elmax = 0.0, udev = 0.0;
  for (const auto& r : fr.steps) {
    descent_slack = std::max(descent_slack, r.dirichlet + r.kinetic_increment - dprev);
    elmax = std::max(elmax, r.el_residual);
    udev = std::max(udev, r.unit_dev_max);
    dprev = r.dirichlet;
  }
  v.add("per_step_descent", descent_slack <= 1e-10, descent_slack);
  v.add("energy_telescope", fr.half_telescope_slack <= 1e-10, fr.half_telescope_slack);
  v.add("half_sup_form",
        fr.kinetic_sum + 0.5 * fr.sup_dirichlet <= fr.initial_dirichlet + 1e-10,
        fr.kinetic_sum + 0.5 * fr.sup_dirichlet);
  v.add("unit_norm", udev <= 1e-12, udev);
  v.add("el_residual", elmax <= 1e-6, elmax);

  json summary;
  summary["results"] = {{"initial_dirichlet", fr.initial_dirichlet},
                        {"kinetic_sum", fr.kinetic_sum},
                        {"sup_dirichlet", fr.sup_dirichlet},
                        {"interpolant_gap_sq", fr.interpolant_gap_sq},
                        {"gap_constant", fr.gap_constant},
                        {"el_residual_max", elmax}};
  summary["invariants"] = v.j;
  pass = v.all;
  return summary;
}

json run_verify_mode(int n, int trials, std::uint64_t seed, const fs::path& out, bool& pass) {
  auto vp = check_v_perp(n, trials, seed);
  auto tn = check_tangent_normal(n, trials, seed);
  auto eb = check_equivalence_battery(n, trials, seed);
  std::ofstream(out / "v_perp.json") << vp.to_json() << "\n";
  std::ofstream(out / "tangent_normal.json") << tn.to_json() << "\n";
  std::ofstream(out / "equivalences.json") << eb.to_json() << "\n";
  pass = vp.pass && tn.pass && eb.pass;
  json summary;
  summary["results"] = {{"v_perp_pass", vp.pass},
                        {"tangent_normal_pass", tn.pass},
                        {"equivalences_pass", eb.pass},
                        {"inconsistencies", eb.inconsistencies}};
  summary["invariants"] = {
      {"v_perp", {{"pass", vp.pass}, {"value", vp.max_reconstruction}}},
      {"tangent_normal", {{"pass", tn.pass}, {"value", tn.max_tangent_defect}}},
      {"equivalence_graph", {{"pass", eb.pass}, {"value", double(eb.inconsistencies)}}}};
  return summary;
}

int execute(const RunSpec& rs, const json& echo, const std::string& out_override,
            json* summary_out = nullptr) {
  const fs::path out = resolve_out(rs, out_override);
  bool pass = false;
  json summary;
  if (rs.mode == "fixed")
    summary = run_flow_mode(rs, out, false, pass);
  else if (rs.mode == "moving")
    summary = run_flow_mode(rs, out, true, pass);
  else if (rs.mode == "sphere")
    summary = run_sphere_mode(rs, out, pass);
  else
    summary = run_verify_mode(rs.verify_n, rs.verify_trials, rs.seed, out, pass);

  summary["mode"] = rs.mode;
  summary["seed"] = rs.seed;
  summary["kernel_backend"] = std::string(kernels::backend_name());
  summary["config"] = echo;
  summary["pass"] = pass;
  std::ofstream(out / "summary.json") << summary.dump(2) << "\n";
  if (summary_out) *summary_out = summary;
  std::cout << (pass ? "PASS" : "FAIL") << " (" << rs.mode << ") -> " << out.string()
            << "\n";
  return pass ? kExitPass : kExitInvariant;
}

} // namespace

int run_config(const std::string& config_path, const std::string& out_override) {
  try {
    json j = load_json(config_path);
    RunSpec rs = parse_config(j);
    return execute(rs, j, out_override);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::ParseError || e.code() == Errc::InvalidArgument ||
                   e.code() == Errc::LifespanExceeded
               ? kExitUsage
               : kExitInvariant;
  }
}

int sweep_config(const std::string& config_path, const std::string& param,
                 const std::vector<std::string>& values, const std::string& out_override) {
  try {
    if (values.empty()) fail(Errc::InvalidArgument, "sweep: empty values list");
    if (param != "N" && param != "seed" && param != "lambda")
      fail(Errc::InvalidArgument, "sweep: param must be N, seed, or lambda");
    json base = load_json(config_path);
    RunSpec rs0 = parse_config(base);
    const fs::path root = resolve_out(rs0, out_override);

    json entries = json::array();
    std::vector<double> hs, gaps, weak_max, el_max;
    bool all_pass = true;
    std::string first_verdicts;
    bool verdicts_agree = true;

    char csvline[256];
    std::ofstream csv(root / "sweep.csv");
    csv << "param,value,pass,interpolant_gap_sq,weak_neumann_max,el_residual_max,c_tilde\n";

    for (const std::string& val : values) {
      json j = base;
      if (param == "N")
        j["N"] = std::stoi(val);
      else if (param == "seed")
        j["seed"] = static_cast<std::uint64_t>(std::stoull(val));
      else
        j["lambda"] = std::stod(val);
      RunSpec rs = parse_config(j);
      rs.output_dir = (fs::path(rs0.output_dir) / ("sweep_" + param + "_" + val)).string();
      json summary;
      const int code = execute(rs, j, "", &summary);
      all_pass = all_pass && code == kExitPass;

      json entry;
      entry["value"] = val;
      entry["pass"] = code == kExitPass;
      if (summary.contains("results")) {
        const json& r = summary["results"];
        entry["results"] = r;
        if (r.contains("interpolant_gap_sq")) {
          hs.push_back(rs.flow.T / rs.flow.N);
          gaps.push_back(r["interpolant_gap_sq"].get<double>());
        }
        if (r.contains("weak_neumann_max"))
          weak_max.push_back(r["weak_neumann_max"].get<double>());
        if (r.contains("el_residual_max"))
          el_max.push_back(r["el_residual_max"].get<double>());
        std::snprintf(csvline, sizeof(csvline), "%s,%s,%d,%.17g,%.17g,%.17g,%.17g\n",
                      param.c_str(), val.c_str(), code == kExitPass ? 1 : 0,
                      r.value("interpolant_gap_sq", 0.0), r.value("weak_neumann_max", 0.0),
                      r.value("el_residual_max", 0.0), r.value("c_tilde", 0.0));
        csv << csvline;
      }
      const std::string verd = summary["invariants"].dump();
      if (first_verdicts.empty())
        first_verdicts = verd;
      else {
        // Same pass/fail pattern expected across seeds (trajectories differ).
        json a = json::parse(first_verdicts), b = json::parse(verd);
        for (auto& [k, vj] : a.items())
          if (b.contains(k) && b[k]["pass"] != vj["pass"]) verdicts_agree = false;
      }
      entries.push_back(entry);
    }

    json agg;
    agg["param"] = param;
    agg["entries"] = entries;
    if (param == "N" && hs.size() >= 2) {
      // Log-log slope of the interpolant gap against h.
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const int k = static_cast<int>(hs.size());
      for (int i = 0; i < k; ++i) {
        const double x = std::log(hs[i]), y = std::log(std::max(gaps[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      agg["gap_loglog_slope"] = (k * sxy - sx * sy) / (k * sxx - sx * sx);
      bool monotone = true;
      for (std::size_t i = 1; i < weak_max.size(); ++i)
        if (weak_max[i] >= weak_max[i - 1]) monotone = false;
      agg["weak_residual_monotone"] = monotone;
    }
    if (param == "seed") agg["verdicts_agree"] = verdicts_agree;
    agg["all_pass"] = all_pass;
    std::ofstream(root / "sweep_summary.json") << agg.dump(2) << "\n";
    std::cout << (all_pass ? "PASS" : "FAIL") << " (sweep " << param << ") -> "
              << root.string() << "\n";
    return all_pass ? kExitPass : kExitInvariant;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::ParseError || e.code() == Errc::InvalidArgument ||
                   e.code() == Errc::LifespanExceeded
               ? kExitUsage
               : kExitInvariant;
  }
}

int verify_command(int n, int trials, std::uint64_t seed, const std::string& out_override) {
  try {
    RunSpec rs;
    rs.mode = "verify";
    rs.verify_n = n;
    rs.verify_trials = trials;
    rs.seed = seed;
    rs.output_dir = "verify_out";
    json echo = {{"mode", "verify"}, {"n", n}, {"trials", trials}, {"seed", seed}};
    return execute(rs, echo, out_override);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

} // namespace orthoflow::cli
