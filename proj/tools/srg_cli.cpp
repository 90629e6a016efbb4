// srg: batch front end for the renormalization-group pipeline.
//
// Exit codes: 0 success, 1 a check failed or a solve did not converge,
// 2 usage or configuration error, 3 flow left the polydisc.
#include "srg/config.hpp"
#include "srg/pauli_fierz.hpp"
#include "srg/spectral.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

using namespace srg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config, out = ".", suite;
  double tol = -1.0, rho = 0.0;
  std::vector<std::string> thetas;
  std::uint64_t seed = 1;
};

struct usage_error : error {
  using error::error;
};

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw config_error("cannot write " + p.string());
  out << text;
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

cd parse_theta(const std::string& s) {
  auto comma = s.find(',');
  if (comma == std::string::npos) throw usage_error("--theta expects \"re,im\", got '" + s + "'");
  try {
    std::size_t a = 0, b = 0;
    double re = std::stod(s.substr(0, comma), &a);
    double im = std::stod(s.substr(comma + 1), &b);
    if (a != comma || b != s.size() - comma - 1) throw std::invalid_argument("trailing");
    return {re, im};
  } catch (const std::logic_error&) {
    throw usage_error("--theta expects \"re,im\", got '" + s + "'");
  }
}

SolveConfig solve_config(const ModelConfig& mc, const Options& o) {
  SolveConfig c;
  c.rho = o.rho > 0.0 ? o.rho : mc.solver.rho;
  c.L_max = mc.solver.L_max;
  c.tol = mc.solver.tol;
  c.max_iter = mc.solver.max_iter;
  return c;
}

json result_json(const ResonanceResult& r) {
  return {{"j", r.j},
          {"e", complex_json(r.e)},
          {"iterations", r.iterations},
          {"residual", r.residual},
          {"rho", r.rho},
          {"kappa", r.kappa},
          {"delta", r.delta},
          {"stayed_in_region", r.stayed_in_region}};
}

// ------------------------------------------------------------ commands

int cmd_ground_state(const Options& o) {
  ModelConfig mc = load_model_config(o.config);
  if (mc.theta) throw config_error("ground-state runs on the undeformed model; drop the deform section");
  double tol = o.tol > 0.0 ? o.tol : 1e-5;
  int j = mc.solver.j;
  ResonanceResult r = solve_phi(mc.H, j, solve_config(mc, o));
  OracleEigen oe = oracle_level_eigenvalue(mc.H, mc.n_max, j);
  double diff = std::abs(r.e - oe.value);
  bool pass = diff <= tol;
  json out = {{"command", "ground-state"},
              {"pipeline", result_json(r)},
              {"e_pipeline", complex_json(r.e)},
              {"e_oracle", complex_json(oe.value)},
              {"oracle_n_max", mc.n_max},
              {"discrepancy", diff},
              {"tol", tol},
              {"status", pass ? "PASS" : "FAIL"}};
  write_json(fs::path(o.out) / "results.json", out);
  std::printf("e_pipeline = %.12g%+.3gi  e_oracle = %.12g%+.3gi  |diff| = %.3g  %s\n", r.e.real(), r.e.imag(),
              oe.value.real(), oe.value.imag(), diff, pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

int cmd_resonance(const Options& o) {
  ModelConfig mc = load_model_config(o.config);
  std::vector<cd> thetas;
  for (const auto& s : o.thetas) thetas.push_back(parse_theta(s));
  if (thetas.empty() && mc.theta) thetas.push_back(*mc.theta);
  if (thetas.empty()) throw config_error("resonance needs a deformation angle (--theta or deform section)");
  int j = mc.solver.j;
  double tol = o.tol > 0.0 ? o.tol : 1e-4;
  double gamma = fgr_width(mc.H, j);
  double g = mc.H.interaction.g;
  json runs = json::array();
  std::vector<cd> values;
  bool cones = true;
  for (cd th : thetas) {
    GHHamiltonian Ht = complex_deform(mc.H, th);
    ResonanceResult r = solve_phi(Ht, j, solve_config(mc, o));
    OracleEigen oe = oracle_level_eigenvalue(Ht, mc.n_max, j);
    SpectralRegion reg = gap_and_region(gh_normalized(Ht).particle, j);
    bool cone = cone_check(oe.spectrum, oe.value, th, &reg);
    cones = cones && cone;
    values.push_back(r.e);
    runs.push_back({{"theta", complex_json(th)},
                    {"pipeline", result_json(r)},
                    {"e_oracle", complex_json(oe.value)},
                    {"oracle_overlap", oe.overlap},
                    {"cone_ok", cone}});
    std::printf("theta = %g%+gi  e_%d = %.12g%+.6gi  oracle %.12g%+.6gi  cone %s\n", th.real(), th.imag(), j,
                r.e.real(), r.e.imag(), oe.value.real(), oe.value.imag(), cone ? "ok" : "VIOLATED");
  }
  double spread = 0.0;
  for (cd a : values)
    for (cd b : values) spread = std::max(spread, std::abs(a - b));
  bool pass = spread <= tol && cones;
  json out = {{"command", "resonance"},
              {"j", j},
              {"runs", runs},
              {"theta_spread", spread},
              {"fgr_gamma", gamma},
              {"fgr_im_e", -g * g * gamma},
              {"cone_ok", cones},
              {"tol", tol},
              {"status", pass ? "PASS" : "FAIL"}};
  write_json(fs::path(o.out) / "results.json", out);
  std::printf("theta spread %.3g  -g^2 gamma_FGR = %.6g  %s\n", spread, -g * g * gamma, pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

void write_snapshots(const fs::path& dir, const KernelSequence& s, int step) {
  char name[32];
  std::snprintf(name, sizeof name, "step_%02d.json", step);
  write_json(dir / "kernels" / name, to_json(s));
}

int cmd_flow(const Options& o) {
  ModelConfig mc = load_model_config(o.config);
  if (mc.theta) throw config_error("flow runs on the undeformed model; drop the deform section");
  double rho = o.rho > 0.0 ? o.rho : mc.flow.rho;
  WickConfig cfg;
  cfg.rho = rho;
  cfg.j = mc.solver.j;
  cfg.L_max = mc.solver.L_max;
  cfg.mu = mc.H.interaction.mu;
  cfg.lambda = mc.H.particle.level(cfg.j);
  fs::path dir(o.out);
  KernelSequence s = first_decimation(mc.H, cfg);
  if (mc.flow.stable) split_stable(s);
  int code = 0;
  FlowTrace trace;
  try {
    FlowResult fr = flow(s, mc.flow.steps, rho, cfg);
    trace = fr.trace;
    write_snapshots(dir, s, 0);
    write_snapshots(dir, fr.final, mc.flow.steps);
  } catch (const flow_divergence& e) {
    trace = e.trace;
    std::fprintf(stderr, "srg: %s\n", e.what());
    code = 3;
  }
  write_file(dir / "flow.csv", flow_csv(trace));
  for (const auto& w : trace.warnings) std::fprintf(stderr, "srg: warning: %s\n", w.c_str());
  std::fputs(flow_csv(trace).c_str(), stdout);
  return code;
}

// ------------------------------------------------------------ verify

struct Check {
  std::string name;
  double residual;
  double tol;
};

int report(const std::vector<Check>& checks) {
  int bad = 0;
  for (const auto& c : checks) {
    bool ok = c.residual <= c.tol;
    if (!ok) ++bad;
    std::printf("%-4s %-44s %.3e (tol %.1e)\n", ok ? "ok" : "FAIL", c.name.c_str(), c.residual, c.tol);
  }
  return bad ? 1 : 0;
}

std::vector<Check> verify_ccr(double tol) {
  ModeSet m = gauss_modes(3);
  FockBasis b = build_basis(m, 4);
  std::vector<Check> out;
  for (int i = 0; i < 3; ++i) {
    Mat a = ladder(b, i, LadderKind::annihilate), ad = ladder(b, i, LadderKind::create);
    Mat c = a * ad - ad * a;
    double res = 0.0;
    for (int s = 0; s < b.dim(); ++s)
      if (b.occupation(s) < 4) res = std::max(res, (c.col(s) - Mat::Identity(b.dim(), b.dim()).col(s)).norm());
    out.push_back({"[a_" + std::to_string(i) + ", a*_" + std::to_string(i) + "] = 1 below the cap", res, tol});
    out.push_back({"a*_" + std::to_string(i) + " is the adjoint of a_" + std::to_string(i), (ad - a.adjoint()).norm(), tol});
  }
  Mat N = number_operator(b);
  Mat sum = Mat::Zero(b.dim(), b.dim());
  for (int i = 0; i < 3; ++i) sum += ladder(b, i, LadderKind::create) * ladder(b, i, LadderKind::annihilate);
  out.push_back({"sum a*a = N", (sum - N).norm(), tol});
  return out;
}

std::vector<Check> verify_feshbach(double tol, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uE(0.4, 0.75), ug(0.01, 0.1), uk(0.05, 1.0), uw(0.05, 0.5);
  std::vector<Check> out;
  for (int t = 0; t < 5; ++t) {
    double E = uE(rng), g = ug(rng);
    ModeSet m = explicit_modes({uk(rng)}, {uw(rng)});
    GHHamiltonian H = build_nelson(two_level_particle(E, 1.0), kappa_sqrt_gauss(0.5), g, 0.5, m);
    SpectralRegion reg = gap_and_region(H.particle, 0);
    Decimation dec = build_decimation(H, build_basis(m, 4), 0, std::min(kappa_estimate(H.particle, reg), 0.5));
    cd probe = reg.lambda_j + cd(-reg.delta / 6.0, reg.delta / 6.0);
    out.push_back({"resolvent identity, instance " + std::to_string(t), resolvent_identity_check(dec, probe), tol});
  }
  return out;
}

std::vector<Check> verify_wick(double tol) {
  ModeSet m = explicit_modes({0.1175, 0.2375, 0.6}, {0.05, 0.1, 0.3});
  GHHamiltonian H = build_nelson(two_level_particle(0.25, 1.0), kappa_sqrt_gauss(0.3), 0.05, 0.5, m);
  const double rho = 0.25;
  const int L = 3, Ncmp = 2;
  std::vector<int> imap;
  FockBasis small = build_basis(scaled_modes(m, rho, &imap), Ncmp);
  std::vector<double> energies, e_in;
  for (int s = 0; s < small.dim(); ++s) energies.push_back(small.energy(s));
  for (double e : energies)
    if (e <= 1.0) e_in.push_back(e);
  WickConfig c;
  c.rho = rho;
  c.L_max = L;
  c.max_mn = 2 * Ncmp;
  c.lambda = cd(0.003, -0.001);
  c.r_grid = merge_grid(default_r_grid(), e_in);
  c.w00_grid = merge_grid(default_w00_grid(), energies);
  Mat Hk = assemble_kernel_hamiltonian(first_decimation(H, c), small);
  FockBasis big = build_basis(m, Ncmp + 2 * L);
  Mat Hm = matrix_renormalized(build_decimation(H, big, 0, rho), c.lambda, L, map_states(small, big, imap));
  return {{"Wick recombination vs matrix pipeline", (Hk - Hm).norm() / Hm.norm(), tol}};
}

std::vector<Check> verify_norms(double tol, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ModeSet m = gauss_modes(4);
  std::vector<Check> out;
  Kernel w(1, 0, default_r_grid(), m.momenta);
  for (auto& v : w.values) v = cd(u(rng), u(rng));
  Kernel w2 = w;
  for (auto& v : w2.values) v *= 2.0;
  double n1 = norm_mu_s(w, 0.5, 1), n2 = norm_mu_s(w2, 0.5, 1);
  out.push_back({"norm homogeneity", std::abs(n2 - 2.0 * n1) / n1, tol});
  KernelSequence f = free_field_sequence(m.momenta, m.weights);
  NormReport nr = norm_report(f);
  out.push_back({"free field: full norm 1", std::abs(nr.full - 1.0), tol});
  out.push_back({"free field: interaction norm 0", nr.interaction, tol});
  Kernel sym(1, 1, {0.0, 1.0}, m.momenta);
  for (auto& v : sym.values) v = cd(u(rng), u(rng));
  Kernel s1 = symmetrize(sym), s2 = symmetrize(s1);
  double d = 0.0;
  for (std::size_t i = 0; i < s1.values.size(); ++i) d = std::max(d, std::abs(s1.values[i] - s2.values[i]));
  out.push_back({"symmetrization is idempotent", d, tol});
  return out;
}

std::vector<Check> verify_pf(double tol) {
  PFCouplingReport rep = pauli_fierz_transform(gaussian_cutoff(1.0), mollifier_tanh(), linspace(0.0, 20.0, 32),
                                               linspace(0.0, 4.0, 32, true), 4, 2, 2);
  double at0 = 0.0;
  for (int l = 0; l < 2; ++l)
    for (std::size_t ik = 0; ik < rep.k_grid.size(); ++ik) at0 = std::max(at0, std::abs(rep.f[l][ik]));
  std::vector<Check> out{{"f vanishes at x = 0", at0, tol}};
  out.push_back({"sup |chi| / min(1, sqrt|k| <x>) finite", std::isfinite(rep.c1) ? 0.0 : 1.0, tol});
  std::printf("     C1 = %.6g\n", rep.c1);
  return out;
}

std::vector<Check> verify_spectral(double tol) {
  double g = 0.1;
  GHHamiltonian H = build_nelson(trivial_particle(), kappa_const(1.0), g, 0.0, explicit_modes({1.0}, {1.0}));
  SolveConfig c;
  c.rho = 0.25;
  c.L_max = 6;
  std::vector<Check> out;
  out.push_back({"displacement model: pipeline vs -g^2", std::abs(solve_phi(H, 0, c).e + g * g), std::max(tol, 1e-6)});
  out.push_back({"displacement model: oracle vs -g^2",
                 std::abs(oracle_level_eigenvalue(H, 12, 0).value + g * g), std::max(tol, 1e-12)});
  std::vector<cd> eigs{cd(0.0), cd(0.1, -0.01), cd(0.3, -0.1)};
  out.push_back({"cone check on a rotated ray", cone_check(eigs, 0.0, cd(0.0, 0.3)) ? 0.0 : 1.0, 0.0});
  return out;
}

int cmd_verify(const Options& o) {
  double tol = o.tol > 0.0 ? o.tol : 1e-9;
  const std::string& s = o.suite;
  std::vector<Check> checks;
  if (s == "ccr") checks = verify_ccr(tol);
  else if (s == "feshbach") checks = verify_feshbach(tol, o.seed);
  else if (s == "wick") checks = verify_wick(tol);
  else if (s == "norms") checks = verify_norms(tol, o.seed);
  else if (s == "pf") checks = verify_pf(tol);
  else if (s == "spectral") checks = verify_spectral(tol);
  else throw usage_error("unknown suite '" + s + "' (ccr | feshbach | wick | norms | pf | spectral)");
  return report(checks);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral renormalization group pipeline"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* c, bool config) {
    if (config) c->add_option("--config", o.config, "model config (JSON)")->required();
    c->add_option("--out", o.out, "output directory");
    c->add_option("--tol", o.tol, "pass/fail tolerance");
    c->add_option("--rho", o.rho, "decimation scale");
    c->add_option("--seed", o.seed, "seed for randomized suites");
  };
  auto* gs = app.add_subcommand("ground-state", "pipeline and oracle ground energy");
  common(gs, true);
  auto* rs = app.add_subcommand("resonance", "deformed pipeline over a list of angles");
  common(rs, true);
  rs->add_option("--theta", o.thetas, "deformation angle \"re,im\" (repeatable)");
  auto* fl = app.add_subcommand("flow", "iterate the RG map and write flow.csv");
  common(fl, true);
  auto* vf = app.add_subcommand("verify", "run an invariant suite");
  common(vf, false);
  vf->add_option("suite", o.suite, "ccr | feshbach | wick | norms | pf | spectral")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (*gs) return cmd_ground_state(o);
    if (*rs) return cmd_resonance(o);
    if (*fl) return cmd_flow(o);
    return cmd_verify(o);
  } catch (const config_error& e) {
    std::fprintf(stderr, "srg: config error: %s\n", e.what());
    return 2;
  } catch (const usage_error& e) {
    std::fprintf(stderr, "srg: %s\n", e.what());
    return 2;
  } catch (const model_error& e) {
    std::fprintf(stderr, "srg: model error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "srg: %s\n", e.what());
    return 1;
  }
}
