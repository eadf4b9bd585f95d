// Command-line front end: parse system/domain specs, dispatch to the library,
// and emit matching human-readable and JSON reports.
//
// Exit codes: 0 success, 2 parse/usage error, 3 inconclusive verdict (the
// `regular` command only), 4 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "smalltime/control.hpp"
#include "smalltime/propagation.hpp"
#include "smalltime/regular.hpp"
#include "smalltime/saturation.hpp"

namespace st = smalltime;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitInconclusive = 3;
constexpr int kExitNumerical = 4;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return nlohmann::json::parse(in);
}

st::SdeSystem load_system(const std::string& path) {
  return load_json(path).get<st::SdeSystem>();
}

st::DomainSpec load_domain(const std::string& path) {
  return st::domain_from_json(load_json(path));
}

// comma-separated rationals, e.g. "1/2,-1/3,0"
std::vector<st::Rat> parse_rats(const std::string& csv, int n) {
  std::vector<st::Rat> out;
  std::string cur;
  for (char c : csv + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(st::rat_parse(cur));
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (static_cast<int>(out.size()) != n)
    throw std::invalid_argument("expected " + std::to_string(n) + " comma-separated rationals");
  return out;
}

// reports are written whole or not at all
void write_json_atomic(const std::string& path, const nlohmann::json& j) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

void maybe_write(const std::string& path, const nlohmann::json& j) {
  if (!path.empty()) write_json_atomic(path, j);
}

std::string poly_or_zero(const st::Polynomial& p) { return st::poly_str(p); }

void print_system_head(const st::SdeSystem& sys) {
  std::string forced;
  for (int i = 0; i < sys.n; ++i)
    if (sys.sigma[static_cast<std::size_t>(i)] > 0.0) {
      if (!forced.empty()) forced += ", ";
      forced += std::to_string(i);
    }
  std::printf("system: n=%d, noise on [%s]\n", sys.n, forced.c_str());
}

int layer_of(const st::LayerDecomposition& dec, int coord) {
  for (std::size_t l = 0; l < dec.layers.size(); ++l)
    for (int j : dec.layers[l])
      if (j == coord) return static_cast<int>(l);
  return -1;
}

void print_propagation(const st::PropagationResult& res) {
  const char* name = res.mode == st::Mode::Lil ? "pathwise (lil)" : "distributional (dist)";
  if (res.propagating)
    std::printf("%s: noise propagating, dim %d\n", name, res.dim);
  else {
    std::string unc;
    for (int j : res.uncovered) {
      if (!unc.empty()) unc += ", ";
      unc += std::to_string(j);
    }
    std::printf("%s: noise defective, stuck after layer %d, uncovered [%s]\n", name,
                res.stuck_layer, unc.c_str());
  }
  std::printf("  %-6s %-14s %-6s %-4s %s\n", "coord", "scaling", "layer", "tie",
              "limit-part");
  for (int jc = 0; jc < res.decomp.limit.n; ++jc) {
    const auto& s = res.decomp.scalings[static_cast<std::size_t>(jc)];
    const int lay = layer_of(res.decomp, jc);
    std::printf("  %-6d %-14s %-6s %-4s %s\n", jc, st::format(s).c_str(),
                lay >= 0 ? std::to_string(lay).c_str() : "-",
                res.lil_tie[static_cast<std::size_t>(jc)] ? "*" : "",
                poly_or_zero(res.decomp.limit.comp[static_cast<std::size_t>(jc)]).c_str());
  }
  if (!res.layer_min.empty()) {
    std::string mins;
    for (long long m : res.layer_min) {
      if (!mins.empty()) mins += ", ";
      mins += st::format_half(m);
    }
    std::printf("  round minima: %s\n", mins.c_str());
  }
}

// --- commands -------------------------------------------------------------------

int cmd_classify(const std::string& sys_path, const std::string& json_out) {
  const auto sys = load_system(sys_path);
  const auto lil = st::lil_scalings(sys);
  const auto dist = st::dist_scalings(sys);
  print_system_head(sys);
  print_propagation(lil);
  print_propagation(dist);
  nlohmann::json j;
  j["lil"] = st::classify_report(sys, lil);
  j["dist"] = st::classify_report(sys, dist);
  maybe_write(json_out, j);
  return kExitOk;
}

void require_eps(double eps) {
  if (!(eps > 0.0 && eps < std::exp(-1.0)))
    throw std::invalid_argument("--eps must lie in (0, 1/e)");
}

int cmd_rescale(const std::string& sys_path, const std::string& mode, double eps,
                const std::string& json_out) {
  require_eps(eps);
  const auto sys = load_system(sys_path);
  const auto res = mode == "lil" ? st::lil_scalings(sys) : st::dist_scalings(sys);
  print_system_head(sys);
  print_propagation(res);
  nlohmann::json j;
  j["mode"] = st::mode_name(res.mode);
  j["eps"] = eps;
  j["report"] = st::classify_report(sys, res);
  if (!res.propagating) {
    std::printf("no rescaled equation: the system is noise defective\n");
    j["rescaled"] = false;
    maybe_write(json_out, j);
    return kExitOk;
  }
  const auto r = st::rescaled_drift(sys, res, eps);
  std::printf("rescaled equation at eps = %s:\n", fmt(eps).c_str());
  std::printf("  noise multiplier: %s\n", fmt(r.noise_mult).c_str());
  std::printf("  remainder (%zu terms):\n", r.rem.terms.size());
  std::printf("    %-6s %-14s %-14s %s\n", "coord", "exponent", "weight", "monomial");
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : r.rem.terms) {
    const double w = st::eval_epsilon(t.exponent, eps);
    const st::Polynomial single{r.n, {t.m}};
    std::printf("    %-6d %-14s %-14s %s\n", t.comp, st::format(t.exponent).c_str(),
                fmt(w).c_str(), st::poly_str(single).c_str());
    nlohmann::json jt;
    jt["comp"] = t.comp;
    jt["exponent"] = st::ScalingExt::finite(t.exponent.num1, t.exponent.num2);
    jt["weight"] = w;
    jt["c"] = st::rat_str(t.m.c);
    jt["e"] = t.m.e;
    terms.push_back(std::move(jt));
  }
  j["rescaled"] = true;
  j["noise_mult"] = r.noise_mult;
  j["limit"] = st::field_to_json(r.limit);
  j["remainder"] = std::move(terms);
  maybe_write(json_out, j);
  return kExitOk;
}

int cmd_simulate(const std::string& sys_path, std::uint64_t seed, double t, int trials,
                 double dt, double eps, const std::string& mode, const std::string& json_out) {
  const auto sys = load_system(sys_path);
  st::CompiledField drift;
  std::vector<double> sigma;
  const bool rescaled = eps > 0.0;
  if (rescaled) {
    require_eps(eps);
    const auto res = mode == "lil" ? st::lil_scalings(sys) : st::dist_scalings(sys);
    if (!res.propagating)
      throw std::invalid_argument("system is noise defective; nothing to rescale");
    const auto r = st::rescaled_drift(sys, res, eps);
    drift = st::compile_drift(r);
    sigma = r.sigma;
    for (auto& s : sigma) s *= r.noise_mult;
  } else {
    drift = st::compile(sys.drift);
    sigma = sys.sigma;
  }

  const std::size_t nu = static_cast<std::size_t>(sys.n);
  const std::vector<double> x0(nu, 0.0);
  std::vector<std::vector<double>> terminals;
  int dead = 0;
  for (int k = 0; k < trials; ++k) {
    st::RngStream rng(seed, static_cast<std::uint64_t>(k));
    std::vector<double> xt;
    if (st::em_terminal(drift, sigma, x0, t, dt, rng, xt))
      terminals.push_back(std::move(xt));
    else
      ++dead;
  }

  std::vector<double> mean(nu, 0.0);
  std::vector<std::vector<double>> cov(nu, std::vector<double>(nu, 0.0));
  for (const auto& x : terminals)
    for (std::size_t i = 0; i < nu; ++i) mean[i] += x[i];
  if (!terminals.empty())
    for (auto& m : mean) m /= static_cast<double>(terminals.size());
  if (terminals.size() > 1) {
    for (const auto& x : terminals)
      for (std::size_t i = 0; i < nu; ++i)
        for (std::size_t jc = 0; jc < nu; ++jc)
          cov[i][jc] += (x[i] - mean[i]) * (x[jc] - mean[jc]);
    for (auto& row : cov)
      for (auto& v : row) v /= static_cast<double>(terminals.size() - 1);
  }

  std::printf("simulate: seed %llu, trials %d, t %s, dt %s",
              static_cast<unsigned long long>(seed), trials, fmt(t).c_str(), fmt(dt).c_str());
  if (rescaled)
    std::printf(", eps %s, mode %s", fmt(eps).c_str(), mode.c_str());
  std::printf("\nalive %zu/%d\n", terminals.size(), trials);
  std::string ms;
  for (double m : mean) {
    if (!ms.empty()) ms += ", ";
    ms += fmt(m);
  }
  std::printf("terminal mean: [%s]\n", ms.c_str());
  std::printf("terminal covariance:\n");
  for (std::size_t i = 0; i < nu; ++i) {
    std::string row;
    for (std::size_t jc = 0; jc < nu; ++jc) {
      if (!row.empty()) row += ", ";
      row += fmt(cov[i][jc]);
    }
    std::printf("  [%s]\n", row.c_str());
  }

  nlohmann::json j;
  j["seed"] = seed;
  j["t"] = t;
  j["trials"] = trials;
  j["dt"] = dt;
  if (rescaled) {
    j["eps"] = eps;
    j["mode"] = mode;
  }
  j["alive"] = terminals.size();
  j["dead"] = dead;
  j["mean"] = mean;
  j["cov"] = cov;
  maybe_write(json_out, j);
  return kExitOk;
}

int cmd_brackets(const std::string& sys_path, int depth, const std::string& at,
                 const std::string& json_out) {
  const auto sys = load_system(sys_path);
  const std::vector<st::Rat> x =
      at.empty() ? std::vector<st::Rat>(static_cast<std::size_t>(sys.n), st::Rat(0))
                 : parse_rats(at, sys.n);
  st::HormanderOptions opt;
  opt.depth = depth;
  const auto rep = st::hormander_rank(sys, x, opt);
  std::string pt;
  for (const auto& xi : x) {
    if (!pt.empty()) pt += ", ";
    pt += st::rat_str(xi);
  }
  std::printf("point: [%s]\n", pt.c_str());
  std::printf("bracket rank %d of %d (%s), depth used %d, fields considered %d\n", rep.rank,
              sys.n, rep.full_rank ? "full" : "degenerate", rep.depth_used,
              rep.fields_considered);
  nlohmann::json j;
  j["rank"] = rep.rank;
  j["full_rank"] = rep.full_rank;
  j["depth_used"] = rep.depth_used;
  j["fields_considered"] = rep.fields_considered;
  maybe_write(json_out, j);
  return kExitOk;
}

int cmd_saturate(const std::string& sys_path, const std::string& json_out) {
  const auto sys = load_system(sys_path);
  const auto rep = st::saturate(sys);
  std::printf("saturated family: %zu elements, %d sweeps%s\n", rep.elements.size(),
              rep.steps_used, rep.reached_fixed_point ? "" : " (sweep cap hit)");
  nlohmann::json els = nlohmann::json::array();
  for (std::size_t i = 0; i < rep.elements.size(); ++i) {
    const auto& el = rep.elements[i];
    nlohmann::json je;
    je["kind"] = el.is_ray ? "ray" : "flow";
    je["symmetric"] = el.symmetric;
    je["provenance"] = el.provenance;
    if (el.is_ray) {
      std::string coords;
      nlohmann::json jr = nlohmann::json::array();
      for (const auto& c : el.ray) {
        if (!coords.empty()) coords += ", ";
        coords += st::rat_str(c);
        jr.push_back(st::rat_str(c));
      }
      je["ray"] = std::move(jr);
      std::printf("  [%zu] ray   %-10s (%s)  <- %s\n", i,
                  el.symmetric ? "two-sided" : "one-sided", coords.c_str(),
                  el.provenance.c_str());
    } else {
      je["field"] = st::field_to_json(el.field);
      std::printf("  [%zu] flow  %-10s  <- %s\n", i, el.symmetric ? "two-sided" : "one-sided",
                  el.provenance.c_str());
    }
    els.push_back(std::move(je));
  }
  std::string basis;
  for (int b : rep.basis_index) {
    if (!basis.empty()) basis += ", ";
    basis += std::to_string(b);
  }
  std::printf("exactly controllable: %s", rep.exact_controllable ? "yes" : "no");
  std::printf("; two-sided ray rank %zu of %d", rep.basis.size(), sys.n);
  if (!basis.empty()) std::printf("; basis elements [%s]", basis.c_str());
  std::printf("\n");

  nlohmann::json j;
  j["exact_controllable"] = rep.exact_controllable;
  j["reached_fixed_point"] = rep.reached_fixed_point;
  j["steps_used"] = rep.steps_used;
  j["rank"] = rep.basis.size();
  j["elements"] = std::move(els);
  j["basis_index"] = rep.basis_index;
  maybe_write(json_out, j);
  return kExitOk;
}

int cmd_gramian(const std::string& sys_path, double t, double tol,
                const std::string& json_out) {
  const auto sys = load_system(sys_path);
  st::GramianOptions opt;
  opt.t = t;
  const std::vector<double> x0(static_cast<std::size_t>(sys.n), 0.0);
  const auto rep = st::gramian(sys.drift, sys.sigma, x0, opt);
  if (rep.dead) throw std::runtime_error("gramian integration left the guard region");

  // the tolerance is relative to the mean eigenvalue
  const bool invertible = rep.trace > 0.0 && rep.min_eig > tol * rep.trace / sys.n;
  const double det = rep.gram.determinant();

  std::printf("controllability gramian at t = %s (zero control, from the origin):\n",
              fmt(t).c_str());
  for (int i = 0; i < sys.n; ++i) {
    std::string row;
    for (int jc = 0; jc < sys.n; ++jc) {
      if (!row.empty()) row += ", ";
      row += fmt(rep.gram(i, jc));
    }
    std::printf("  [%s]\n", row.c_str());
  }
  std::printf("min eigenvalue %s, trace %s, det %s\n", fmt(rep.min_eig).c_str(),
              fmt(rep.trace).c_str(), fmt(det).c_str());
  std::printf("invertible: %s (relative tolerance %s)\n", invertible ? "yes" : "no",
              fmt(tol).c_str());
  std::printf("flow-map inverse check |KJ - I| = %s\n", fmt(rep.inverse_check).c_str());

  nlohmann::json j;
  j["t"] = t;
  j["tol"] = tol;
  nlohmann::json g = nlohmann::json::array();
  for (int i = 0; i < sys.n; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int jc = 0; jc < sys.n; ++jc) row.push_back(rep.gram(i, jc));
    g.push_back(std::move(row));
  }
  j["gram"] = std::move(g);
  j["min_eig"] = rep.min_eig;
  j["trace"] = rep.trace;
  j["det"] = det;
  j["invertible"] = invertible;
  j["inverse_check"] = rep.inverse_check;
  maybe_write(json_out, j);
  return kExitOk;
}

int cmd_regular(const std::string& sys_path, const std::string& dom_path, std::uint64_t seed,
                const std::string& shift, const std::string& json_out) {
  const auto sys = load_system(sys_path);
  const auto dom = load_domain(dom_path);
  const std::vector<st::Rat> xstar =
      shift.empty() ? std::vector<st::Rat>(static_cast<std::size_t>(sys.n), st::Rat(0))
                    : parse_rats(shift, sys.n);
  st::RegularOptions opt;
  opt.seed = seed;
  opt.probe.seed = seed ^ 0x9E3779B97F4A7C15ULL;
  const auto rep = st::check_regular(sys, xstar, dom, opt);

  std::string pt;
  for (const auto& xi : xstar) {
    if (!pt.empty()) pt += ", ";
    pt += st::rat_str(xi);
  }
  std::printf("stage 1, shift: x* = [%s]\n", pt.c_str());
  if (!rep.prop.propagating) {
    std::printf("stage 2, propagation: noise defective\n");
  } else {
    std::string sc;
    for (const auto& s : rep.prop.decomp.scalings) {
      if (!sc.empty()) sc += " ";
      sc += st::format(s);
    }
    std::printf("stage 2, propagation: noise propagating, dim %d, scalings %s\n", rep.prop.dim,
                sc.c_str());
  }
  if (rep.limit_computed) {
    std::printf("stage 3, domain limit: %s",
                st::limit_verdict_name(rep.limit.verdict).c_str());
    if (rep.limit.form == st::DomainSpec::Form::Graph)
      std::printf(", %zu critical terms", rep.limit.critical.size());
    else
      std::printf(", surviving level part %s", st::poly_str(rep.limit.leading).c_str());
    if (rep.limit.verdict != st::LimitVerdict::DegenerateEmpty)
      std::printf("; target margin %s, %s (witness gap %s)", fmt(rep.limit.margin).c_str(),
                  rep.limit.feasible ? "feasible" : "infeasible",
                  fmt(rep.limit.witness_gap).c_str());
    std::printf("\n");
  }
  if (rep.sat_ran)
    std::printf("stage 4, saturation: two-sided ray rank %zu of %d%s\n", rep.sat.basis.size(),
                sys.n, rep.sat.exact_controllable ? " (exactly controllable)" : "");
  if (rep.probe_ran) {
    if (rep.probe.reached)
      std::printf("stage 4, probe: entered the target at t = %s (attempt %d)\n",
                  fmt(rep.probe.witness_time).c_str(), rep.probe.attempts_used);
    else
      std::printf("stage 4, probe: target missed in %d attempts (best gap %s)\n",
                  rep.probe.attempts_used, fmt(rep.probe.best_gap).c_str());
  }
  if (rep.regular)
    std::printf("verdict: Regular (evidence: %s)\n", rep.reach_evidence.c_str());
  else
    std::printf("verdict: Inconclusive (failing stage: %s)\n", rep.failing_stage.c_str());

  nlohmann::json j = st::regular_report_json(rep);
  j["seed"] = seed;
  j["shift"] = pt;
  maybe_write(json_out, j);
  return rep.regular ? kExitOk : kExitInconclusive;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scaling-limit toolkit for polynomial diffusions"};
  app.require_subcommand(1);

  std::string sys_path, dom_path, json_out, mode = "dist", shift, at;
  std::uint64_t seed = 0;
  double t = 1.0, eps = 0.0, dt = 1e-3, tol = st::kGramianTolRel;
  int trials = 200, depth = 0;

  auto* classify = app.add_subcommand("classify", "run both scaling procedures");
  classify->add_option("system", sys_path, "system spec JSON")->required();
  classify->add_option("--json", json_out, "write the JSON report here");

  auto* rescale = app.add_subcommand("rescale", "limit equation and remainder at a fixed eps");
  rescale->add_option("system", sys_path)->required();
  rescale->add_option("--mode", mode, "lil or dist")->check(CLI::IsMember({"lil", "dist"}));
  rescale->add_option("--eps", eps, "scale parameter in (0, 1/e)")->required();
  rescale->add_option("--json", json_out);

  auto* simulate = app.add_subcommand("simulate", "terminal statistics by Euler-Maruyama");
  simulate->add_option("system", sys_path)->required();
  simulate->add_option("--seed", seed, "RNG seed")->required();
  simulate->add_option("--t", t, "time horizon");
  simulate->add_option("--trials", trials, "number of paths");
  simulate->add_option("--dt", dt, "step size");
  simulate->add_option("--eps", eps, "simulate the rescaled equation at this eps");
  simulate->add_option("--mode", mode, "lil or dist")->check(CLI::IsMember({"lil", "dist"}));
  simulate->add_option("--json", json_out);

  auto* brackets = app.add_subcommand("brackets", "Lie bracket rank at a point");
  brackets->add_option("system", sys_path)->required();
  brackets->add_option("--depth", depth, "bracket depth (0 = dimension + 1)");
  brackets->add_option("--at", at, "evaluation point, comma-separated rationals");
  brackets->add_option("--json", json_out);

  auto* saturate = app.add_subcommand("saturate", "saturated direction family");
  saturate->add_option("system", sys_path)->required();
  saturate->add_option("--json", json_out);

  auto* gramian = app.add_subcommand("gramian", "controllability gramian along the drift");
  gramian->add_option("system", sys_path)->required();
  gramian->add_option("--t", t, "time horizon");
  gramian->add_option("--tol", tol, "relative invertibility tolerance");
  gramian->add_option("--json", json_out);

  auto* regular = app.add_subcommand("regular", "boundary regularity verdict");
  regular->add_option("system", sys_path)->required();
  regular->add_option("domain", dom_path, "domain spec JSON (origin on the boundary)")
      ->required();
  regular->add_option("--seed", seed, "RNG seed")->required();
  regular->add_option("--shift", shift, "boundary point x*, comma-separated rationals");
  regular->add_option("--json", json_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitParse;
  }

  try {
    if (app.got_subcommand(classify)) return cmd_classify(sys_path, json_out);
    if (app.got_subcommand(rescale)) return cmd_rescale(sys_path, mode, eps, json_out);
    if (app.got_subcommand(simulate))
      return cmd_simulate(sys_path, seed, t, trials, dt, eps, mode, json_out);
    if (app.got_subcommand(brackets)) return cmd_brackets(sys_path, depth, at, json_out);
    if (app.got_subcommand(saturate)) return cmd_saturate(sys_path, json_out);
    if (app.got_subcommand(gramian)) return cmd_gramian(sys_path, t, tol, json_out);
    if (app.got_subcommand(regular))
      return cmd_regular(sys_path, dom_path, seed, shift, json_out);
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParse;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParse;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitOk;
}
