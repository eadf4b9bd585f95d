// Regenerates the bundled corpus: every registered system spec plus the
// domain specs used by the regularity examples. Output is byte-deterministic
// so the committed corpus can be diffed against a fresh run.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "smalltime/corpus.hpp"
#include "smalltime/regular.hpp"

namespace fs = std::filesystem;
namespace st = smalltime;

namespace {

void write_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) {
    std::fprintf(stderr, "cannot write %s\n", path.c_str());
    std::exit(1);
  }
  out << j.dump(2) << "\n";
}

st::Polynomial hamiltonian_qp() {
  // H(q, p) = p^2/2 + q^4/4, the energy of the cubic-restoring oscillator
  return st::add(st::poly_monomial(2, st::rat(1, 2), {0, 2}),
                 st::poly_monomial(2, st::rat(1, 4), {4, 0}));
}

st::DomainSpec ik_graph_domain(int n) {
  std::vector<st::SignomialTerm> terms;
  for (int i = 1; i < n; ++i) {
    st::SignomialTerm t;
    t.c = st::rat(1);
    t.r.assign(static_cast<std::size_t>(n), st::Rat(0));
    t.r[static_cast<std::size_t>(i)] = st::Rat(1, 2 * i + 1);
    terms.push_back(std::move(t));
  }
  return st::DomainSpec::graph(n, 0, std::move(terms));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? argv[1] : "corpus";
  fs::create_directories(root / "systems");
  fs::create_directories(root / "domains");

  for (const auto& [name, sys] : st::corpus_systems())
    write_file(root / "systems" / (name + ".json"), nlohmann::json(sys));

  // cone around the last coordinate for the 3d driftless system
  {
    std::vector<st::SignomialTerm> terms;
    for (int i = 0; i < 2; ++i) {
      st::SignomialTerm t{st::rat(3, 4), std::vector<st::Rat>(3, st::Rat(0))};
      t.r[static_cast<std::size_t>(i)] = st::rat(1);
      terms.push_back(std::move(t));
    }
    write_file(root / "domains" / "bm3_cone.json",
               st::domain_to_json(st::DomainSpec::graph(3, 2, std::move(terms))));
  }

  // root-exponent graph matched to the integrator chain's scalings
  write_file(root / "domains" / "ik_n3_graph.json", st::domain_to_json(ik_graph_domain(3)));

  // power-matched graph for the cyclic cascade
  {
    const auto prop = st::dist_scalings(st::make_lorenz96(4));
    const st::Rat r0 =
        st::Rat(prop.decomp.scalings[3].pair.num1, prop.decomp.scalings[0].pair.num1);
    st::SignomialTerm t{st::rat(1), std::vector<st::Rat>(4, st::Rat(0))};
    t.r[0] = r0;
    write_file(root / "domains" / "lorenz96_n4_graph.json",
               st::domain_to_json(st::DomainSpec::graph(4, 3, {t})));
  }

  // energy level sets of the oscillator, recentred at the two boundary cases
  write_file(root / "domains" / "langevin_level_moving.json",
             st::domain_to_json(
                 st::level_set_domain(hamiltonian_qp(), {st::rat(1, 2), st::rat(1)})));
  write_file(root / "domains" / "langevin_level_turning.json",
             st::domain_to_json(
                 st::level_set_domain(hamiltonian_qp(), {st::rat(1, 2), st::rat(0)})));

  // a feasible target the duplicated-integral system can never enter
  {
    st::SignomialTerm t{st::rat(1), std::vector<st::Rat>(3, st::Rat(0))};
    t.r[2] = st::rat(1);
    write_file(root / "domains" / "npnh_mismatch.json",
               st::domain_to_json(st::DomainSpec::graph(3, 1, {t})));
  }

  // simple 5d graph paired with the defective cascade variant
  {
    st::SignomialTerm t{st::rat(1), std::vector<st::Rat>(5, st::Rat(0))};
    t.r[0] = st::rat(1);
    write_file(root / "domains" / "lorenz96_n5_graph.json",
               st::domain_to_json(st::DomainSpec::graph(5, 4, {t})));
  }

  std::printf("corpus written under %s\n", root.c_str());
  return 0;
}
