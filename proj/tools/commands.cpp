#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "hqw/oracle.hpp"

namespace hqw::cli {

using nlohmann::json;
namespace fs = std::filesystem;

HierarchicalModel build_model(const io::ModelSpec& spec, const Options& opt) {
  ModelOptions mo;
  mo.dense_cap = opt.cap;
  mo.convention = opt.convention;
  return HierarchicalModel(spec.global, spec.locals, mo);
}

namespace {

EigenSystem shifted(EigenSystem sys, io::LocalShift shift) {
  if (shift == io::LocalShift::None) return sys;
  return shift_to_nonnegative(
             sys, shift == io::LocalShift::Min ? ShiftMode::MinShift : ShiftMode::MaxReflect)
      .first;
}

CMatrix shifted_matrix(const CMatrix& h, const EigenSystem& sys, io::LocalShift shift) {
  const auto n = h.rows();
  const CMatrix id = CMatrix::Identity(n, n);
  switch (shift) {
    case io::LocalShift::Min: return h - sys.values.minCoeff() * id;
    case io::LocalShift::MaxReflect: return sys.values.maxCoeff() * id - h;
    case io::LocalShift::None: break;
  }
  return h;
}

/// Fixed pseudo-random unit vector; the seed makes verify reproducible.
CVector seeded_state(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  CVector v(n);
  for (std::size_t i = 0; i < n; ++i) v(i) = Complex(gauss(rng), gauss(rng));
  return v / v.norm();
}

std::vector<QuantumState> as_states(const std::vector<CVector>& vs) {
  std::vector<QuantumState> out;
  for (const auto& v : vs) out.emplace_back(v, 1e-10);
  return out;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json groups_json(const EigenSystem& sys) {
  json a = json::array();
  for (const auto& g : sys.groups) a.push_back(g.size());
  return a;
}

struct CheckList {
  std::vector<Check>& out;
  const Options& opt;
  std::string suite;

  Check& add(std::string name, double residual, double tol, json detail = {}) {
    const double t = opt.tol.value_or(tol);
    out.push_back({std::move(name), suite, residual, t, residual <= t, false, std::move(detail)});
    return out.back();
  }
  void note(std::string name, json detail) {
    out.push_back({std::move(name), suite, 0.0, 0.0, true, true, std::move(detail)});
  }
};

/// q when every row of P equals q (H = K̄), else nothing.
std::optional<Vector> kbar_weights(const Matrix& p) {
  for (Eigen::Index r = 1; r < p.rows(); ++r)
    if (max_abs(Matrix(p.row(r) - p.row(0))) > 1e-12) return std::nullopt;
  if (p.minCoeff() <= 0.0 || p.rows() < 2) return std::nullopt;
  return Vector(p.row(0).transpose());
}

std::string tag(const std::string& base, double t) { return base + "[t=" + io::format_double(t) + "]"; }

}  // namespace

QuantumSetup quantum_setup(const HierarchicalModel& model, const io::Scenario* scenario) {
  const auto global_kind = scenario ? scenario->global_hamiltonian : io::GlobalHamiltonian::Walk;
  const auto local_kind = scenario ? scenario->local_hamiltonian : io::LocalHamiltonian::Laplacian;
  const auto shift = scenario ? scenario->local_shift : io::LocalShift::None;

  QuantumSetup q;
  const Matrix& lap_h = model.global().laplacian.matrix;
  const auto g = lap_h.rows();
  q.global_ham = global_kind == io::GlobalHamiltonian::Walk
                     ? CMatrix((Matrix::Identity(g, g) - lap_h).cast<Complex>())
                     : CMatrix(lap_h.cast<Complex>());
  for (std::size_t j = 0; j < model.global_size(); ++j) {
    const Matrix& lap = model.local(j).laplacian.matrix;
    const auto n = lap.rows();
    const CMatrix h = local_kind == io::LocalHamiltonian::Laplacian
                          ? CMatrix(lap.cast<Complex>())
                          : CMatrix((Matrix::Identity(n, n) - lap).cast<Complex>());
    const EigenSystem sys = local_kind == io::LocalHamiltonian::Laplacian
                                ? model.local(j).laplacian_spectrum
                                : eigh(h, model.options().tolerance);
    q.local_hams.push_back(shifted_matrix(h, sys, shift));
    q.local_systems.push_back(shifted(sys, shift));
  }
  return q;
}

std::vector<Check> run_checks(const HierarchicalModel& model, const io::Scenario* scenario,
                              const std::string& suite, const Options& opt) {
  std::vector<Check> checks;
  const bool all = suite == "all";
  require(all || suite == "spectra" || suite == "evolution" || suite == "distribution",
          ErrorKind::InvalidInput, "unknown suite \"" + suite + "\"");
  const bool dense_ok = model.total_dimension() <= opt.cap;

  if (all || suite == "spectra") {
    CheckList c{checks, opt, "spectra"};
    auto graph_checks = [&](const WalkData& w, const std::string& name) {
      const auto& sys = w.laplacian_spectrum;
      c.add(name + ".laplacian-reconstruction",
            max_abs(CMatrix(sys.reconstruct() - w.laplacian.matrix.cast<Complex>())), 1e-10);
      c.add(name + ".transition-reconstruction",
            max_abs(CMatrix(w.transition_spectrum.reconstruct() - w.transition().cast<Complex>())),
            1e-10);
      c.note(name + ".degenerate-groups",
             {{"values", vector_json(sys.values)}, {"group_sizes", groups_json(sys)}});
    };
    graph_checks(model.global(), "H");
    for (std::size_t j = 0; j < model.global_size(); ++j)
      graph_checks(model.local(j), "G" + std::to_string(j));

    if (dense_ok) {
      const Matrix pg = build_hdtrw(model);
      std::vector<Matrix> locals;
      for (const auto& w : model.locals()) locals.push_back(w.transition());
      c.add("hdtrw.assembly-vs-oracle",
            oracle::compare(pg, oracle::assemble_by_loops(
                                    model.global().transition(), locals,
                                    model.options().convention == SelectionConvention::Source),
                            0.0)
                .max_abs_diff,
            1e-12);
      const auto spec = hdtrw_eigenpairs(model);
      double worst = 0.0;
      for (const auto& pair : spec.pairs) {
        const CVector w = pair.vector(model);
        worst = std::max(worst, (pg.cast<Complex>() * w - pair.value * w).cwiseAbs().maxCoeff());
      }
      c.add("hdtrw.eigen-residual", worst, 1e-8,
            {{"pairs", spec.pairs.size()}, {"defective_tuples", spec.defective.size()}});

      for (double t : {0.1, 0.5, 1.0, 2.0}) {
        const Vector times = Vector::Constant(static_cast<Eigen::Index>(model.global_size()), t);
        const Matrix direct = build_hctrw(model, times);
        const auto deformed = hctrw_spectral(model, times);
        c.add(tag("hctrw.spectral-reconstruction", t),
              max_abs(Matrix(direct - deformed.reconstruct(model))), 1e-8);
        c.add(tag("hctrw.biorthogonality", t), deformed.biorthogonality_defect(), 1e-8);
        std::vector<Matrix> semigroups;
        for (const auto& w : model.locals()) {
          const auto n = w.transition().rows();
          const Matrix gen = -t * (Matrix::Identity(n, n) - w.transition());
          semigroups.push_back(oracle::matrix_exp(gen).real());
        }
        const Matrix reference = oracle::assemble_by_loops(
            model.global().transition(), semigroups,
            model.options().convention == SelectionConvention::Source);
        c.add(tag("hctrw.vs-oracle", t), max_abs(Matrix(direct - reference)), 1e-8);
      }
    } else {
      c.note("dense-checks", {{"skipped", "total dimension exceeds cap"}});
    }
  }

  const auto setup = quantum_setup(model, scenario);
  AssemblyOptions ao;
  ao.tolerance = model.options().tolerance;
  ao.dense_cap = opt.cap;
  const auto assembly = assemble_hamiltonian(setup.global_ham, setup.local_systems, ao);
  const auto dense_model = oracle::dense_model(setup.global_ham, setup.local_hams);

  CVector psi_h = scenario ? scenario->psi_h : seeded_state(model.global_size(), 11);
  std::vector<CVector> psi_locals;
  if (scenario) {
    psi_locals = scenario->psi_locals;
  } else {
    for (std::size_t j = 0; j < model.global_size(); ++j)
      psi_locals.push_back(seeded_state(model.local(j).size(), 17 + static_cast<unsigned>(j)));
  }
  const auto psis = as_states(psi_locals);
  const QuantumState global_state(psi_h, 1e-10);

  if (all || suite == "evolution") {
    CheckList c{checks, opt, "evolution"};
    if (dense_ok) {
      const CMatrix reference = oracle::dense_hamiltonian(dense_model);
      c.add("hamiltonian-vs-oracle", max_abs(CMatrix(assembly.dense() - reference)), 1e-9);
      const auto product = product_state(global_state, psis);
      for (double t : {0.3, 1.0, std::numbers::pi, 10.0}) {
        const CMatrix u = spectral_propagator(assembly, t);
        const auto dim = u.rows();
        c.add(tag("unitarity", t), max_abs(CMatrix(u.adjoint() * u - CMatrix::Identity(dim, dim))),
              1e-9);
        if (t == 10.0) continue;
        const CVector spectral = evolve(assembly, t, product).amplitudes();
        const CVector dense = oracle::matrix_exp(CMatrix(Complex(0.0, t) * reference), true) *
                              product.amplitudes();
        c.add(tag("propagation-vs-oracle", t), (spectral - dense).cwiseAbs().maxCoeff(), 1e-8);
      }
    } else {
      c.note("dense-checks", {{"skipped", "total dimension exceeds cap"}});
    }
  }

  if (all || suite == "distribution") {
    CheckList c{checks, opt, "distribution"};
    const std::vector<double> times =
        scenario ? scenario->times : std::vector<double>{0.0, 1.0, std::numbers::pi, 10.0};
    for (double t : times) {
      const auto dist = joint_distribution(assembly, t, global_state, psis);
      c.add(tag("normalization", t), dist.mass_defect(), 1e-9);
      if (dense_ok) {
        const auto reference = oracle::dense_joint_distribution(
            setup.global_ham, setup.local_hams, t, psi_h, psi_locals, oracle::MarginalBasis::Tuple,
            model.options().tolerance);
        c.add(tag("joint-vs-oracle", t),
              oracle::compare(std::span<const double>(dist.probabilities),
                              std::span<const double>(reference), 0.0)
                  .max_abs_diff,
              1e-8);
        const auto vertex = vertex_marginal(assembly, t, global_state, psis);
        c.note(tag("vertex-marginal", t), {{"mass_defect", vertex.mass_defect()},
                                           {"max_difference_from_joint", vertex.max_difference(dist)}});
      }
    }

    // K̄ consistency applies when H is K̄ and the Hamiltonians are the default ones.
    const bool default_hams = !scenario || (scenario->global_hamiltonian == io::GlobalHamiltonian::Walk &&
                                            scenario->local_hamiltonian == io::LocalHamiltonian::Laplacian &&
                                            scenario->local_shift == io::LocalShift::None);
    std::optional<Vector> q = scenario ? scenario->q : std::nullopt;
    if (!q) q = kbar_weights(model.global().transition());
    if (default_hams && q) {
      const KbarSpec spec(*q);
      const auto laps = model.local_spectra();
      for (double t : times) {
        const auto general = joint_distribution(assembly, t, global_state, psis);
        const auto closed = kbar_closed_form_distribution(spec, laps, t, global_state, psis);
        const auto three = kbar_joint_distribution(spec, laps, t, global_state, psis);
        c.add(tag("kbar.general-vs-closed-form", t), general.max_difference(closed), 1e-9);
        c.add(tag("kbar.general-vs-three-term", t), general.max_difference(three), 1e-9);
        c.add(tag("kbar.closed-form-vs-three-term", t), closed.max_difference(three), 1e-9,
              {{"three_term_min", three.min()}});
      }
      if (scenario && scenario->p) {
        const auto overlaps = tuple_overlaps(spec, laps, global_state);
        c.add("kbar.constant-overlap", overlaps.complex_spread, 1e-9,
              {{"p", overlaps.p}, {"modulus_spread", overlaps.modulus_spread}});
        c.add("kbar.asserted-p", std::abs(overlaps.p - *scenario->p), 1e-9);
        for (double t : times) {
          const auto three = kbar_joint_distribution(spec, laps, t, global_state, psis);
          const auto mix = factorized_distribution(spec, laps, t, *scenario->p, psis);
          c.add(tag("kbar.factorization", t), three.max_difference(mix), 1e-9);
        }
      }
    }
  }
  return checks;
}

std::string simulate(const io::Scenario& scenario, const Options& opt, json& report) {
  const auto start = std::chrono::steady_clock::now();
  const auto model = build_model(scenario.model, opt);
  const auto psis = as_states(scenario.psi_locals);
  const QuantumState global_state(scenario.psi_h, 1e-10);

  std::vector<JointDistribution> rows;
  json per_time = json::array();
  if (scenario.mode == io::Mode::Kbar) {
    const KbarSpec spec(*scenario.q);
    const auto laps = model.local_spectra();
    std::optional<double> p;
    if (scenario.p) p = require_constant_overlap(spec, laps, global_state);
    for (double t : scenario.times) {
      auto three = kbar_joint_distribution(spec, laps, t, global_state, psis);
      const auto closed = kbar_closed_form_distribution(spec, laps, t, global_state, psis);
      json entry{{"t", t},
                 {"mass_defect", three.mass_defect()},
                 {"min_probability", three.min()},
                 {"closed_form_vs_three_term", closed.max_difference(three)}};
      if (p) {
        require(std::abs(*p - *scenario.p) <= 1e-9, ErrorKind::ConstantOverlapViolated,
                "asserted p=" + io::format_double(*scenario.p) +
                    " differs from the tuple overlap " + io::format_double(*p));
        entry["factorization_residual"] =
            three.max_difference(factorized_distribution(spec, laps, t, *p, psis));
      }
      per_time.push_back(entry);
      rows.push_back(std::move(three));
    }
  } else {
    const auto setup = quantum_setup(model, &scenario);
    AssemblyOptions ao;
    ao.tolerance = model.options().tolerance;
    ao.dense_cap = opt.cap;
    const auto assembly = assemble_hamiltonian(setup.global_ham, setup.local_systems, ao);
    for (double t : scenario.times) {
      auto dist = joint_distribution(assembly, t, global_state, psis);
      json entry{{"t", t}, {"mass_defect", dist.mass_defect()}, {"min_probability", dist.min()}};
      if (model.total_dimension() <= opt.cap)
        entry["vertex_marginal_difference"] =
            vertex_marginal(assembly, t, global_state, psis).max_difference(dist);
      per_time.push_back(entry);
      rows.push_back(std::move(dist));
    }
  }

  std::ostringstream csv;
  const auto rank = model.local_shape().rank();
  for (std::size_t j = 0; j < rank; ++j) csv << "k_" << j << ',';
  csv << "t,probability\n";
  for (const auto& dist : rows) {
    std::vector<std::size_t> k(rank, 0);
    for (std::size_t flat = 0; flat < dist.probabilities.size(); ++flat, dist.shape.next(k)) {
      for (auto kj : k) csv << kj << ',';
      csv << io::format_double(dist.time) << ',' << io::format_double(dist.probabilities[flat])
          << '\n';
    }
  }

  report = json{{"mode", scenario.mode == io::Mode::Kbar ? "kbar" : "general"},
                {"formula", scenario.mode == io::Mode::Kbar ? "three-term" : "general"},
                {"times", per_time},
                {"warnings", scenario.warnings},
                {"wall_time_seconds",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
  return csv.str();
}

json spectra(const HierarchicalModel& model, const io::Scenario* scenario) {
  auto graph = [](const WalkData& w) {
    return json{{"vertices", w.size()},
                {"measure", vector_json(w.measure)},
                {"laplacian_values", vector_json(w.laplacian_spectrum.values)},
                {"transition_values", vector_json(w.transition_spectrum.values)},
                {"group_sizes", groups_json(w.laplacian_spectrum)}};
  };
  json out{{"global", graph(model.global())}, {"locals", json::array()}};
  for (const auto& w : model.locals()) out["locals"].push_back(graph(w));

  const auto setup = quantum_setup(model, scenario);
  out["global_hamiltonian_values"] = vector_json(eigh(setup.global_ham).values);
  if (model.total_dimension() > model.options().dense_cap) {
    out["tuples_notice"] = "total dimension " + std::to_string(model.total_dimension()) +
                           " exceeds cap; tuple section omitted";
    return out;
  }
  AssemblyOptions ao;
  ao.tolerance = model.options().tolerance;
  ao.dense_cap = model.options().dense_cap;
  const auto assembly = assemble_hamiltonian(setup.global_ham, setup.local_systems, ao);
  json tuples = json::array();
  for (const auto& th : assembly.tuples())
    tuples.push_back({{"labels", th.labels},
                      {"local_values", vector_json(th.lambda)},
                      {"values", vector_json(th.spectrum.values)}});
  out["tuples"] = std::move(tuples);
  return out;
}

namespace {

int report_error(const Error& e, std::ostream& err) {
  err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
  return e.is_numerical() ? kNumerical : kValidation;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::InvalidInput, "cannot write " + path.string());
  f << text;
}

/// Model from --model, else the scenario's model.
struct Inputs {
  std::optional<io::Scenario> scenario;
  std::optional<io::ModelSpec> spec;
};

Inputs load_inputs(const Options& opt) {
  Inputs in;
  if (!opt.scenario.empty()) in.scenario = io::load_scenario(opt.scenario);
  if (!opt.model.empty()) {
    in.spec = io::load_model(opt.model);
  } else {
    require(in.scenario.has_value(), ErrorKind::InvalidInput, "need --model or --scenario");
    in.spec = in.scenario->model;
  }
  return in;
}

}  // namespace

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    require(!opt.scenario.empty(), ErrorKind::InvalidInput, "simulate needs --scenario");
    require(!opt.out_dir.empty(), ErrorKind::InvalidInput, "simulate needs --out-dir");
    auto scenario = io::load_scenario(opt.scenario);
    if (!opt.model.empty()) scenario.model = io::load_model(opt.model);
    for (const auto& w : scenario.warnings) err << "warning: " << w << '\n';
    json report;
    const std::string csv = simulate(scenario, opt, report);
    // Everything is computed before the first byte is written.
    fs::create_directories(opt.out_dir);
    write_file(opt.out_dir / "distribution.csv", csv);
    write_file(opt.out_dir / "report.json", report.dump(2) + "\n");
    out << "wrote " << (opt.out_dir / "distribution.csv").string() << '\n';
    return kOk;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_verify(const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto in = load_inputs(opt);
    const auto model = build_model(*in.spec, opt);
    const auto* scenario = in.scenario ? &*in.scenario : nullptr;
    const auto checks = run_checks(model, scenario, opt.suite, opt);
    json list = json::array();
    bool ok = true;
    for (const auto& c : checks) {
      json entry{{"name", c.name}, {"suite", c.suite}};
      if (c.diagnostic) {
        entry["diagnostic"] = c.detail;
      } else {
        entry["residual"] = c.residual;
        entry["tolerance"] = c.tolerance;
        entry["pass"] = c.pass;
        if (!c.detail.is_null()) entry["detail"] = c.detail;
        if (!c.pass) {
          ok = false;
          err << "check failed: " << c.name << " residual " << io::format_double(c.residual)
              << " > " << io::format_double(c.tolerance) << '\n';
        }
      }
      list.push_back(std::move(entry));
    }
    const json report{{"suite", opt.suite}, {"all_pass", ok}, {"checks", list}};
    const std::string text = report.dump(2) + "\n";
    if (!opt.out_dir.empty()) {
      fs::create_directories(opt.out_dir);
      write_file(opt.out_dir / "verify.json", text);
    }
    out << text;
    return ok ? kOk : kNumerical;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_spectra(const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto in = load_inputs(opt);
    const auto model = build_model(*in.spec, opt);
    const std::string text =
        spectra(model, in.scenario ? &*in.scenario : nullptr).dump(2) + "\n";
    if (!opt.out_dir.empty()) {
      fs::create_directories(opt.out_dir);
      write_file(opt.out_dir / "spectra.json", text);
    }
    out << text;
    return kOk;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

}  // namespace hqw::cli
