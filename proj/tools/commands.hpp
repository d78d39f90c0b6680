#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hqw/hierarchy.hpp"
#include "hqw/io.hpp"
#include "hqw/quantum_walk.hpp"

namespace hqw::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3 };

struct Options {
  std::filesystem::path model;
  std::filesystem::path scenario;
  std::filesystem::path out_dir;
  std::optional<double> tol;  // overrides every check tolerance in verify
  std::string suite = "all";
  SelectionConvention convention = SelectionConvention::Destination;
  std::size_t cap = kDefaultDenseCap;
};

/// Hamiltonians chosen for a run: the operator sandwiched by the local
/// eigenvalues, and one eigensystem (plus raw matrix) per local graph.
struct QuantumSetup {
  CMatrix global_ham;
  std::vector<EigenSystem> local_systems;
  std::vector<CMatrix> local_hams;
};

QuantumSetup quantum_setup(const HierarchicalModel& model, const io::Scenario* scenario);

HierarchicalModel build_model(const io::ModelSpec& spec, const Options& opt);

struct Check {
  std::string name;
  std::string suite;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  bool diagnostic = false;  // reported, never fails the run
  nlohmann::json detail;
};

std::vector<Check> run_checks(const HierarchicalModel& model, const io::Scenario* scenario,
                              const std::string& suite, const Options& opt);

/// Returns the CSV text and fills `report`.
std::string simulate(const io::Scenario& scenario, const Options& opt, nlohmann::json& report);

nlohmann::json spectra(const HierarchicalModel& model, const io::Scenario* scenario);

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_verify(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_spectra(const Options& opt, std::ostream& out, std::ostream& err);

}  // namespace hqw::cli
