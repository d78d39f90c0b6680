#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace hqw::cli;
  CLI::App app{"Hierarchical random and quantum walks"};
  app.require_subcommand(1);

  Options opt;
  double tol = 0.0;
  const std::map<std::string, hqw::SelectionConvention> conventions{
      {"destination", hqw::SelectionConvention::Destination},
      {"source", hqw::SelectionConvention::Source}};

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", opt.model, "model JSON file");
    sub->add_option("--scenario", opt.scenario, "scenario JSON file");
    sub->add_option("--out-dir", opt.out_dir, "output directory");
    sub->add_option("--selection-convention", opt.convention, "hDTRW/hCTRW local-graph selection")
        ->transform(CLI::CheckedTransformer(conventions, CLI::ignore_case));
    sub->add_option("--cap", opt.cap, "dense dimension cap")->check(CLI::PositiveNumber);
  };

  auto* simulate = app.add_subcommand("simulate", "write the joint distribution CSV and report");
  common(simulate);
  auto* verify = app.add_subcommand("verify", "cross-check against the oracle");
  common(verify);
  verify->add_option("--suite", opt.suite, "spectra|evolution|distribution|all")
      ->check(CLI::IsMember({"spectra", "evolution", "distribution", "all"}));
  auto* tol_opt = verify->add_option("--tol", tol, "override every check tolerance")
                      ->check(CLI::NonNegativeNumber);
  auto* spectra = app.add_subcommand("spectra", "export eigen-data");
  common(spectra);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }
  if (tol_opt->count() > 0) opt.tol = tol;

  if (*simulate) return cmd_simulate(opt, std::cout, std::cerr);
  if (*verify) return cmd_verify(opt, std::cout, std::cerr);
  return cmd_spectra(opt, std::cout, std::cerr);
}
