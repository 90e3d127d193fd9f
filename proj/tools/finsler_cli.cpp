// Command-line front end: finsler --config run.json [--out DIR] [--seed N] [--tol X] [--verbose]

#include "finsler/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace finsler;

int main(int argc, char** argv)
{
  CLI::App app{"Douglas checks, beta-deformations, sprays and geodesics for (alpha, beta)-metrics"};
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  bool verbose = false;
  app.add_option("-c,--config", config_path, "run configuration (JSON)")->required();
  app.add_option("-o,--out", out_dir, "output directory (default: $FINSLER_OUT or .)");
  app.add_option("--seed", seed, "override sample.seed");
  app.add_option("--tol", tol, "override tolerance");
  app.add_flag("-v,--verbose", verbose, "print the summary to stderr");
  app.set_version_flag("--version", cli::kToolVersion);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::exit_parse_error;
  }
  if (out_dir.empty()) {
    const char* env = std::getenv("FINSLER_OUT");
    out_dir = env ? env : ".";
  }

  cli::RunConfig cfg;
  try {
    cfg = cli::load_config(config_path, seed, tol);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_parse_error;
  }

  cli::Report report;
  try {
    report = cli::run(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_parse_error;
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const fs::path report_path = fs::path(out_dir) / cfg.report_name;
  std::ofstream(report_path, std::ios::binary) << cli::render_report(report);
  if (!report.point_rows.empty()) std::ofstream(fs::path(out_dir) / cfg.points_name, std::ios::binary) << cli::emit_points(report);

  if (verbose || report.partial) {
    std::cerr << cfg.command << ": " << (report.partial ? "partial" : (report.pass ? "pass" : "fail")) << " (" << report.records.size() << " records) -> "
              << report_path.string() << "\n";
    if (!report.error.empty()) std::cerr << "error: " << report.error << "\n";
  }
  return cli::exit_status(report);
}
