#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "mpp/errors.hpp"
#include "mpp/run.hpp"

namespace {

// Options shared by the subcommands; each subcommand registers the ones it
// reads.
struct Flags {
  mpp::RunConfig cfg;
  double s = 0, s_min = 0, s_max = 0, s_step = 0, alpha = 0;
  std::string config_file;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--ensemble", f.cfg.ensemble, "Ensemble file");
  app->add_option("--seed", f.cfg.seed, "64-bit seed")->capture_default_str();
  app->add_option("--out", f.cfg.out, "Output directory")->capture_default_str();
  app->add_option("--format", f.cfg.formats, "Output formats: csv, json")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--config", f.config_file,
                  "JSON config to start from; command-line flags override it");
}

void add_s(CLI::App* app, Flags& f) {
  app->add_option("--s", f.s, "Single exponent s");
}

void add_grid(CLI::App* app, Flags& f) {
  app->add_option("--s-min", f.s_min, "Grid start");
  app->add_option("--s-max", f.s_max, "Grid end (inclusive)");
  app->add_option("--s-step", f.s_step, "Grid step");
}

void add_spectral(CLI::App* app, Flags& f) {
  app->add_option("--mesh", f.cfg.mesh, "Projective mesh size N")->capture_default_str();
  app->add_option("--interp", f.cfg.interp, "Mesh interpolation: linear or nearest")
      ->capture_default_str();
  app->add_option("--tol", f.cfg.tol, "Eigen-iteration tolerance")->capture_default_str();
  app->add_option("--max-iter", f.cfg.max_iter, "Eigen-iteration cap")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pressure functions of weighted matrix products"};
  app.require_subcommand(1);
  app.footer("Worker threads: MPP_THREADS (default: hardware concurrency).\n"
             "Exit codes: 0 success, 2 usage or parse error, 3 numerical failure.");
  Flags f;

  auto* check = app.add_subcommand("check", "Irreducibility and proximality checks");
  add_common(check, f);

  auto* pressure = app.add_subcommand("pressure", "Pressure curve over an s grid");
  add_common(pressure, f);
  add_s(pressure, f);
  add_grid(pressure, f);
  add_spectral(pressure, f);
  pressure->add_option("--method", f.cfg.method, "wordsum, spectral or both")
      ->capture_default_str();
  pressure->add_option("--n-schedule", f.cfg.n_schedule,
                       "Word lengths, increasing (default: automatic from the budget)")
      ->delimiter(',');
  pressure->add_option("--budget", f.cfg.schedule_budget,
                       "Words or DP states allowed per exact sum in the automatic schedule")
      ->capture_default_str();
  pressure->add_option("--samples", f.cfg.mc_samples, "Monte Carlo words per point")
      ->capture_default_str();
  pressure->add_option("--enumeration-cap", f.cfg.enumeration_cap,
                       "Largest exhaustive enumeration")
      ->capture_default_str();
  pressure->add_option("--kink-window", f.cfg.kink_window, "Kink median window")
      ->capture_default_str();
  pressure->add_option("--kink-threshold", f.cfg.kink_threshold, "Kink score threshold")
      ->capture_default_str();

  auto* spectral = app.add_subcommand("spectral", "Transfer-operator eigendata at one s");
  add_common(spectral, f);
  add_s(spectral, f);
  add_spectral(spectral, f);

  auto* tilted = app.add_subcommand("tilted", "Tilted chain diagnostics at one s");
  add_common(tilted, f);
  add_s(tilted, f);
  add_spectral(tilted, f);
  tilted->add_option("--alpha", f.alpha, "h_alpha exponent (default min(s/3, 1) - 1e-6)");
  tilted->add_option("--samples", f.cfg.samples, "Trajectories")->capture_default_str();
  tilted->add_option("--n", f.cfg.tilted_n, "Trajectory length")->capture_default_str();
  tilted->add_option("--halpha-n-max", f.cfg.halpha_n_max, "Largest n for h_alpha")
      ->capture_default_str();
  tilted->add_option("--lags", f.cfg.lags, "Largest correlation lag")->capture_default_str();
  tilted->add_option("--chains", f.cfg.chains, "Independent chains for correlations")
      ->capture_default_str();
  tilted->add_option("--chain-length", f.cfg.chain_length, "Length of each chain")
      ->capture_default_str();
  tilted->add_option("--martingale-n", f.cfg.martingale_n, "Word length of the martingale check")
      ->capture_default_str();
  tilted->add_option("--thermo", f.cfg.thermo, "auto, on or off")->capture_default_str();
  tilted->add_option("--enumeration-cap", f.cfg.enumeration_cap,
                     "Largest exhaustive enumeration")
      ->capture_default_str();

  auto* oracle = app.add_subcommand("oracle", "Closed-form pressure values");
  add_common(oracle, f);
  add_s(oracle, f);
  add_grid(oracle, f);
  oracle->add_option("--family", f.cfg.family, "reducible or keep-switch")->capture_default_str();
  oracle->add_option("--params", f.cfg.params, "a,b,c,d or q1,q2")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  mpp::RunConfig cfg = f.cfg;
  if (!f.config_file.empty()) {
    try {
      std::ifstream in(f.config_file);
      if (!in) throw mpp::UsageError("cannot read " + f.config_file);
      std::stringstream text;
      text << in.rdbuf();
      cfg = mpp::config_from_json(text.str());
    } catch (const mpp::Error& e) {
      std::cerr << e.kind() << ": " << e.what() << "\n";
      return 2;
    }
    // explicit flags win over the file
    auto given = [&](const char* name) { return sub->get_option_no_throw(name) &&
                                                sub->get_option_no_throw(name)->count() > 0; };
    if (given("--ensemble")) cfg.ensemble = f.cfg.ensemble;
    if (given("--seed")) cfg.seed = f.cfg.seed;
    if (given("--out")) cfg.out = f.cfg.out;
    if (given("--format")) cfg.formats = f.cfg.formats;
    if (given("--method")) cfg.method = f.cfg.method;
    if (given("--n-schedule")) cfg.n_schedule = f.cfg.n_schedule;
    if (given("--mesh")) cfg.mesh = f.cfg.mesh;
    if (given("--interp")) cfg.interp = f.cfg.interp;
    if (given("--samples")) {
      if (sub->get_name() == "pressure") {
        cfg.mc_samples = f.cfg.mc_samples;
      } else {
        cfg.samples = f.cfg.samples;
      }
    }
  }
  cfg.command = sub->get_name();
  auto set_if = [&](const char* name, double v, std::optional<double>& dst) {
    auto* o = sub->get_option_no_throw(name);
    if (o && o->count() > 0) dst = v;
  };
  set_if("--s", f.s, cfg.s);
  set_if("--s-min", f.s_min, cfg.s_min);
  set_if("--s-max", f.s_max, cfg.s_max);
  set_if("--s-step", f.s_step, cfg.s_step);
  set_if("--alpha", f.alpha, cfg.alpha);

  const auto rep = mpp::run_command(cfg);
  std::cout << "command: " << rep.command << "\n"
            << "config_hash: " << mpp::hash_hex(rep.hash) << "\n"
            << "seed: " << cfg.seed << "\n"
            << "status: " << rep.status << "\n";
  if (rep.status != "ok") std::cout << "error: " << rep.error_kind << ": " << rep.error_message << "\n";
  for (const auto& w : rep.warnings) std::cout << "warning: " << w << "\n";
  for (const auto& file : rep.files) std::cout << "wrote: " << cfg.out << "/" << file << "\n";
  if (rep.command == "oracle" && rep.status == "ok") std::cout << "results: " << rep.results << "\n";
  return rep.exit_code;
}
