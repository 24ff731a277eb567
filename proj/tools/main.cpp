#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "catdif/glm.hpp"
#include "catdif/report.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitRun = 4;

int default_workers() {
  if (const char* env = std::getenv("CATDIF_WORKERS"))
    return std::max(1, std::atoi(env));
  return 1;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    std::cerr << "error: cannot open " << path << '\n';
    std::exit(kExitIo);
  }
  return is;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path);
  if (!os) {
    std::cerr << "error: cannot write " << path << '\n';
    std::exit(kExitIo);
  }
  return os;
}

catdif::StudyConfig load_config(const std::string& path,
                                std::uint64_t seed_override, bool has_seed,
                                int workers) {
  try {
    catdif::StudyConfig cfg = catdif::parse_config_file(path);
    if (has_seed) cfg.base_seed = seed_override;
    if (workers > 0) cfg.workers = workers;
    return cfg;
  } catch (const catdif::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    std::exit(kExitConfig);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAT simulation and DIF analysis toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", logs_path, frames_path;
  std::vector<std::string> fit_models = {"M6", "S1", "S2", "S3"};
  std::uint64_t seed = 0;
  bool has_seed = false;
  int workers = default_workers();

  auto* study = app.add_subcommand("study", "run a full Monte Carlo study");
  study->add_option("--config", config_path, "JSON study config")->required();
  study->add_option("--out", out_dir, "output directory")->required();
  study->add_option("--seed", seed, "base seed override")
      ->each([&](const std::string&) { has_seed = true; });
  study->add_option("--workers", workers, "replication worker count");

  auto* simulate =
      app.add_subcommand("simulate", "simulate one CAT cohort and write logs");
  simulate->add_option("--config", config_path, "JSON study config")
      ->required();
  simulate->add_option("--out", out_dir, "output directory")->required();
  simulate->add_option("--seed", seed, "base seed override")
      ->each([&](const std::string&) { has_seed = true; });

  auto* clean = app.add_subcommand(
      "clean", "build per-item analysis frames from administration logs");
  clean->add_option("--logs", logs_path, "logs CSV from simulate")->required();
  clean->add_option("--out", out_dir, "output directory")->required();

  auto* fit = app.add_subcommand("fit", "fit DIF models to analysis frames");
  fit->add_option("--frames", frames_path, "frames CSV from clean")
      ->required();
  fit->add_option("--out", out_dir, "output directory")->required();
  fit->add_option("--models", fit_models, "models to fit");

  auto* screen = app.add_subcommand(
      "screen-icc", "fit the empty model per item and report ICCs");
  screen->add_option("--frames", frames_path, "frames CSV from clean")
      ->required();
  screen->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (study->parsed()) {
      catdif::StudyConfig cfg =
          load_config(config_path, seed, has_seed, workers);
      catdif::StudyReport report = catdif::run_study(cfg);
      catdif::emit_tables(report, out_dir);
      catdif::emit_plot_data(report, out_dir);
      std::cout << "study " << cfg.study << ": " << report.cells.size()
                << " cells, " << report.wall_clock_seconds << "s\n";
    } else if (simulate->parsed()) {
      catdif::StudyConfig cfg =
          load_config(config_path, seed, has_seed, workers);
      std::vector<catdif::Item> pool = catdif::generate_pool(
          cfg.pool, catdif::mix_seed(cfg.base_seed, 0xFF, 0));
      catdif::DesignCell cell = catdif::enumerate_cells(cfg).front();
      std::uint64_t s = catdif::mix_seed(cfg.base_seed, cell.index, 0);
      std::uint64_t cohort_seed = catdif::splitmix64(s);
      std::uint64_t dif_seed = catdif::splitmix64(s);
      std::uint64_t cat_seed = catdif::splitmix64(s);

      catdif::Cohort cohort =
          catdif::generate_cohort(cfg.n_examinees, cohort_seed);
      catdif::FocalMap focal;
      if (cell.has_dif) {
        catdif::DifConfig dif;
        dif.parameter = cell.dif_parameter;
        dif.proportion = cell.dif_proportion;
        dif.magnitude = cfg.dif_magnitude;
        focal = catdif::inject_dif(pool, dif, dif_seed);
      }
      catdif::CatConfig cat = cfg.cat;
      cat.test_length = cell.test_length;
      cat.max_exposure = cell.exposure_rate;
      cat.provisional_estimator = cell.estimator;
      catdif::CohortResult sim =
          catdif::simulate_cohort(cohort, pool, focal, cat, cat_seed);

      std::filesystem::create_directories(out_dir);
      {
        auto os = open_output(out_dir + "/pool.csv");
        catdif::write_pool_csv(os, pool, focal);
      }
      {
        auto os = open_output(out_dir + "/logs.csv");
        catdif::write_logs_csv(os, sim.logs);
      }
      {
        auto os = open_output(out_dir + "/precision.csv");
        os << "bias,mse,correlation,csem\n"
           << sim.precision.bias << ',' << sim.precision.mse << ','
           << sim.precision.correlation << ',' << sim.precision.csem << '\n';
      }
      std::cout << "simulated " << sim.logs.size() << " examinees ("
                << cell.id() << ")\n";
    } else if (clean->parsed()) {
      auto is = open_input(logs_path);
      std::vector<catdif::AdministrationLog> logs = catdif::read_logs_csv(is);
      catdif::IntervalGrid grid;
      auto [frames, drops] = catdif::build_frames(logs, grid, 2);
      std::filesystem::create_directories(out_dir);
      {
        auto os = open_output(out_dir + "/frames.csv");
        catdif::write_frames_csv(os, frames);
      }
      {
        auto os = open_output(out_dir + "/drops.csv");
        os << "step,count,item_ids\n";
        auto row = [&](const char* step, const std::vector<std::string>& ids) {
          os << step << ',' << ids.size() << ',';
          for (std::size_t i = 0; i < ids.size(); ++i)
            os << (i ? ";" : "") << ids[i];
          os << '\n';
        };
        row("step1_polytomous", drops.step1_polytomous);
        row("step2_first_slot_only", drops.step2_first_slot_only);
        row("step3a_single_cluster", drops.step3a_single_cluster);
        row("step3b_single_response", drops.step3b_single_response);
        row("step3c_too_few_rows", drops.step3c_too_few_rows);
        os << "total_administered," << drops.total_administered << ",\n";
      }
      std::cout << "kept " << frames.size() << " of "
                << drops.total_administered << " administered items\n";
    } else if (fit->parsed()) {
      auto is = open_input(frames_path);
      auto frames = catdif::read_frames_csv(is);
      std::filesystem::create_directories(out_dir);
      auto os = open_output(out_dir + "/fits.csv");
      os << "item_id,model,converged,p_g,estimate_g,se_g,deviance,aic,bic,"
            "tau0_sq,tau1_sq,tau10,icc\n";
      for (const auto& [id, frame] : frames) {
        for (const std::string& model : fit_models) {
          try {
            if (model == "EMPTY" || (model.size() == 2 && model[0] == 'M')) {
              catdif::GlmmFit f =
                  catdif::fit_glmm(frame, catdif::GlmmSpec::by_name(model));
              double est = model == "EMPTY" ? 0.0 : f.coefficient("g");
              double se = model == "EMPTY" ? 0.0 : f.standard_error("g");
              os << id << ',' << model << ',' << f.converged << ','
                 << (se > 0 ? catdif::normal_p_value(est / se) : 1.0) << ','
                 << est << ',' << se << ',' << f.deviance << ',' << f.aic
                 << ',' << f.bic << ',' << f.tau0_sq << ',' << f.tau1_sq
                 << ',' << f.tau10 << ',' << f.icc << '\n';
            } else {
              catdif::GlmSpec spec;
              if (model == "S1") spec = catdif::GlmSpec::S1();
              else if (model == "S2") spec = catdif::GlmSpec::S2();
              else if (model == "S3") spec = catdif::GlmSpec::S3();
              else if (model == "MH") spec = catdif::GlmSpec::MH();
              else if (model == "LR_ALT") spec = catdif::GlmSpec::LR_ALT();
              else throw std::invalid_argument("unknown model " + model);
              catdif::GlmFit f = catdif::fit_glm(frame, spec);
              catdif::WaldTest w = catdif::wald_test(f, "g");
              os << id << ',' << model << ',' << f.converged << ','
                 << w.p_value << ',' << f.coefficient("g") << ','
                 << f.standard_error("g") << ',' << f.deviance << ','
                 << f.aic << ',' << f.bic << ",0,0,0,0\n";
            }
          } catch (const std::exception& e) {
            os << id << ',' << model << ",0,1,0,0,0,0,0,0,0,0,0\n";
          }
        }
      }
      std::cout << "fitted " << frames.size() << " items\n";
    } else if (screen->parsed()) {
      auto is = open_input(frames_path);
      auto frames = catdif::read_frames_csv(is);
      catdif::IccScreenSummary summary = catdif::icc_screen(frames);
      std::filesystem::create_directories(out_dir);
      auto os = open_output(out_dir + "/icc_histogram.csv");
      os << "item_id,rho\n";
      for (const auto& [id, entry] : summary.per_item)
        if (entry.converged) os << id << ',' << entry.rho << '\n';
      std::cout << "icc mean=" << summary.mean
                << " variance=" << summary.variance
                << " share>0.2=" << summary.share_above_02 << " ("
                << summary.n_converged << " items)\n";
    }
  } catch (const catdif::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRun;
  }
  return 0;
}
