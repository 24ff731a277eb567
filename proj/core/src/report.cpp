#include "catdif/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace catdif {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& context) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + context);
}

Estimator parse_estimator(const std::string& name) {
  if (name == "MLE") return Estimator::MLE;
  if (name == "EAP") return Estimator::EAP;
  throw ConfigError("unknown estimator: " + name);
}

TruncNormSpec parse_trunc(const json& j, const std::string& context) {
  reject_unknown_keys(j, {"mean", "sd", "min", "max"}, context);
  TruncNormSpec spec;
  spec.mean = j.at("mean").get<double>();
  spec.sd = j.at("sd").get<double>();
  spec.min = j.at("min").get<double>();
  spec.max = j.at("max").get<double>();
  return spec;
}

}  // namespace

StudyConfig parse_config(std::istream& is) {
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  static const std::set<std::string> top_keys = {
      "study",          "n_replications",   "n_examinees",
      "estimators",     "test_lengths",     "exposure_rates",
      "dif",            "alpha",            "models",
      "base_seed",      "min_item_replications", "workers",
      "pool",           "cat",              "glmm",
      "keep_exemplar_frames"};
  reject_unknown_keys(j, top_keys, "config");

  StudyConfig cfg;
  try {
    cfg.study = j.at("study").get<int>();
    if (j.contains("n_replications"))
      cfg.n_replications = j["n_replications"].get<int>();
    if (j.contains("n_examinees"))
      cfg.n_examinees = j["n_examinees"].get<int>();
    if (j.contains("estimators")) {
      cfg.estimators.clear();
      for (const auto& e : j["estimators"])
        cfg.estimators.push_back(parse_estimator(e.get<std::string>()));
    }
    if (j.contains("test_lengths"))
      cfg.test_lengths = j["test_lengths"].get<std::vector<int>>();
    if (j.contains("exposure_rates"))
      cfg.exposure_rates = j["exposure_rates"].get<std::vector<double>>();
    if (j.contains("dif")) {
      const json& d = j["dif"];
      reject_unknown_keys(
          d, {"parameters", "proportions", "magnitude", "fixed_subset"},
          "dif");
      if (d.contains("parameters")) {
        cfg.dif_parameters.clear();
        for (const auto& p : d["parameters"]) {
          std::string s = p.get<std::string>();
          if (s != "a" && s != "b")
            throw ConfigError("dif parameter must be 'a' or 'b'");
          cfg.dif_parameters.push_back(s[0]);
        }
      }
      if (d.contains("proportions"))
        cfg.dif_proportions = d["proportions"].get<std::vector<double>>();
      if (d.contains("magnitude"))
        cfg.dif_magnitude = d["magnitude"].get<double>();
      if (d.contains("fixed_subset"))
        cfg.dif_fixed_subset = d["fixed_subset"].get<bool>();
    }
    if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
    if (j.contains("models"))
      cfg.models = j["models"].get<std::vector<std::string>>();
    if (j.contains("base_seed"))
      cfg.base_seed = j["base_seed"].get<std::uint64_t>();
    if (j.contains("min_item_replications"))
      cfg.min_item_replications = j["min_item_replications"].get<int>();
    if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
    if (j.contains("keep_exemplar_frames"))
      cfg.keep_exemplar_frames = j["keep_exemplar_frames"].get<bool>();
    if (j.contains("pool")) {
      const json& p = j["pool"];
      reject_unknown_keys(p,
                          {"n_items", "a", "b", "c", "p_3pl", "n_categories",
                           "category_proportions"},
                          "pool");
      if (p.contains("n_items")) cfg.pool.n_items = p["n_items"].get<int>();
      if (p.contains("a")) cfg.pool.a_dist = parse_trunc(p["a"], "pool.a");
      if (p.contains("b")) cfg.pool.b_dist = parse_trunc(p["b"], "pool.b");
      if (p.contains("c")) cfg.pool.c_dist = parse_trunc(p["c"], "pool.c");
      if (p.contains("p_3pl")) cfg.pool.p_3pl = p["p_3pl"].get<double>();
      if (p.contains("n_categories"))
        cfg.pool.n_categories = p["n_categories"].get<int>();
      if (p.contains("category_proportions"))
        cfg.pool.category_proportions =
            p["category_proportions"].get<std::vector<double>>();
    }
    if (j.contains("cat")) {
      const json& c = j["cat"];
      reject_unknown_keys(c,
                          {"theta_start", "w_content", "w_info",
                           "randomesque_k", "mle_boundary_fallback_eap", "D"},
                          "cat");
      if (c.contains("theta_start"))
        cfg.cat.theta_start = c["theta_start"].get<double>();
      if (c.contains("w_content"))
        cfg.cat.w_content = c["w_content"].get<double>();
      if (c.contains("w_info")) cfg.cat.w_info = c["w_info"].get<double>();
      if (c.contains("randomesque_k"))
        cfg.cat.randomesque_k = c["randomesque_k"].get<int>();
      if (c.contains("mle_boundary_fallback_eap"))
        cfg.cat.mle_boundary_fallback_eap =
            c["mle_boundary_fallback_eap"].get<bool>();
      if (c.contains("D")) cfg.cat.irt.D = c["D"].get<double>();
    }
    if (j.contains("glmm")) {
      const json& g = j["glmm"];
      reject_unknown_keys(g, {"outer_tol", "outer_max_evals", "restarts"},
                          "glmm");
      if (g.contains("outer_tol"))
        cfg.glmm.outer_tol = g["outer_tol"].get<double>();
      if (g.contains("outer_max_evals"))
        cfg.glmm.outer_max_evals = g["outer_max_evals"].get<int>();
      if (g.contains("restarts"))
        cfg.glmm.restarts = g["restarts"].get<int>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
  cfg.cat.blueprint = cfg.pool.category_proportions;

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config validation: ") + e.what());
  }
  if (cfg.alpha > 1.0 || cfg.alpha < 0.0)
    throw ConfigError("alpha outside [0,1]");
  return cfg;
}

StudyConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  return parse_config(is);
}

std::string serialize_config(const StudyConfig& cfg) {
  json j;
  j["study"] = cfg.study;
  j["n_replications"] = cfg.n_replications;
  j["n_examinees"] = cfg.n_examinees;
  json ests = json::array();
  for (Estimator e : cfg.estimators)
    ests.push_back(e == Estimator::MLE ? "MLE" : "EAP");
  j["estimators"] = ests;
  j["test_lengths"] = cfg.test_lengths;
  j["exposure_rates"] = cfg.exposure_rates;
  if (cfg.study == 2) {
    json d;
    json params = json::array();
    for (char p : cfg.dif_parameters) params.push_back(std::string(1, p));
    d["parameters"] = params;
    d["proportions"] = cfg.dif_proportions;
    d["magnitude"] = cfg.dif_magnitude;
    d["fixed_subset"] = cfg.dif_fixed_subset;
    j["dif"] = d;
  }
  j["alpha"] = cfg.alpha;
  j["models"] = cfg.models;
  j["base_seed"] = cfg.base_seed;
  j["min_item_replications"] = cfg.min_item_replications;
  j["workers"] = cfg.workers;
  j["keep_exemplar_frames"] = cfg.keep_exemplar_frames;
  json pool;
  pool["n_items"] = cfg.pool.n_items;
  auto trunc = [](const TruncNormSpec& s) {
    return json{{"mean", s.mean}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}};
  };
  pool["a"] = trunc(cfg.pool.a_dist);
  pool["b"] = trunc(cfg.pool.b_dist);
  pool["c"] = trunc(cfg.pool.c_dist);
  pool["p_3pl"] = cfg.pool.p_3pl;
  pool["n_categories"] = cfg.pool.n_categories;
  pool["category_proportions"] = cfg.pool.category_proportions;
  j["pool"] = pool;
  json cat;
  cat["theta_start"] = cfg.cat.theta_start;
  cat["w_content"] = cfg.cat.w_content;
  cat["w_info"] = cfg.cat.w_info;
  cat["randomesque_k"] = cfg.cat.randomesque_k;
  cat["mle_boundary_fallback_eap"] = cfg.cat.mle_boundary_fallback_eap;
  cat["D"] = cfg.cat.irt.D;
  j["cat"] = cat;
  json glmm;
  glmm["outer_tol"] = cfg.glmm.outer_tol;
  glmm["outer_max_evals"] = cfg.glmm.outer_max_evals;
  glmm["restarts"] = cfg.glmm.restarts;
  j["glmm"] = glmm;
  return j.dump(2);
}

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream os(fs::path(dir) / name);
  if (!os)
    throw std::runtime_error("cannot write " + name + " in " + dir);
  return os;
}

std::string fmt3(double v) {
  if (std::isnan(v)) return ".";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << v;
  return os.str();
}

std::string cell_prefix(const DesignCell& cell) {
  std::ostringstream os;
  os << (cell.estimator == Estimator::MLE ? "MLE" : "EAP") << ','
     << cell.test_length << ',' << cell.exposure_rate << ','
     << (cell.has_dif ? std::string(1, cell.dif_parameter) : std::string())
     << ',' << (cell.has_dif ? fmt3(cell.dif_proportion) : std::string());
  return os.str();
}

constexpr const char* kCellHeader =
    "method,length,exposure,dif_parameter,dif_proportion";

}  // namespace

void emit_tables(const StudyReport& report, const std::string& dir) {
  {
    auto os = open_out(dir, "precision.csv");
    os << kCellHeader
       << ",bias_mu,bias_sd,mse_mu,mse_sd,corr_mu,corr_sd,csem_mu,csem_sd\n";
    for (const ConditionResult& cell : report.cells)
      os << cell_prefix(cell.cell) << ',' << fmt3(cell.precision_mean.bias)
         << ',' << fmt3(cell.precision_sd.bias) << ','
         << fmt3(cell.precision_mean.mse) << ',' << fmt3(cell.precision_sd.mse)
         << ',' << fmt3(cell.precision_mean.correlation) << ','
         << fmt3(cell.precision_sd.correlation) << ','
         << fmt3(cell.precision_mean.csem) << ','
         << fmt3(cell.precision_sd.csem) << '\n';
  }
  {
    auto os = open_out(dir, "type1.csv");
    os << kCellHeader << ",model,mu,sigma,n\n";
    for (const ConditionResult& cell : report.cells)
      for (const std::string& model : report.config.models) {
        auto it = cell.type1.find(model);
        if (it == cell.type1.end()) continue;
        os << cell_prefix(cell.cell) << ',' << model << ','
           << fmt3(it->second.mean) << ',' << fmt3(it->second.sd) << ','
           << it->second.n_items << '\n';
      }
  }
  {
    auto os = open_out(dir, "power.csv");
    os << kCellHeader << ",model,mu,sigma,n\n";
    for (const ConditionResult& cell : report.cells)
      for (const std::string& model : report.config.models) {
        auto it = cell.power.find(model);
        if (it == cell.power.end()) continue;
        os << cell_prefix(cell.cell) << ',' << model << ','
           << fmt3(it->second.mean) << ',' << fmt3(it->second.sd) << ','
           << it->second.n_items << '\n';
      }
  }
  {
    auto os = open_out(dir, "drops.csv");
    os << kCellHeader
       << ",prop_mu,prop_sd,count_mu,count_sd,count_min,count_max,"
          "total_mu,total_sd,total_min,total_max\n";
    for (const ConditionResult& cell : report.cells) {
      const DropSummary& d = cell.drops;
      os << cell_prefix(cell.cell) << ',' << fmt3(d.proportion_mean) << ','
         << fmt3(d.proportion_sd) << ',' << fmt3(d.count_mean) << ','
         << fmt3(d.count_sd) << ',' << d.count_min << ',' << d.count_max
         << ',' << fmt3(d.total_mean) << ',' << fmt3(d.total_sd) << ','
         << d.total_min << ',' << d.total_max << '\n';
    }
  }
  {
    auto os = open_out(dir, "fits.csv");
    os << "cell,replication,item_id,model,converged,flagged,is_dif,p_g,"
          "estimate_g,se_g,deviance,aic,bic,tau0_sq,tau1_sq,tau10,icc,"
          "r2_marginal,r2_conditional\n";
    for (std::size_t i = 0; i < report.all_fits.size(); ++i) {
      const FitRecord& f = report.all_fits[i];
      os << report.fit_origin[i].first << ',' << report.fit_origin[i].second
         << ',' << f.item_id << ',' << f.model << ',' << (f.converged ? 1 : 0)
         << ',' << (f.flagged ? 1 : 0) << ','
         << (report.fit_status_dif[i] ? 1 : 0) << ',' << f.p_g << ','
         << f.estimate_g << ',' << f.se_g << ',' << f.deviance << ',' << f.aic
         << ',' << f.bic << ',' << f.tau0_sq << ',' << f.tau1_sq << ','
         << f.tau10 << ',' << f.icc << ',' << f.r2_marginal << ','
         << f.r2_conditional << '\n';
    }
  }
  {
    auto os = open_out(dir, "meta.json");
    json meta;
    meta["config"] = json::parse(serialize_config(report.config));
    meta["wall_clock_seconds"] = report.wall_clock_seconds;
    meta["n_cells"] = report.cells.size();
    json notes = json::array();
    for (const ConditionResult& cell : report.cells)
      for (const std::string& note : cell.notes)
        notes.push_back(cell.cell.id() + ": " + note);
    meta["notes"] = notes;
    os << meta.dump(2) << '\n';
  }
}

void emit_plot_data(const StudyReport& report, const std::string& dir) {
  {
    auto os = open_out(dir, "type1_by_model.csv");
    os << "cell,model,rate\n";
    for (const ConditionResult& cell : report.cells)
      for (const std::string& model : report.config.models) {
        auto it = cell.type1.find(model);
        if (it == cell.type1.end()) continue;
        os << cell.cell.id() << ',' << model << ',' << fmt3(it->second.mean)
           << '\n';
      }
  }
  {
    auto os = open_out(dir, "icc_histogram.csv");
    os << "item_id,rho\n";
    if (!report.exemplar_frames.empty()) {
      IccScreenSummary screen = icc_screen(report.exemplar_frames);
      for (const auto& [id, entry] : screen.per_item)
        if (entry.converged) os << id << ',' << fmt3(entry.rho) << '\n';
    }
  }
  {
    auto os = open_out(dir, "interval_barplot.csv");
    os << "item_id,interval_j,count\n";
    for (const auto& [id, frame] : report.exemplar_frames)
      for (const auto& [j, count] : frame.cluster_sizes)
        os << id << ',' << j << ',' << count << '\n';
  }
}

}  // namespace catdif
