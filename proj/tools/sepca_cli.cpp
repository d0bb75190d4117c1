#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "sepca/denoise.hpp"
#include "sepca/errors.hpp"
#include "sepca/eval.hpp"
#include "sepca/io.hpp"
#include "sepca/parallel.hpp"
#include "sepca/random.hpp"
#include "sepca/sepca.hpp"
#include "sepca/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <class T>
std::vector<T> split_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v;
    if (!(is >> v) || !is.eof()) throw UsageError("bad list element '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty list '" + s + "'");
  return out;
}

void ensure_dir(const std::string& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw sepca::DataError("cannot create directory '" + d + "': " + ec.message());
}

struct GenerateArgs {
  std::string preset = "desk", out = ".";
  long n = 0;
  std::uint64_t seed = 0;
  double snr = 1.0;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.n < 1) throw UsageError("--n must be a positive integer");
  sepca::ModelConfig cfg = sepca::preset(a.preset);
  cfg.snr = a.snr;
  cfg.seed = a.seed;
  const sepca::Transform tf{sepca::FbBasis(cfg.params)};
  const sepca::GroundTruthModel truth = sepca::make_model(cfg, tf);
  const sepca::Cell cell = sepca::draw_cell(truth, tf, a.n, a.seed);
  ensure_dir(a.out);
  sepca::write_stack((fs::path(a.out) / "clean.stack").string(), cell.clean);
  sepca::write_stack((fs::path(a.out) / "counts.stack").string(), cell.counts);
  sepca::write_truth((fs::path(a.out) / "truth.sepca").string(), truth);
  std::cout << json{{"n", a.n}, {"L", cfg.params.L}, {"R", cfg.params.R}, {"c", cfg.params.c},
                    {"true_rank", truth.total_rank()}, {"clip_rate", cell.clip_rate}}
                   .dump()
            << "\n";
  return kOk;
}

struct EstimateArgs {
  std::string in, out, R = "auto", c = "auto";
  bool no_reflections = false, no_whiten = false;
};

int cmd_estimate(const EstimateArgs& a) {
  const sepca::ImageStack stack = sepca::read_stack(a.in);
  if (stack.n() < 1) throw sepca::DataError("input stack is empty");
  sepca::BasisParams p;
  p.L = stack.L;
  json info;
  if (a.R == "auto") {
    p.R = sepca::estimate_support_radius(stack);
  } else {
    try {
      size_t pos = 0;
      p.R = std::stoi(a.R, &pos);
      if (pos != a.R.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw UsageError("--R must be 'auto' or an integer");
    }
  }
  if (a.c == "auto") {
    const auto est = sepca::estimate_band_limit(sepca::radial_whiten(stack), 0.999, p.R);
    p.c = est.c;
    info["band_limit_flat_warning"] = est.flat_warning;
  } else {
    try {
      size_t pos = 0;
      p.c = std::stod(a.c, &pos);
      if (pos != a.c.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw UsageError("--c must be 'auto' or a number");
    }
  }
  try {
    sepca::validate(p);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const sepca::Transform tf{sepca::FbBasis(p)};
  sepca::SepcaOptions opt;
  opt.reflections = !a.no_reflections;
  opt.whiten = !a.no_whiten;
  const sepca::SepcaModel model = sepca::estimate_sepca(stack, tf, opt);
  sepca::write_model(a.out, model);
  info["R"] = p.R;
  info["c"] = p.c;
  info["k_max"] = tf.basis().k_max();
  info["ranks"] = model.ranks;
  info["rank_total"] = model.total_rank();
  json alpha = json::array(), ell = json::array();
  for (const auto& d : model.diag) {
    alpha.push_back(d.alpha);
    ell.push_back(d.ell);
  }
  info["shrunken_eigenvalues"] = ell;
  info["scaling"] = alpha;
  std::cout << info.dump() << "\n";
  return kOk;
}

int cmd_denoise(const std::string& in, const std::string& model_path, const std::string& out) {
  const sepca::SepcaModel model = sepca::read_model(model_path);
  const sepca::ImageStack stack = sepca::read_stack(in);
  if (stack.L != model.params.L) throw sepca::DataError("stack side does not match the model");
  const sepca::Transform tf{sepca::FbBasis(model.params, model.radial_oversample)};
  const sepca::ImageStack den = sepca::denoise_stack(stack, model, tf);
  sepca::write_stack(out, den);
  std::cout << json{{"n", den.n()}, {"L", den.L}}.dump() << "\n";
  return kOk;
}

struct EvaluateArgs {
  std::string truth, methods = "pca,spca,epca,sepca", n_grid = "100,1000,10000", out = "report";
  int seeds = 5;
  std::uint64_t seed = 0;
};

int cmd_evaluate(const EvaluateArgs& a) {
  sepca::ComparisonConfig cfg;
  fs::path tp = a.truth;
  if (fs::is_directory(tp)) tp /= "truth.sepca";
  cfg.truth = sepca::read_truth(tp.string());
  cfg.methods.clear();
  std::stringstream ss(a.methods);
  for (std::string m; std::getline(ss, m, ',');)
    if (!m.empty()) cfg.methods.push_back(m);
  if (cfg.methods.empty()) throw UsageError("--methods is empty");
  cfg.n_grid = split_list<long>(a.n_grid);
  for (long n : cfg.n_grid)
    if (n < 1) throw UsageError("--n-grid entries must be positive");
  if (a.seeds < 1) throw UsageError("--seeds must be positive");
  cfg.seeds = a.seeds;
  cfg.base_seed = a.seed;
  if (cfg.truth->params.L > 32) cfg.covariance = false;  // dense L^2 x L^2 work stays desk-sized
  sepca::PipelineReport rep;
  try {
    rep = sepca::run_comparison(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  ensure_dir(a.out);
  std::ofstream((fs::path(a.out) / "report.csv").string()) << sepca::report_csv(rep);
  std::ofstream((fs::path(a.out) / "summary.json").string()) << sepca::report_summary_json(rep) << "\n";
  std::cout << json{{"rows", rep.rows.size()}, {"out", a.out}}.dump() << "\n";
  return kOk;
}

struct BenchArgs {
  std::string preset = "desk", n_grid = "1000,10000";
  std::uint64_t seed = 0;
  int repeats = 3;
};

int cmd_bench(const BenchArgs& a) {
  sepca::ModelConfig cfg = sepca::preset(a.preset);
  cfg.seed = a.seed;
  const sepca::Transform tf{sepca::FbBasis(cfg.params)};
  const sepca::GroundTruthModel truth = sepca::make_model(cfg, tf);
  json rows = json::array();
  for (long n : split_list<long>(a.n_grid)) {
    if (n < 1) throw UsageError("--n-grid entries must be positive");
    const sepca::Cell cell = sepca::draw_cell(truth, tf, n, a.seed);
    double best = 1e300;
    for (int r = 0; r < std::max(1, a.repeats); ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const sepca::Transform t2{sepca::FbBasis(cfg.params)};
      const auto model = sepca::estimate_sepca(cell.counts, t2);
      best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    rows.push_back({{"n", n}, {"estimate_ms", best}});
  }
  std::cout << json{{"preset", a.preset}, {"threads", sepca::threads()}, {"timings", rows}}.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steerable ePCA: covariance estimation and denoising for Poisson image stacks"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: SEPCA_THREADS or all cores)");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "draw a synthetic stack with known ground truth");
  gen->add_option("--preset", ga.preset)->check(CLI::IsMember({"desk", "paper"}));
  gen->add_option("--n", ga.n, "number of images")->required();
  gen->add_option("--seed", ga.seed);
  gen->add_option("--snr", ga.snr, "signal eigenvalue multiplier");
  gen->add_option("--out", ga.out, "output directory");

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "estimate mean and rotationally invariant covariance");
  est->add_option("--in", ea.in)->required();
  est->add_option("--out", ea.out)->required();
  est->add_option("--R", ea.R, "support radius: auto or integer");
  est->add_option("--c", ea.c, "band limit: auto or number");
  est->add_flag("--no-reflections", ea.no_reflections);
  est->add_flag("--no-whiten", ea.no_whiten, "flat noise level (steerable PCA)");

  std::string din, dmodel, dout;
  auto* den = app.add_subcommand("denoise", "apply a fitted model to a count stack");
  den->add_option("--in", din)->required();
  den->add_option("--model", dmodel)->required();
  den->add_option("--out", dout)->required();

  EvaluateArgs va;
  auto* ev = app.add_subcommand("evaluate", "compare methods against a ground-truth model");
  ev->add_option("--truth", va.truth, "directory or file written by generate")->required();
  ev->add_option("--methods", va.methods);
  ev->add_option("--n-grid", va.n_grid);
  ev->add_option("--seeds", va.seeds);
  ev->add_option("--seed", va.seed, "first seed");
  ev->add_option("--out", va.out);

  BenchArgs ba;
  auto* be = app.add_subcommand("bench", "time the estimator across sample sizes");
  be->add_option("--preset", ba.preset)->check(CLI::IsMember({"desk", "paper"}));
  be->add_option("--n-grid", ba.n_grid);
  be->add_option("--seed", ba.seed);
  be->add_option("--repeats", ba.repeats);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (threads <= 0) {
    if (const char* env = std::getenv("SEPCA_THREADS")) threads = std::atoi(env);
  }
  sepca::set_threads(std::max(0, threads));

  try {
    if (*gen) return cmd_generate(ga);
    if (*est) return cmd_estimate(ea);
    if (*den) return cmd_denoise(din, dmodel, dout);
    if (*ev) return cmd_evaluate(va);
    if (*be) return cmd_bench(ba);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const sepca::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const sepca::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
