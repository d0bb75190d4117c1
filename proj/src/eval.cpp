#include "sepca/eval.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sepca/denoise.hpp"
#include "sepca/random.hpp"
#include "sepca/rank.hpp"
#include "sepca/sepca.hpp"

namespace sepca {

CovarianceError covariance_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw std::invalid_argument("covariance_error: shape mismatch");
  const Eigen::MatrixXd E = estimate - truth;
  CovarianceError err;
  err.fro = E.norm();
  if (E.size() == 0) return err;
  if (E.rows() == E.cols() && (E - E.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, E.cwiseAbs().maxCoeff())) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (E + E.transpose()), Eigen::EigenvaluesOnly);
    err.op = es.eigenvalues().cwiseAbs().maxCoeff();
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(E);
    err.op = svd.singularValues()(0);
  }
  return err;
}

double mse(const ImageStack& denoised, const ImageStack& clean) {
  if (denoised.pixels.rows() != clean.pixels.rows() || denoised.n() != clean.n())
    throw std::invalid_argument("mse: stack shape mismatch");
  if (clean.n() == 0) throw std::invalid_argument("mse: empty stack");
  return (denoised.pixels - clean.pixels).squaredNorm() / double(clean.pixels.size());
}

Cell draw_cell(const GroundTruthModel& truth, const Transform& tf, long n, std::uint64_t seed) {
  Cell c;
  const std::uint64_t s = mix_seed(seed, std::uint64_t(n));
  CleanDraw d = draw_clean_stack(truth, tf, n, s);
  c.clean = std::move(d.images);
  c.clip_rate = d.clip_rate;
  c.counts = poisson_observe(c.clean, s);
  return c;
}

PipelineReport run_comparison(const ComparisonConfig& cfg) {
  for (const auto& m : cfg.methods)
    if (m != "pca" && m != "spca" && m != "epca" && m != "sepca" && m != "raw")
      throw std::invalid_argument("unknown method '" + m + "'");
  const BasisParams params = cfg.truth ? cfg.truth->params : cfg.model.params;
  const Transform tf{FbBasis(params)};
  const GroundTruthModel truth = cfg.truth ? *cfg.truth : make_model(cfg.model, tf);
  PipelineReport rep;
  rep.params = params;
  rep.true_rank = truth.total_rank();
  rep.clip_rate = truth.clip_rate;
  Eigen::MatrixXd Ctrue;
  if (cfg.covariance) Ctrue = true_covariance(truth, tf);

  using clock = std::chrono::steady_clock;
  for (long n : cfg.n_grid) {
    for (int si = 0; si < cfg.seeds; ++si) {
      const std::uint64_t seed = cfg.base_seed + std::uint64_t(si);
      const Cell cell = draw_cell(truth, tf, n, seed);
      for (const auto& method : cfg.methods) {
        ReportRow row;
        row.method = method;
        row.n = n;
        row.seed = seed;
        Eigen::MatrixXd C;
        ImageStack Xh;
        const auto t0 = clock::now();
        if (method == "raw") {
          if (cfg.covariance) C = sample_covariance(cell.counts);
          Xh = cell.counts;
        } else if (method == "pca") {
          const Eigen::MatrixXd Yc = cell.counts.pixels.colwise() - cell.counts.pixels.rowwise().mean();
          const int r = permutation_rank(Yc, cfg.rho, cfg.n_perm, mix_seed(seed, 0x7e)).rank;
          if (cfg.covariance) C = pca_cartesian(cell.counts, r).cov;
          Xh = pca_project_denoise(cell.counts, r);
          row.rank_total = r;
        } else if (method == "epca") {
          const CartesianEstimate est = epca_cartesian(cell.counts);
          C = est.cov;
          Xh = eblp_denoise_cartesian(cell.counts, est.cov, est.mean, 0.1);
          row.rank_total = est.rank;
        } else {
          SepcaOptions opt;
          opt.whiten = method == "sepca";
          const SepcaModel model = estimate_sepca(cell.counts, tf, opt);
          if (cfg.covariance) C = covariance_kernel_grid(model.cov, tf);
          Xh = denoise_stack(cell.counts, model, tf);
          row.rank_total = model.total_rank();
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        if (cfg.covariance) {
          const auto e = covariance_error(C, Ctrue);
          row.op_err = e.op;
          row.fro_err = e.fro;
        }
        row.mse = mse(Xh, cell.clean);
        rep.rows.push_back(row);
      }
    }
  }
  return rep;
}

std::string report_csv(const PipelineReport& report) {
  std::ostringstream os;
  os.precision(10);
  os << "method,n,seed,op_err,fro_err,mse,rank_total,wall_ms\n";
  for (const auto& r : report.rows)
    os << r.method << ',' << r.n << ',' << r.seed << ',' << r.op_err << ',' << r.fro_err << ',' << r.mse << ','
       << r.rank_total << ',' << r.wall_ms << '\n';
  return os.str();
}

std::string report_summary_json(const PipelineReport& report) {
  using json = nlohmann::json;
  std::map<std::pair<std::string, long>, std::vector<const ReportRow*>> groups;
  std::vector<std::pair<std::string, long>> order;
  for (const auto& r : report.rows) {
    auto key = std::make_pair(r.method, r.n);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  auto stats = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t m = v.size();
    const double med = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    return json{{"median", med}, {"min", v.front()}, {"max", v.back()}};
  };
  json out;
  out["params"] = {{"c", report.params.c}, {"R", report.params.R}, {"L", report.params.L}};
  out["true_rank"] = report.true_rank;
  out["clip_rate"] = report.clip_rate;
  out["groups"] = json::array();
  for (const auto& key : order) {
    const auto& rows = groups[key];
    std::vector<double> op, fro, ms, rk, wall;
    for (const auto* r : rows) {
      op.push_back(r->op_err);
      fro.push_back(r->fro_err);
      ms.push_back(r->mse);
      rk.push_back(r->rank_total);
      wall.push_back(r->wall_ms);
    }
    out["groups"].push_back({{"method", key.first},
                             {"n", key.second},
                             {"seeds", rows.size()},
                             {"op_err", stats(op)},
                             {"fro_err", stats(fro)},
                             {"mse", stats(ms)},
                             {"rank_total", stats(rk)},
                             {"wall_ms", stats(wall)}});
  }
  return out.dump(2);
}

}  // namespace sepca
