#include "tsexplain/projections.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "json_codec.hpp"
#include "tsexplain/error.hpp"

namespace tsexplain::proj {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd to_matrix(std::span<const Series> rows) {
  const std::size_t d = rows.front().size();
  MatrixXd m(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw Error(ErrorCode::kDimensionMismatch, "rows have different lengths");
    for (std::size_t j = 0; j < d; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void check_rows(std::span<const Series> rows) {
  if (rows.size() < 3) throw Error(ErrorCode::kInvalidArgument, "projection needs at least 3 rows");
  if (rows.front().size() < 2) throw Error(ErrorCode::kInvalidArgument, "projection needs at least 2 columns");
}

// Largest-|entry| made positive; ties resolve to the first index.
void fix_sign(VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  }
  if (v(best) < 0) v = -v;
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

// Top-2 eigenpairs of a symmetric PSD matrix, descending.
std::pair<std::array<double, 2>, std::array<VectorXd, 2>> top_two(const MatrixXd& k, std::size_t dense_limit) {
  const auto n = k.rows();
  if (static_cast<std::size_t>(n) <= dense_limit) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(k);
    const auto& vals = solver.eigenvalues();
    const auto& vecs = solver.eigenvectors();
    return {{vals(n - 1), vals(n - 2)}, {vecs.col(n - 1), vecs.col(n - 2)}};
  }
  // Orthogonal subspace iteration with Rayleigh-Ritz on a small block.
  const Eigen::Index block = std::min<Eigen::Index>(8, n);
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  MatrixXd q(n, block);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = normal(rng);
  q = Eigen::HouseholderQR<MatrixXd>(q).householderQ() * MatrixXd::Identity(n, block);
  VectorXd previous = VectorXd::Zero(2);
  Eigen::SelfAdjointEigenSolver<MatrixXd> small;
  for (int iter = 0; iter < 2000; ++iter) {
    MatrixXd z = k * q;
    q = Eigen::HouseholderQR<MatrixXd>(z).householderQ() * MatrixXd::Identity(n, block);
    small.compute(q.transpose() * k * q);
    const VectorXd top = small.eigenvalues().tail(2);
    const double scale = std::max(std::abs(top(1)), 1e-300);
    if (iter > 5 && (top - previous).cwiseAbs().maxCoeff() <= 1e-12 * scale) break;
    previous = top;
  }
  const MatrixXd ritz = q * small.eigenvectors();
  const auto& vals = small.eigenvalues();
  return {{vals(block - 1), vals(block - 2)}, {ritz.col(block - 1), ritz.col(block - 2)}};
}

std::vector<double> conditional_row(const std::vector<double>& dist, std::size_t i, double perplexity) {
  const std::size_t n = dist.size();
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) dmin = std::min(dmin, dist[j]);
  }
  const double target = std::log(perplexity);
  double beta = 1.0, lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
  std::vector<double> p(n, 0.0);
  for (int iter = 0; iter < 50; ++iter) {
    double sum = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = j == i ? 0.0 : std::exp(-beta * (dist[j] - dmin));
      sum += p[j];
      weighted += (dist[j] - dmin) * p[j];
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    for (double& v : p) v /= sum;
    const double diff = entropy - target;
    if (std::abs(diff) < 1e-4) break;
    if (diff > 0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = std::isinf(lo) ? beta / 2.0 : 0.5 * (beta + lo);
    }
  }
  return p;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& y, std::size_t n) {
  double z = 0.0;
  std::vector<double> num(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = num[j * n + i] = v;
      z += 2.0 * v;
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p[i * n + j];
      kl += pij * std::log(pij / std::max(num[i * n + j] / z, 1e-300));
    }
  }
  return kl;
}

std::map<int, std::vector<std::size_t>> group_members(std::span<const int> groups) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < groups.size(); ++i) out[groups[i]].push_back(i);
  return out;
}

std::vector<std::array<double, 2>> centroids(std::span<const Point> coords,
                                             const std::map<int, std::vector<std::size_t>>& members) {
  std::vector<std::array<double, 2>> out;
  for (const auto& [_, idx] : members) {
    std::array<double, 2> c{0.0, 0.0};
    for (std::size_t i : idx) {
      c[0] += coords[i][0];
      c[1] += coords[i][1];
    }
    c[0] /= static_cast<double>(idx.size());
    c[1] /= static_cast<double>(idx.size());
    out.push_back(c);
  }
  return out;
}

void check_groups(std::span<const Point> coords, std::span<const int> groups) {
  if (coords.size() != groups.size()) throw Error(ErrorCode::kDimensionMismatch, "coords and groups differ in size");
}

}  // namespace

std::string_view technique_name(Technique technique) {
  switch (technique) {
    case Technique::kPca: return "pca";
    case Technique::kKernelPca: return "kpca";
    case Technique::kTsne: return "tsne";
  }
  return "pca";
}

const std::vector<Technique>& all_techniques() {
  static const std::vector<Technique> all{Technique::kPca, Technique::kKernelPca, Technique::kTsne};
  return all;
}

Technique parse_technique(std::string_view name) {
  for (Technique t : all_techniques()) {
    if (technique_name(t) == name) return t;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown projection technique '" + std::string(name) + "'");
}

Projection fit_pca(std::span<const Series> rows) {
  check_rows(rows);
  MatrixXd x = to_matrix(rows);
  const VectorXd mean = x.colwise().mean();
  x.rowwise() -= mean.transpose();
  Eigen::BDCSVD<MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();

  Projection p;
  p.technique = Technique::kPca;
  p.dims = rows.front().size();
  p.mean.assign(mean.data(), mean.data() + mean.size());
  const double top = s.size() > 0 ? s(0) : 0.0;
  for (int c = 0; c < 2; ++c) {
    VectorXd v = VectorXd::Zero(x.cols());
    const bool usable = c < s.size() && s(c) > 1e-9 * std::max(top, 1e-300) && s(c) > 0.0;
    if (usable) {
      v = svd.matrixV().col(c);
      fix_sign(v);
    } else {
      p.degenerate_rank = true;
    }
    p.components[c].assign(v.data(), v.data() + v.size());
  }
  for (std::size_t i = 0; i < rows.size(); ++i) p.coords.push_back(project_oos(p, rows[i]));
  return p;
}

Projection fit_kernel_pca(std::span<const Series> rows, const KernelPcaParams& params) {
  check_rows(rows);
  const std::size_t n = rows.size();
  const std::size_t d = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != d) throw Error(ErrorCode::kDimensionMismatch, "rows have different lengths");
  }

  Projection p;
  p.technique = Technique::kKernelPca;
  p.dims = d;
  p.training.assign(rows.begin(), rows.end());
  if (params.gamma) {
    p.gamma = *params.gamma;
  } else {
    double sum = 0.0, sq = 0.0;
    for (const auto& r : rows) {
      for (float v : r) {
        sum += v;
        sq += static_cast<double>(v) * v;
      }
    }
    const double count = static_cast<double>(n * d);
    const double var = std::max(0.0, sq / count - (sum / count) * (sum / count));
    p.gamma = var > 0.0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
  }
  if (!(p.gamma > 0.0) || !std::isfinite(p.gamma)) throw Error(ErrorCode::kInvalidArgument, "gamma must be > 0");

  MatrixXd k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) k(i, j) = k(j, i) = std::exp(-p.gamma * squared_distance(rows[i], rows[j]));
  }
  const VectorXd row_means = k.rowwise().mean();
  p.kernel_row_means.assign(row_means.data(), row_means.data() + n);
  p.kernel_grand_mean = row_means.mean();
  MatrixXd kc = k;
  kc.rowwise() -= row_means.transpose();
  kc.colwise() -= row_means;
  kc.array() += p.kernel_grand_mean;

  auto [values, vectors] = top_two(kc, params.dense_limit);
  const double floor = 1e-8 * static_cast<double>(n);
  for (int c = 0; c < 2; ++c) {
    p.eigenvalues[c] = values[c];
    VectorXd alpha = VectorXd::Zero(n);
    if (values[c] > floor) {
      fix_sign(vectors[c]);
      alpha = vectors[c] / std::sqrt(values[c]);
    } else {
      p.degenerate_rank = true;
    }
    p.alphas[c].assign(alpha.data(), alpha.data() + n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    // Training rows use the centered Gram directly: K~ alpha = sqrt(lambda) v.
    Point pt{0.0f, 0.0f};
    for (int c = 0; c < 2; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += kc(i, j) * p.alphas[c][j];
      pt[c] = static_cast<float>(acc);
    }
    p.coords.push_back(pt);
  }
  return p;
}

Projection fit_tsne(std::span<const Series> rows, const TsneParams& params) {
  const std::size_t n = rows.size();
  if (n < 10) throw Error(ErrorCode::kPerplexityTooLarge, "t-SNE needs at least 10 rows");
  const double max_perplexity = (static_cast<double>(n) - 1.0) / 3.0;
  const double perplexity = params.perplexity.value_or(std::min(30.0, max_perplexity));
  if (perplexity > max_perplexity) {
    throw Error(ErrorCode::kPerplexityTooLarge, "perplexity must be <= (N - 1) / 3");
  }
  if (!(perplexity > 0.0) || params.iterations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "perplexity and iterations must be positive");
  }
  const std::size_t d = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != d) throw Error(ErrorCode::kDimensionMismatch, "rows have different lengths");
  }

  std::vector<double> p(n * n, 0.0);
  {
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) dist[j] = squared_distance(rows[i], rows[j]);
      const auto row = conditional_row(dist, i, perplexity);
      for (std::size_t j = 0; j < n; ++j) p[i * n + j] = row[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = std::max((p[i * n + j] + p[j * n + i]) / (2.0 * static_cast<double>(n)), 1e-12);
        p[i * n + j] = p[j * n + i] = v;
      }
      p[i * n + i] = 0.0;
    }
  }

  // PCA init scaled to std 1e-2; axes without spread get a seeded jitter.
  std::vector<double> y(2 * n, 0.0);
  {
    std::vector<Series> work(rows.begin(), rows.end());
    bool pca_ok = d >= 2;
    Projection init;
    if (pca_ok) init = fit_pca(work);
    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> jitter(0.0, 1e-4);
    for (int c = 0; c < 2; ++c) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = pca_ok ? init.coords[i][c] : 0.0;
        mean += v;
        sq += v * v;
      }
      mean /= static_cast<double>(n);
      const double sd = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
      for (std::size_t i = 0; i < n; ++i) {
        y[2 * i + c] = sd > 1e-12 ? (init.coords[i][c] - mean) / sd * 1e-2 : jitter(rng);
      }
    }
  }

  Projection out;
  out.technique = Technique::kTsne;
  out.dims = d;
  out.perplexity = perplexity;
  out.training.assign(rows.begin(), rows.end());

  const double lr = std::max(static_cast<double>(n) / 12.0, 50.0);
  std::vector<double> grad(2 * n), update(2 * n, 0.0), gains(2 * n, 1.0), num(n * n, 0.0);
  for (int iter = 0; iter < params.iterations; ++iter) {
    const bool early = iter < params.exaggeration_iterations;
    const double exag = early ? params.exaggeration : 1.0;
    const double momentum = early ? 0.5 : 0.8;
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n + j] = num[j * n + i] = v;
        z += 2.0 * v;
      }
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = num[i * n + j];
        const double mult = 4.0 * (exag * p[i * n + j] - v / z) * v;
        const double gx = mult * (y[2 * i] - y[2 * j]), gy = mult * (y[2 * i + 1] - y[2 * j + 1]);
        grad[2 * i] += gx;
        grad[2 * i + 1] += gy;
        grad[2 * j] -= gx;
        grad[2 * j + 1] -= gy;
      }
    }
    for (std::size_t k = 0; k < 2 * n; ++k) {
      gains[k] = (grad[k] > 0.0) != (update[k] > 0.0) ? gains[k] + 0.2 : gains[k] * 0.8;
      gains[k] = std::max(gains[k], 0.01);
      update[k] = momentum * update[k] - lr * gains[k] * grad[k];
      y[k] += update[k];
    }
    for (int c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y[2 * i + c];
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y[2 * i + c] -= mean;
    }
    const int done = iter + 1;
    if (done % 25 == 0 || done == params.exaggeration_iterations || done == params.iterations) {
      out.kl_history.emplace_back(done, kl_divergence(p, y, n));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.coords.push_back({static_cast<float>(y[2 * i]), static_cast<float>(y[2 * i + 1])});
  }
  return out;
}

Projection fit(Technique technique, std::span<const Series> rows, std::uint64_t seed) {
  switch (technique) {
    case Technique::kPca: return fit_pca(rows);
    case Technique::kKernelPca: return fit_kernel_pca(rows);
    case Technique::kTsne: {
      TsneParams params;
      params.seed = seed;
      return fit_tsne(rows, params);
    }
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown technique");
}

Point project_oos(const Projection& projection, std::span<const float> row) {
  if (row.size() != projection.dims) {
    throw Error(ErrorCode::kDimensionMismatch, "row has " + std::to_string(row.size()) + " values, projection expects " +
                                                   std::to_string(projection.dims));
  }
  Point out{0.0f, 0.0f};
  switch (projection.technique) {
    case Technique::kPca: {
      for (int c = 0; c < 2; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) acc += (row[j] - projection.mean[j]) * projection.components[c][j];
        out[c] = static_cast<float>(acc);
      }
      return out;
    }
    case Technique::kKernelPca: {
      const std::size_t n = projection.training.size();
      std::vector<double> k(n);
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        k[i] = std::exp(-projection.gamma * squared_distance(row, projection.training[i]));
        mean += k[i];
      }
      mean /= static_cast<double>(n);
      for (int c = 0; c < 2; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double centered = k[i] - mean - projection.kernel_row_means[i] + projection.kernel_grand_mean;
          acc += centered * projection.alphas[c][i];
        }
        out[c] = static_cast<float>(acc);
      }
      return out;
    }
    case Technique::kTsne: {
      const std::size_t n = projection.training.size();
      std::vector<std::pair<double, std::size_t>> dist(n);
      for (std::size_t i = 0; i < n; ++i) dist[i] = {std::sqrt(squared_distance(row, projection.training[i])), i};
      const std::size_t k = std::min<std::size_t>(5, n);
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      double wsum = 0.0, x = 0.0, y = 0.0;
      for (std::size_t m = 0; m < k; ++m) {
        const double w = 1.0 / (dist[m].first + 1e-9);
        wsum += w;
        x += w * projection.coords[dist[m].second][0];
        y += w * projection.coords[dist[m].second][1];
      }
      return {static_cast<float>(x / wsum), static_cast<float>(y / wsum)};
    }
  }
  return out;
}

double davies_bouldin(std::span<const Point> coords, std::span<const int> groups) {
  check_groups(coords, groups);
  const auto members = group_members(groups);
  if (members.size() < 2) return 0.0;
  const auto cent = centroids(coords, members);
  std::vector<double> scatter;
  for (std::size_t c = 0; const auto& [_, idx] : members) {
    double s = 0.0;
    for (std::size_t i : idx) s += std::hypot(coords[i][0] - cent[c][0], coords[i][1] - cent[c][1]);
    scatter.push_back(s / static_cast<double>(idx.size()));
    ++c;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < cent.size(); ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < cent.size(); ++j) {
      if (i == j) continue;
      const double m = std::hypot(cent[i][0] - cent[j][0], cent[i][1] - cent[j][1]);
      if (m > 0.0) worst = std::max(worst, (scatter[i] + scatter[j]) / m);
    }
    total += worst;
  }
  return total / static_cast<double>(cent.size());
}

double centroid_distance(std::span<const Point> coords, std::span<const int> groups) {
  check_groups(coords, groups);
  const auto members = group_members(groups);
  if (members.size() < 2) return 0.0;
  const auto cent = centroids(coords, members);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < cent.size(); ++i) {
    for (std::size_t j = i + 1; j < cent.size(); ++j) {
      total += std::hypot(cent[i][0] - cent[j][0], cent[i][1] - cent[j][1]);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

ClusterScore cluster_score(std::span<const Point> coords, std::span<const int> labels, std::span<const int> preds,
                           const ScoreWeights& weights) {
  ClusterScore s;
  auto fill = [&](std::span<const int> groups, double& db, double& cdist, double& g, bool& degenerate) {
    degenerate = group_members(groups).size() < 2;
    if (degenerate) return;
    db = davies_bouldin(coords, groups);
    cdist = centroid_distance(coords, groups);
    g = cdist / (1.0 + db);
  };
  fill(labels, s.db_labels, s.cdist_labels, s.g_labels, s.labels_degenerate);
  fill(preds, s.db_preds, s.cdist_preds, s.g_preds, s.preds_degenerate);
  const double wsum = weights.predictions + weights.labels;
  if (!(wsum > 0.0)) throw Error(ErrorCode::kInvalidConfig, "score weights must sum to > 0");
  s.combined = (weights.predictions * s.g_preds + weights.labels * s.g_labels) / wsum;
  return s;
}

void set_visibility(std::span<ProjectionCell> cells) {
  if (cells.empty()) return;
  std::vector<double> scores;
  for (const auto& c : cells) scores.push_back(c.score.combined);
  std::sort(scores.begin(), scores.end());
  const std::size_t m = scores.size();
  const double median = m % 2 ? scores[m / 2] : 0.5 * (scores[m / 2 - 1] + scores[m / 2]);
  std::map<std::string, std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].visible = cells[i].score.combined >= 0.5 * median;
    auto [it, inserted] = best.emplace(cells[i].source, i);
    if (!inserted && cells[i].score.combined > cells[it->second].score.combined) it->second = i;
  }
  for (const auto& [_, i] : best) cells[i].visible = true;
}

std::string to_json(std::span<const ProjectionCell> cells) {
  using detail::json;
  json arr = json::array();
  for (const auto& cell : cells) {
    json c;
    c["source"] = cell.source;
    c["technique"] = std::string(technique_name(cell.projection.technique));
    json coords = json::array();
    for (const auto& pt : cell.projection.coords) coords.push_back(detail::float_array(pt));
    c["coords"] = std::move(coords);
    c["degenerate_rank"] = cell.projection.degenerate_rank;
    const auto& s = cell.score;
    c["score"] = {{"db_labels", s.db_labels},       {"db_preds", s.db_preds},
                  {"cdist_labels", s.cdist_labels}, {"cdist_preds", s.cdist_preds},
                  {"g_labels", s.g_labels},         {"g_preds", s.g_preds},
                  {"combined", s.combined},         {"labels_degenerate", s.labels_degenerate},
                  {"preds_degenerate", s.preds_degenerate}};
    c["visible"] = cell.visible;
    arr.push_back(std::move(c));
  }
  return arr.dump();
}

namespace {

detail::json doubles(const std::vector<double>& v) { return detail::json(v); }

std::vector<double> read_doubles(const detail::json& arr) { return arr.get<std::vector<double>>(); }

}  // namespace

std::string state_to_json(std::span<const ProjectionCell> cells) {
  using detail::json;
  json arr = json::array();
  for (const auto& cell : cells) {
    const auto& p = cell.projection;
    const auto& s = cell.score;
    json c;
    c["source"] = cell.source;
    c["visible"] = cell.visible;
    c["score"] = {{"db_labels", s.db_labels},       {"db_preds", s.db_preds},
                  {"cdist_labels", s.cdist_labels}, {"cdist_preds", s.cdist_preds},
                  {"g_labels", s.g_labels},         {"g_preds", s.g_preds},
                  {"combined", s.combined},         {"labels_degenerate", s.labels_degenerate},
                  {"preds_degenerate", s.preds_degenerate}};
    json st;
    st["technique"] = std::string(technique_name(p.technique));
    json coords = json::array();
    for (const auto& pt : p.coords) coords.push_back(detail::float_array(pt));
    st["coords"] = std::move(coords);
    st["degenerate_rank"] = p.degenerate_rank;
    st["dims"] = p.dims;
    st["mean"] = doubles(p.mean);
    st["components"] = {doubles(p.components[0]), doubles(p.components[1])};
    st["gamma"] = p.gamma;
    st["alphas"] = {doubles(p.alphas[0]), doubles(p.alphas[1])};
    st["kernel_row_means"] = doubles(p.kernel_row_means);
    st["kernel_grand_mean"] = p.kernel_grand_mean;
    st["eigenvalues"] = {p.eigenvalues[0], p.eigenvalues[1]};
    json training = json::array();
    for (const auto& row : p.training) training.push_back(detail::float_array(row));
    st["training"] = std::move(training);
    st["perplexity"] = p.perplexity;
    json kl = json::array();
    for (const auto& [it, v] : p.kl_history) kl.push_back({it, v});
    st["kl_history"] = std::move(kl);
    c["state"] = std::move(st);
    arr.push_back(std::move(c));
  }
  return arr.dump();
}

std::vector<ProjectionCell> cells_from_state_json(std::string_view text) {
  using detail::json;
  std::vector<ProjectionCell> out;
  try {
    const auto arr = json::parse(text);
    for (const auto& c : arr) {
      ProjectionCell cell;
      cell.source = c.at("source").get<std::string>();
      cell.visible = c.at("visible").get<bool>();
      const auto& s = c.at("score");
      cell.score.db_labels = s.at("db_labels").get<double>();
      cell.score.db_preds = s.at("db_preds").get<double>();
      cell.score.cdist_labels = s.at("cdist_labels").get<double>();
      cell.score.cdist_preds = s.at("cdist_preds").get<double>();
      cell.score.g_labels = s.at("g_labels").get<double>();
      cell.score.g_preds = s.at("g_preds").get<double>();
      cell.score.combined = s.at("combined").get<double>();
      cell.score.labels_degenerate = s.at("labels_degenerate").get<bool>();
      cell.score.preds_degenerate = s.at("preds_degenerate").get<bool>();
      const auto& st = c.at("state");
      auto& p = cell.projection;
      p.technique = parse_technique(st.at("technique").get<std::string>());
      for (const auto& pt : st.at("coords")) {
        const auto v = detail::read_series(pt);
        if (v.size() != 2) throw Error(ErrorCode::kInvalidConfig, "projection coords must be 2-D");
        p.coords.push_back({v[0], v[1]});
      }
      p.degenerate_rank = st.at("degenerate_rank").get<bool>();
      p.dims = st.at("dims").get<std::size_t>();
      p.mean = read_doubles(st.at("mean"));
      p.components = {read_doubles(st.at("components").at(0)), read_doubles(st.at("components").at(1))};
      p.gamma = st.at("gamma").get<double>();
      p.alphas = {read_doubles(st.at("alphas").at(0)), read_doubles(st.at("alphas").at(1))};
      p.kernel_row_means = read_doubles(st.at("kernel_row_means"));
      p.kernel_grand_mean = st.at("kernel_grand_mean").get<double>();
      p.eigenvalues = {st.at("eigenvalues").at(0).get<double>(), st.at("eigenvalues").at(1).get<double>()};
      for (const auto& row : st.at("training")) p.training.push_back(detail::read_series(row));
      p.perplexity = st.at("perplexity").get<double>();
      for (const auto& kv : st.at("kl_history")) p.kl_history.emplace_back(kv.at(0).get<int>(), kv.at(1).get<double>());
      out.push_back(std::move(cell));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("projection state: ") + e.what());
  }
  return out;
}

}  // namespace tsexplain::proj
