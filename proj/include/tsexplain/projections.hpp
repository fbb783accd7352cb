#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsexplain/data.hpp"

namespace tsexplain::proj {

enum class Technique { kPca, kKernelPca, kTsne };

std::string_view technique_name(Technique technique);
Technique parse_technique(std::string_view name);  // throws InvalidConfig
const std::vector<Technique>& all_techniques();

using Point = std::array<float, 2>;

struct KernelPcaParams {
  std::optional<double> gamma;  // unset: 1 / (D * var(all entries))
  // Above this many rows the top eigenpairs come from subspace iteration
  // instead of a full dense eigendecomposition.
  std::size_t dense_limit = 1200;
};

struct TsneParams {
  std::optional<double> perplexity;  // unset: min(30, (N - 1) / 3)
  int iterations = 1000;
  int exaggeration_iterations = 250;
  double exaggeration = 12.0;
  std::uint64_t seed = 0;
};

/// A fitted 2-D embedding of N training rows with enough state to place new rows.
struct Projection {
  Technique technique = Technique::kPca;
  std::vector<Point> coords;
  bool degenerate_rank = false;
  std::size_t dims = 0;

  // pca
  std::vector<double> mean;
  std::array<std::vector<double>, 2> components;
  // kernel pca
  double gamma = 0.0;
  std::array<std::vector<double>, 2> alphas;  // eigenvector / sqrt(eigenvalue)
  std::vector<double> kernel_row_means;
  double kernel_grand_mean = 0.0;
  std::array<double, 2> eigenvalues{0.0, 0.0};
  // kernel pca and t-SNE keep the rows for out-of-sample placement
  std::vector<Series> training;
  // t-SNE
  double perplexity = 0.0;
  std::vector<std::pair<int, double>> kl_history;  // (iterations done, KL(P||Q))
};

/// Throws InvalidArgument unless N >= 3 and D >= 2 (PCA, kernel PCA).
Projection fit_pca(std::span<const Series> rows);
Projection fit_kernel_pca(std::span<const Series> rows, const KernelPcaParams& params = {});
/// Throws PerplexityTooLarge when N < 10 or perplexity > (N - 1) / 3.
Projection fit_tsne(std::span<const Series> rows, const TsneParams& params = {});
Projection fit(Technique technique, std::span<const Series> rows, std::uint64_t seed = 0);

/// Throws DimensionMismatch when the row length differs from the fitted D.
Point project_oos(const Projection& projection, std::span<const float> row);

struct ScoreWeights {
  double predictions = 2.0;
  double labels = 1.0;
};

struct ClusterScore {
  double db_labels = 0.0;
  double db_preds = 0.0;
  double cdist_labels = 0.0;
  double cdist_preds = 0.0;
  double g_labels = 0.0;
  double g_preds = 0.0;
  double combined = 0.0;
  bool labels_degenerate = false;  // fewer than two groups present
  bool preds_degenerate = false;
};

/// Davies-Bouldin index of a grouping; centroid distance 0 gives R = 0.
double davies_bouldin(std::span<const Point> coords, std::span<const int> groups);
/// Mean pairwise Euclidean distance between group centroids.
double centroid_distance(std::span<const Point> coords, std::span<const int> groups);

ClusterScore cluster_score(std::span<const Point> coords, std::span<const int> labels,
                           std::span<const int> preds, const ScoreWeights& weights = {});

struct ProjectionCell {
  std::string source;
  Projection projection;
  ClusterScore score;
  bool visible = true;
};

/// visible = combined >= 0.5 * median over all cells; the best cell of each
/// source always stays visible.
void set_visibility(std::span<ProjectionCell> cells);

std::string to_json(std::span<const ProjectionCell> cells);

/// Cells with the complete fitted state, enough for project_oos after reload.
std::string state_to_json(std::span<const ProjectionCell> cells);
std::vector<ProjectionCell> cells_from_state_json(std::string_view text);  // throws InvalidConfig

}  // namespace tsexplain::proj
