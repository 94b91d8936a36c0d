#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "omnic/encoder.hpp"
#include "omnic/modality.hpp"

namespace omnic {

/// One feature vector per row.
using FeatureMatrix = std::vector<std::vector<double>>;

FeatureMatrix to_double(const std::vector<std::vector<float>>& rows);

struct KnnOptions {
  std::size_t k = 20;
  double temperature = 0.07;
};

/// Weighted kNN vote over cosine similarity with weights exp(sim / T). Equal
/// similarities rank the lower train index first; equal votes pick the lower
/// class id. Throws ContractError on an empty train set or k > train size.
std::vector<std::int32_t> knn_classify(const FeatureMatrix& train, std::span<const std::int32_t> train_labels,
                                       const FeatureMatrix& queries, const KnnOptions& options = {});

/// Fraction of positions where predicted equals expected.
double accuracy(std::span<const std::int32_t> predicted, std::span<const std::int32_t> expected);

/// Mean ‖a_i − b_i‖² over pairs of unit vectors.
double alignment_metric(const FeatureMatrix& a, const FeatureMatrix& b);

/// log of the mean of exp(−2‖x − y‖²) over ordered distinct pairs.
double uniformity_metric(const FeatureMatrix& feats);

struct MetricReport {
  Modality modality = Modality::kImage;
  std::size_t samples = 0;
  double alignment = 0.0;
  double uniformity = 0.0;
};

/// Rows divided by their norms. Throws NumericError on a zero row.
FeatureMatrix l2_normalize_rows(const FeatureMatrix& rows);

/// Last-block attention of one sample, heads × S × S with S = tokens + 1.
struct AttentionRecord {
  Modality modality = Modality::kImage;
  std::size_t tokens = 0;
  std::size_t heads = 0;
  std::vector<double> values;
};

struct AttentionMap {
  std::size_t size = 0;  // S
  std::vector<double> values;  // S × S row-major
};

std::vector<AttentionRecord> attention_records(const OmniEncoder<float>& enc, std::span<const ModalitySample> samples,
                                               std::size_t chunk = 64);

/// Mean over records and heads. Throws ContractError on an empty list or
/// differing token counts.
AttentionMap average_attention(std::span<const AttentionRecord> records);

AttentionMap average_attention_map(const OmniEncoder<float>& enc, std::span<const ModalitySample> samples);

/// Largest |row sum − 1| of a row-major square matrix.
double max_row_sum_deviation(std::span<const double> matrix, std::size_t size);

enum class ProjectionMethod { kPca, kRaw };

ProjectionMethod parse_projection_method(const std::string& text);

struct EmbeddingRow {
  std::vector<double> coords;  // 2 under pca, d under raw
  Modality modality = Modality::kImage;
  std::int32_t label = -1;
};

/// PCA onto the top two eigenvectors of the centred covariance, each axis
/// signed so its largest-magnitude loading is positive. Throws NumericError on
/// zero-variance input and ContractError on fewer than two rows.
std::vector<EmbeddingRow> export_embeddings_2d(const FeatureMatrix& feats, std::span<const Modality> modalities,
                                               std::span<const std::int32_t> labels, ProjectionMethod method);

std::string embeddings_csv(const std::vector<EmbeddingRow>& rows);

/// Fraction of embeddings whose nearest modality centroid (Euclidean) is the
/// centroid of their own modality. Modalities with no rows are ignored.
double modality_centroid_purity(const std::array<FeatureMatrix, 3>& per_modality);

}  // namespace omnic
