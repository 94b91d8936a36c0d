#include "omnic/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "omnic/errors.hpp"

namespace omnic {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void require_unit(const FeatureMatrix& rows, const char* what) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double n = std::sqrt(dot(rows[i], rows[i]));
    if (std::abs(n - 1.0) > 1e-3) {
      throw ContractError(std::string(what) + ": row " + std::to_string(i) + " has norm " + std::to_string(n));
    }
  }
}

std::size_t common_dim(const FeatureMatrix& rows, const char* what) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != d) throw DimensionError(std::string(what) + ": ragged feature rows");
  }
  return d;
}

}  // namespace

FeatureMatrix to_double(const std::vector<std::vector<float>>& rows) {
  FeatureMatrix out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i].assign(rows[i].begin(), rows[i].end());
  return out;
}

FeatureMatrix l2_normalize_rows(const FeatureMatrix& rows) {
  FeatureMatrix out = rows;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double n = std::sqrt(dot(out[i], out[i]));
    if (n == 0.0) throw NumericError("zero feature vector at row " + std::to_string(i));
    for (double& v : out[i]) v /= n;
  }
  return out;
}

std::vector<std::int32_t> knn_classify(const FeatureMatrix& train, std::span<const std::int32_t> train_labels,
                                       const FeatureMatrix& queries, const KnnOptions& options) {
  if (train.empty()) throw ContractError("knn_classify: empty train set");
  if (train_labels.size() != train.size()) throw ContractError("knn_classify: label count differs from train rows");
  if (options.k == 0 || options.k > train.size()) {
    throw ContractError("knn_classify: k=" + std::to_string(options.k) + " outside [1, " +
                        std::to_string(train.size()) + "]");
  }
  if (!(options.temperature > 0.0)) throw ContractError("knn_classify: temperature must be positive");
  const std::size_t d = common_dim(train, "knn_classify");
  for (const auto& q : queries) {
    if (q.size() != d) throw DimensionError("knn_classify: query dimension differs from train");
  }
  const FeatureMatrix tn = l2_normalize_rows(train);
  const FeatureMatrix qn = l2_normalize_rows(queries);

  std::vector<std::int32_t> out;
  out.reserve(queries.size());
  std::vector<double> sims(train.size());
  std::vector<std::size_t> order(train.size());
  for (const auto& q : qn) {
    for (std::size_t i = 0; i < tn.size(); ++i) sims[i] = dot(q, tn[i]);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(options.k), order.end(),
                      [&](std::size_t a, std::size_t b) { return sims[a] > sims[b] || (sims[a] == sims[b] && a < b); });
    std::map<std::int32_t, double> votes;
    for (std::size_t j = 0; j < options.k; ++j) {
      const std::size_t i = order[j];
      votes[train_labels[i]] += std::exp(sims[i] / options.temperature);
    }
    std::int32_t best = votes.begin()->first;
    double best_vote = votes.begin()->second;
    for (const auto& [label, vote] : votes) {
      if (vote > best_vote) {
        best = label;
        best_vote = vote;
      }
    }
    out.push_back(best);
  }
  return out;
}

double accuracy(std::span<const std::int32_t> predicted, std::span<const std::int32_t> expected) {
  if (predicted.size() != expected.size()) throw ContractError("accuracy: length mismatch");
  if (predicted.empty()) throw ContractError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == expected[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double alignment_metric(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.empty()) throw ContractError("alignment_metric: need at least one pair");
  if (a.size() != b.size()) throw ContractError("alignment_metric: sides differ in length");
  common_dim(a, "alignment_metric");
  if (common_dim(b, "alignment_metric") != a.front().size()) throw DimensionError("alignment_metric: dimension mismatch");
  require_unit(a, "alignment_metric");
  require_unit(b, "alignment_metric");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += squared_distance(a[i], b[i]);
  return s / static_cast<double>(a.size());
}

double uniformity_metric(const FeatureMatrix& feats) {
  if (feats.size() < 2) throw ContractError("uniformity_metric: need at least two vectors");
  common_dim(feats, "uniformity_metric");
  require_unit(feats, "uniformity_metric");
  // Each unordered pair stands for both orderings.
  double s = 0.0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t j = i + 1; j < feats.size(); ++j) s += std::exp(-2.0 * squared_distance(feats[i], feats[j]));
  }
  const double n = static_cast<double>(feats.size());
  return std::log(2.0 * s / (n * (n - 1.0)));
}

std::vector<AttentionRecord> attention_records(const OmniEncoder<float>& enc, std::span<const ModalitySample> samples,
                                               std::size_t chunk) {
  std::vector<AttentionRecord> out;
  out.reserve(samples.size());
  if (chunk == 0) chunk = 1;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t count = std::min(chunk, samples.size() - start);
    auto tape = Tape<float>::no_grad();
    const auto res = encode_with(tape, enc, samples.subspan(start, count), EncodeOptions{true});
    const auto& shp = res.last_attention.shape();
    const std::size_t heads = shp[1];
    const std::size_t s = shp[2];
    const std::size_t per = heads * s * s;
    const auto data = res.last_attention.data();
    const Modality m = samples[start].modality();
    for (std::size_t b = 0; b < count; ++b) {
      AttentionRecord rec{m, s - 1, heads, {}};
      rec.values.assign(data.begin() + static_cast<std::ptrdiff_t>(b * per),
                        data.begin() + static_cast<std::ptrdiff_t>((b + 1) * per));
      out.push_back(std::move(rec));
    }
  }
  return out;
}

AttentionMap average_attention(std::span<const AttentionRecord> records) {
  if (records.empty()) throw ContractError("average_attention: no records");
  const std::size_t s = records.front().tokens + 1;
  AttentionMap map{s, std::vector<double>(s * s, 0.0)};
  double count = 0.0;
  for (const auto& r : records) {
    if (r.tokens + 1 != s) throw ContractError("average_attention: mixed sequence lengths");
    if (r.values.size() != r.heads * s * s) throw DimensionError("average_attention: record size mismatch");
    for (std::size_t h = 0; h < r.heads; ++h) {
      for (std::size_t i = 0; i < s * s; ++i) map.values[i] += r.values[h * s * s + i];
    }
    count += static_cast<double>(r.heads);
  }
  for (double& v : map.values) v /= count;
  return map;
}

AttentionMap average_attention_map(const OmniEncoder<float>& enc, std::span<const ModalitySample> samples) {
  if (samples.empty()) throw ContractError("average_attention_map: no samples");
  const Modality m = samples.front().modality();
  for (const auto& s : samples) {
    if (s.modality() != m) throw ContractError("average_attention_map: mixed modalities");
  }
  if (m == Modality::kText) {
    const std::size_t len = samples.front().text().ids.size();
    for (const auto& s : samples) {
      if (s.text().ids.size() != len) throw ContractError("average_attention_map: mixed sequence lengths");
    }
  }
  const auto records = attention_records(enc, samples);
  return average_attention(records);
}

double max_row_sum_deviation(std::span<const double> matrix, std::size_t size) {
  double worst = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < size; ++j) s += matrix[i * size + j];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

ProjectionMethod parse_projection_method(const std::string& text) {
  if (text == "pca") return ProjectionMethod::kPca;
  if (text == "raw") return ProjectionMethod::kRaw;
  throw ConfigError("unknown projection method '" + text + "' (expected pca or raw)");
}

std::vector<EmbeddingRow> export_embeddings_2d(const FeatureMatrix& feats, std::span<const Modality> modalities,
                                               std::span<const std::int32_t> labels, ProjectionMethod method) {
  if (modalities.size() != feats.size() || labels.size() != feats.size()) {
    throw ContractError("export_embeddings_2d: modality/label count differs from rows");
  }
  const std::size_t d = common_dim(feats, "export_embeddings_2d");
  std::vector<EmbeddingRow> out(feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    out[i].modality = modalities[i];
    out[i].label = labels[i];
  }
  if (method == ProjectionMethod::kRaw) {
    for (std::size_t i = 0; i < feats.size(); ++i) out[i].coords = feats[i];
    return out;
  }
  if (feats.size() < 2) throw ContractError("export_embeddings_2d: pca needs at least two rows");
  if (d < 2) throw ContractError("export_embeddings_2d: pca needs dimension >= 2");
  const auto n = static_cast<Eigen::Index>(feats.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, static_cast<Eigen::Index>(j)) = feats[static_cast<std::size_t>(i)][j];
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("export_embeddings_2d: eigendecomposition failed");
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const Eigen::Index top = evals.size() - 1;
  if (!(evals(top) > 1e-12 * std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff())) || evals(top) <= 0.0) {
    throw NumericError("export_embeddings_2d: zero-variance data");
  }
  Eigen::MatrixXd axes(static_cast<Eigen::Index>(d), 2);
  axes.col(0) = solver.eigenvectors().col(top);
  axes.col(1) = solver.eigenvectors().col(top - 1);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    axes.col(c).cwiseAbs().maxCoeff(&arg);
    if (axes(arg, c) < 0.0) axes.col(c) *= -1.0;
  }
  const Eigen::MatrixXd proj = x * axes;
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)].coords = {proj(i, 0), proj(i, 1)};
  return out;
}

std::string embeddings_csv(const std::vector<EmbeddingRow>& rows) {
  std::string out;
  const std::size_t dims = rows.empty() ? 2 : rows.front().coords.size();
  if (dims == 2) {
    out = "x,y";
  } else {
    for (std::size_t j = 0; j < dims; ++j) out += (j ? ",f" : "f") + std::to_string(j);
  }
  out += ",modality,label\n";
  char buf[64];
  for (const auto& r : rows) {
    for (double v : r.coords) {
      std::snprintf(buf, sizeof(buf), "%.17g,", v);
      out += buf;
    }
    out += std::string(modality_name(r.modality)) + "," + std::to_string(r.label) + "\n";
  }
  return out;
}

double modality_centroid_purity(const std::array<FeatureMatrix, 3>& per_modality) {
  std::vector<std::size_t> present;
  std::array<std::vector<double>, 3> centroids;
  std::size_t total = 0;
  for (std::size_t m = 0; m < 3; ++m) {
    if (per_modality[m].empty()) continue;
    present.push_back(m);
    const std::size_t d = common_dim(per_modality[m], "modality_centroid_purity");
    centroids[m].assign(d, 0.0);
    for (const auto& r : per_modality[m]) {
      for (std::size_t j = 0; j < d; ++j) centroids[m][j] += r[j];
    }
    for (double& v : centroids[m]) v /= static_cast<double>(per_modality[m].size());
    total += per_modality[m].size();
  }
  if (present.size() < 2) throw ContractError("modality_centroid_purity: need at least two modalities");
  std::size_t hits = 0;
  for (std::size_t m : present) {
    for (const auto& r : per_modality[m]) {
      std::size_t best = present.front();
      double best_d = squared_distance(r, centroids[best]);
      for (std::size_t c : present) {
        const double dd = squared_distance(r, centroids[c]);
        if (dd < best_d) {
          best = c;
          best_d = dd;
        }
      }
      hits += best == m;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace omnic
