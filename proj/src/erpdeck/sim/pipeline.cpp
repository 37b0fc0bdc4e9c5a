#include "erpdeck/sim/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "erpdeck/classical/linear.hpp"
#include "erpdeck/classical/riemann.hpp"
#include "erpdeck/features.hpp"
#include "erpdeck/nn/architectures.hpp"
#include "erpdeck/nn/complexity.hpp"
#include "erpdeck/nn/model_io.hpp"
#include "erpdeck/signal_io.hpp"

namespace erpdeck::sim {

using nlohmann::json;

namespace {

// Shared scorer-container plumbing: manifest JSON plus one f32 blob holding
// the named arrays back to back.
struct ArrayBlob {
  json manifest_entries = json::array();
  std::vector<double> data;

  void add(const std::string& name, const std::vector<double>& values) {
    manifest_entries.push_back({{"name", name}, {"count", values.size()}});
    data.insert(data.end(), values.begin(), values.end());
  }
  void add(const std::string& name, const Tensor& t) { add(name, t.raw()); }
};

void write_scorer(const std::string& prefix, json manifest, const ArrayBlob& blob) {
  manifest["kind"] = "scorer";
  manifest["format_version"] = 1;
  manifest["arrays"] = blob.manifest_entries;
  std::ofstream out(prefix + ".scorer.json");
  require(out.good(), Errc::io_error, "cannot open " + prefix + ".scorer.json for writing");
  out << manifest.dump(2) << '\n';
  require(out.good(), Errc::io_error, "write failed for " + prefix + ".scorer.json");
  dsp::write_f32_blob(prefix + ".scorer.f32", blob.data);
}

struct LoadedScorer {
  json manifest;
  std::map<std::string, std::vector<double>> arrays;
};

LoadedScorer read_scorer(const std::string& prefix) {
  std::ifstream in(prefix + ".scorer.json");
  require(in.good(), Errc::io_error, "cannot open " + prefix + ".scorer.json");
  LoadedScorer s;
  try {
    in >> s.manifest;
    const std::vector<double> blob = dsp::read_f32_blob(prefix + ".scorer.f32");
    size_t off = 0;
    for (const json& e : s.manifest.at("arrays")) {
      const size_t count = e.at("count").get<size_t>();
      require(off + count <= blob.size(), Errc::corrupt_model, prefix + ": scorer blob truncated");
      s.arrays[e.at("name").get<std::string>()] =
          std::vector<double>(blob.begin() + off, blob.begin() + off + count);
      off += count;
    }
    require(off == blob.size(), Errc::corrupt_model, prefix + ": scorer blob has trailing data");
  } catch (const json::exception& e) {
    fail(Errc::corrupt_model, prefix + ".scorer.json: " + std::string(e.what()));
  }
  return s;
}

// --------------------------------------------------------------------------
// Neural pipelines: per-feature z-score from the calibration statistics, then
// one of the five network architectures.

class NeuralPipeline final : public Pipeline {
 public:
  NeuralPipeline(std::string arch, PipelineParams params)
      : arch_(std::move(arch)), params_(params) {}

  const std::string& id() const override { return arch_; }
  bool probabilistic() const override { return true; }
  bool fitted() const override { return fitted_; }

  void fit(const dsp::EpochTensor& train, uint64_t seed) override {
    stats_ = dsp::zscore_fit(train);
    const dsp::EpochTensor z = dsp::zscore_apply(train, stats_);
    channels_ = train.n_channels();
    samples_ = train.n_samples();
    graph_ = nn::build_architecture(arch_, channels_, samples_);
    graph_.init_weights(derive_seed(seed, "init"));
    nn::train(graph_, as_input(z), z.labels, params_.train, derive_seed(seed, "train"));
    fitted_ = true;
  }

  std::vector<double> score(const dsp::EpochTensor& trials) override {
    require(fitted_, Errc::not_fitted, arch_ + " has not been fitted");
    const dsp::EpochTensor z = dsp::zscore_apply(trials, stats_);
    return nn::predict(graph_, as_input(z));
  }

  void save(const std::string& prefix) const override {
    require(fitted_, Errc::not_fitted, arch_ + " has not been fitted");
    nn::save_model(graph_, arch_, channels_, samples_, prefix);
    ArrayBlob blob;
    blob.add("zscore_mean", stats_.mean);
    blob.add("zscore_std", stats_.std);
    json manifest;
    manifest["pipeline"] = arch_;
    manifest["model_prefix"] = prefix;
    write_scorer(prefix, std::move(manifest), blob);
  }

  void load(const LoadedScorer& s, const std::string& prefix) {
    nn::LoadedModel m = nn::load_model(prefix);
    require(m.architecture == arch_, Errc::corrupt_model, "architecture mismatch");
    graph_ = std::move(m.graph);
    channels_ = m.channels;
    samples_ = m.samples;
    stats_.mean = s.arrays.at("zscore_mean");
    stats_.std = s.arrays.at("zscore_std");
    fitted_ = true;
  }

  uint64_t param_count() const override {
    return const_cast<nn::ModelGraph&>(graph_).param_count();
  }
  uint64_t analytic_macs() const override {
    return const_cast<nn::ModelGraph&>(graph_).analytic_macs();
  }

 private:
  Tensor as_input(const dsp::EpochTensor& e) const {
    Tensor x = e.data;
    if (arch_ == "sepconv1d") {
      x.reshape({e.n_trials(), e.n_channels(), 1, e.n_samples()});
    } else {
      x.reshape({e.n_trials(), 1, e.n_channels(), e.n_samples()});
    }
    return x;
  }

  std::string arch_;
  PipelineParams params_;
  dsp::ZscoreStats stats_;
  nn::ModelGraph graph_;
  size_t channels_ = 0, samples_ = 0;
  bool fitted_ = false;
};

// --------------------------------------------------------------------------
// Downsampling/moving-average LDA family.

class DecimatedLdaPipeline final : public Pipeline {
 public:
  enum class Kind { shrinkage, stepwise };

  DecimatedLdaPipeline(Kind kind, PipelineParams params)
      : kind_(kind), params_(params), id_(kind == Kind::shrinkage ? "shlda" : "swlda") {}

  const std::string& id() const override { return id_; }
  bool probabilistic() const override { return false; }
  bool fitted() const override { return fitted_; }

  void fit(const dsp::EpochTensor& train, uint64_t) override {
    const Tensor raw = dsp::moving_avg_decimate(train, params_.decimation);
    stats_ = dsp::zscore_fit_matrix(raw);
    const Tensor feats = dsp::zscore_apply_matrix(raw, stats_);
    if (kind_ == Kind::shrinkage) {
      scorer_ = classical::fit_shrinkage_lda(feats, train.labels);
      used_fallback_ = false;
    } else {
      try {
        scorer_ = classical::fit_swlda(feats, train.labels, params_.swlda_p_enter,
                                       params_.swlda_p_remove, params_.swlda_max_terms);
        used_fallback_ = false;
      } catch (const Error& e) {
        if (e.code() != Errc::empty_model) throw;
        // Documented fallback: no feature passed entry, use shrinkage LDA.
        scorer_ = classical::fit_shrinkage_lda(feats, train.labels);
        used_fallback_ = true;
      }
    }
    fitted_ = true;
  }

  std::vector<double> score(const dsp::EpochTensor& trials) override {
    require(fitted_, Errc::not_fitted, id_ + " has not been fitted");
    const Tensor feats =
        dsp::zscore_apply_matrix(dsp::moving_avg_decimate(trials, params_.decimation), stats_);
    return scorer_.score_all(feats);
  }

  void save(const std::string& prefix) const override {
    require(fitted_, Errc::not_fitted, id_ + " has not been fitted");
    ArrayBlob blob;
    blob.add("w", scorer_.w);
    blob.add("b", std::vector<double>{scorer_.b});
    blob.add("zscore_mean", stats_.mean);
    blob.add("zscore_std", stats_.std);
    json manifest;
    manifest["pipeline"] = id_;
    manifest["decimation"] = params_.decimation;
    manifest["used_fallback"] = used_fallback_;
    write_scorer(prefix, std::move(manifest), blob);
  }

  void load(const LoadedScorer& s) {
    scorer_.w = s.arrays.at("w");
    scorer_.b = s.arrays.at("b").at(0);
    stats_.mean = s.arrays.at("zscore_mean");
    stats_.std = s.arrays.at("zscore_std");
    params_.decimation = s.manifest.value("decimation", 12);
    fitted_ = true;
  }

  uint64_t param_count() const override { return scorer_.w.size() + 1; }
  uint64_t analytic_macs() const override { return 0; }

 private:
  Kind kind_;
  PipelineParams params_;
  std::string id_;
  dsp::ZscoreStats stats_;
  classical::LinearScorer scorer_;
  bool used_fallback_ = false;
  bool fitted_ = false;
};

// --------------------------------------------------------------------------
// Windsorize + decimate + Bayesian LDA.

class BldaPipeline final : public Pipeline {
 public:
  explicit BldaPipeline(PipelineParams params) : params_(params) {}

  const std::string& id() const override {
    static const std::string name = "blda";
    return name;
  }
  bool probabilistic() const override { return false; }
  bool fitted() const override { return fitted_; }

  void fit(const dsp::EpochTensor& train, uint64_t) override {
    limits_ = dsp::windsorize_fit(train);
    const Tensor feats =
        dsp::moving_avg_decimate(dsp::windsorize_apply(train, limits_), params_.decimation);
    scorer_ = classical::fit_blda(feats, train.labels);
    fitted_ = true;
  }

  std::vector<double> score(const dsp::EpochTensor& trials) override {
    require(fitted_, Errc::not_fitted, "blda has not been fitted");
    const Tensor feats =
        dsp::moving_avg_decimate(dsp::windsorize_apply(trials, limits_), params_.decimation);
    return scorer_.score_all(feats);
  }

  void save(const std::string& prefix) const override {
    require(fitted_, Errc::not_fitted, "blda has not been fitted");
    ArrayBlob blob;
    blob.add("w", scorer_.w);
    blob.add("b", std::vector<double>{scorer_.b});
    blob.add("winsor_lo", limits_.lo);
    blob.add("winsor_hi", limits_.hi);
    json manifest;
    manifest["pipeline"] = id();
    manifest["decimation"] = params_.decimation;
    manifest["converged"] = scorer_.converged;
    write_scorer(prefix, std::move(manifest), blob);
  }

  void load(const LoadedScorer& s) {
    scorer_.w = s.arrays.at("w");
    scorer_.b = s.arrays.at("b").at(0);
    limits_.lo = s.arrays.at("winsor_lo");
    limits_.hi = s.arrays.at("winsor_hi");
    params_.decimation = s.manifest.value("decimation", 12);
    fitted_ = true;
  }

  uint64_t param_count() const override { return scorer_.w.size() + 1; }
  uint64_t analytic_macs() const override { return 0; }

 private:
  PipelineParams params_;
  dsp::WindsorLimits limits_;
  classical::LinearScorer scorer_;
  bool fitted_ = false;
};

// --------------------------------------------------------------------------
// xDAWN + tangent space + linear head. The EN variant projects with the
// log-euclidean map and L1-normalizes each trial; the SVM variant projects
// with the affine-invariant map at the Karcher mean and z-scores features.

class RiemannPipeline final : public Pipeline {
 public:
  enum class Head { elastic_net, linear_svm };

  RiemannPipeline(Head head, PipelineParams params)
      : head_(head),
        params_(params),
        id_(head == Head::elastic_net ? "xdawn_ts_en" : "xdawn_ts_svm") {}

  const std::string& id() const override { return id_; }
  bool probabilistic() const override { return false; }
  bool fitted() const override { return fitted_; }

  void fit(const dsp::EpochTensor& train, uint64_t) override {
    const auto metric = head_ == Head::elastic_net ? classical::TangentMetric::log_euclidean
                                                   : classical::TangentMetric::riemann;
    ts_ = classical::fit_tangent_space(train, params_.xdawn_filters, metric);
    Tensor feats = classical::tangent_features(ts_, train);
    if (head_ == Head::elastic_net) {
      l1_normalize(feats);
      scorer_ = classical::fit_elastic_net(feats, train.labels, params_.en_alpha,
                                           params_.en_l1_ratio);
    } else {
      stats_ = dsp::zscore_fit_matrix(feats);
      feats = dsp::zscore_apply_matrix(feats, stats_);
      scorer_ = classical::fit_linear_svm(feats, train.labels, params_.svm_c);
    }
    fitted_ = true;
  }

  std::vector<double> score(const dsp::EpochTensor& trials) override {
    require(fitted_, Errc::not_fitted, id_ + " has not been fitted");
    Tensor feats = classical::tangent_features(ts_, trials);
    if (head_ == Head::elastic_net) {
      l1_normalize(feats);
    } else {
      feats = dsp::zscore_apply_matrix(feats, stats_);
    }
    return scorer_.score_all(feats);
  }

  void save(const std::string& prefix) const override {
    require(fitted_, Errc::not_fitted, id_ + " has not been fitted");
    ArrayBlob blob;
    blob.add("filters", ts_.xdawn.filters);
    blob.add("prototype", ts_.xdawn.prototype);
    blob.add("reference", ts_.reference.raw());
    blob.add("w", scorer_.w);
    blob.add("b", std::vector<double>{scorer_.b});
    if (head_ == Head::linear_svm) {
      blob.add("zscore_mean", stats_.mean);
      blob.add("zscore_std", stats_.std);
    }
    json manifest;
    manifest["pipeline"] = id_;
    manifest["n_filters"] = ts_.xdawn.filters.dim(0);
    manifest["channels"] = ts_.xdawn.filters.dim(1);
    manifest["samples"] = ts_.xdawn.prototype.dim(1);
    write_scorer(prefix, std::move(manifest), blob);
  }

  void load(const LoadedScorer& s) {
    const size_t nf = s.manifest.at("n_filters").get<size_t>();
    const size_t chans = s.manifest.at("channels").get<size_t>();
    const size_t samples = s.manifest.at("samples").get<size_t>();
    ts_.xdawn.filters = Tensor({nf, chans});
    ts_.xdawn.filters.raw() = s.arrays.at("filters");
    ts_.xdawn.prototype = Tensor({nf, samples});
    ts_.xdawn.prototype.raw() = s.arrays.at("prototype");
    ts_.metric = head_ == Head::elastic_net ? classical::TangentMetric::log_euclidean
                                            : classical::TangentMetric::riemann;
    ts_.reference = linalg::SymmetricMatrix::from_dense(2 * nf, s.arrays.at("reference"));
    scorer_.w = s.arrays.at("w");
    scorer_.b = s.arrays.at("b").at(0);
    if (head_ == Head::linear_svm) {
      stats_.mean = s.arrays.at("zscore_mean");
      stats_.std = s.arrays.at("zscore_std");
    }
    fitted_ = true;
  }

  uint64_t param_count() const override { return scorer_.w.size() + 1; }
  uint64_t analytic_macs() const override { return 0; }

 private:
  static void l1_normalize(Tensor& feats) {
    for (size_t t = 0; t < feats.dim(0); ++t) {
      double norm = 0.0;
      for (size_t j = 0; j < feats.dim(1); ++j) norm += std::fabs(feats.at(t, j));
      if (norm > 0.0) {
        for (size_t j = 0; j < feats.dim(1); ++j) feats.at(t, j) /= norm;
      }
    }
  }

  Head head_;
  PipelineParams params_;
  std::string id_;
  classical::TangentSpaceModel ts_;
  dsp::ZscoreStats stats_;
  classical::LinearScorer scorer_;
  bool fitted_ = false;
};

}  // namespace

const std::vector<std::string>& pipeline_ids() {
  static const std::vector<std::string> ids = {"shlda",      "swlda",       "blda",
                                               "xdawn_ts_en", "xdawn_ts_svm", "sepconv1d",
                                               "eegnet",     "eegtcnet",    "eeginception",
                                               "deepconvnet"};
  return ids;
}

const std::vector<std::string>& classical_pipeline_ids() {
  static const std::vector<std::string> ids = {"shlda", "swlda", "blda", "xdawn_ts_en",
                                               "xdawn_ts_svm"};
  return ids;
}

bool is_pipeline(const std::string& id) {
  for (const auto& p : pipeline_ids()) {
    if (p == id) return true;
  }
  return false;
}

std::unique_ptr<Pipeline> make_pipeline(const std::string& id, PipelineParams params) {
  if (nn::is_architecture(id)) return std::make_unique<NeuralPipeline>(id, params);
  if (id == "shlda") {
    return std::make_unique<DecimatedLdaPipeline>(DecimatedLdaPipeline::Kind::shrinkage, params);
  }
  if (id == "swlda") {
    return std::make_unique<DecimatedLdaPipeline>(DecimatedLdaPipeline::Kind::stepwise, params);
  }
  if (id == "blda") return std::make_unique<BldaPipeline>(params);
  if (id == "xdawn_ts_en") {
    return std::make_unique<RiemannPipeline>(RiemannPipeline::Head::elastic_net, params);
  }
  if (id == "xdawn_ts_svm") {
    return std::make_unique<RiemannPipeline>(RiemannPipeline::Head::linear_svm, params);
  }
  fail(Errc::validation_error, "unknown pipeline: " + id);
}

std::unique_ptr<Pipeline> load_pipeline(const std::string& prefix) {
  const LoadedScorer s = read_scorer(prefix);
  std::string id;
  try {
    id = s.manifest.at("pipeline").get<std::string>();
  } catch (const json::exception& e) {
    fail(Errc::corrupt_model, prefix + ": " + std::string(e.what()));
  }
  require(is_pipeline(id), Errc::corrupt_model, prefix + ": unknown pipeline " + id);
  PipelineParams params;
  auto p = make_pipeline(id, params);
  if (auto* np = dynamic_cast<NeuralPipeline*>(p.get())) {
    np->load(s, prefix);
  } else if (auto* dp = dynamic_cast<DecimatedLdaPipeline*>(p.get())) {
    dp->load(s);
  } else if (auto* bp = dynamic_cast<BldaPipeline*>(p.get())) {
    bp->load(s);
  } else if (auto* rp = dynamic_cast<RiemannPipeline*>(p.get())) {
    rp->load(s);
  }
  return p;
}

}  // namespace erpdeck::sim
