#include "erpdeck/sim/comparison.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "erpdeck/parallel.hpp"
#include "erpdeck/stats.hpp"

namespace erpdeck::sim {

using nlohmann::json;

void ComparisonConfig::validate() const {
  require(!pipelines.empty(), Errc::validation_error, "pipelines: empty");
  for (const std::string& p : pipelines) {
    require(is_pipeline(p), Errc::validation_error, "pipelines: unknown id " + p);
  }
  require(n_subjects >= 1, Errc::validation_error, "subjects: must be >= 1");
  require(n_repeats >= 1, Errc::validation_error, "repeats: must be >= 1");
  require(sessions_per_cell >= 1, Errc::validation_error, "sessions: must be >= 1");
  require(snr > 0.0, Errc::validation_error, "snr: must be > 0");
  calibration.validate();
  online.validate();
}

ComparisonResult run_comparison(const ComparisonConfig& cfg) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;

  struct Cell {
    size_t pipeline_idx, subject, repeat;
  };
  std::vector<Cell> cells;
  for (size_t p = 0; p < cfg.pipelines.size(); ++p) {
    for (int s = 0; s < cfg.n_subjects; ++s) {
      for (int r = 0; r < cfg.n_repeats; ++r) {
        cells.push_back({p, static_cast<size_t>(s), static_cast<size_t>(r)});
      }
    }
  }

  const size_t per_cell = static_cast<size_t>(cfg.sessions_per_cell);
  std::vector<ComparisonRow> rows(cells.size() * per_cell);

  ThreadPool pool(cfg.jobs > 0 ? cfg.jobs
                               : static_cast<int>(ThreadPool::global().threads()));
  pool.for_each(static_cast<int64_t>(cells.size()), [&](int64_t idx) {
    const Cell& cell = cells[static_cast<size_t>(idx)];
    const std::string& pid = cfg.pipelines[cell.pipeline_idx];
    // Sub-seeds keyed on (pipeline, subject, repeat): schedules cannot
    // change any stream.
    const uint64_t cell_seed =
        derive_seed(cfg.seed, "cell",
                    {hash_tag(pid), static_cast<uint64_t>(cell.subject),
                     static_cast<uint64_t>(cell.repeat)});

    SessionPlan plan;
    plan.calibration = cfg.calibration;
    plan.online = cfg.online;
    plan.subject = make_subject(cfg.seed, static_cast<int>(cell.subject), cfg.snr);
    plan.pipeline_id = pid;
    plan.params = cfg.params;
    plan.seed = cell_seed;
    plan.apply_shift = cfg.apply_shift;

    for (size_t sess = 0; sess < per_cell; ++sess) {
      ComparisonRow& row = rows[static_cast<size_t>(idx) * per_cell + sess];
      row.pipeline = pid;
      row.subject = static_cast<int>(cell.subject);
      row.session = static_cast<int>(sess);
      row.repeat = static_cast<int>(cell.repeat);
    }

    try {
      // Calibrate once per cell, decode each copy-spelling phase.
      synth::NoiseSpec calib_noise = plan.subject.noise;
      calib_noise.seed = derive_seed(cell_seed, "calibration");
      const synth::SynthesizedSession calib = synth::synth_session(
          plan.calibration, plan.subject.components, calib_noise,
          std::vector<double>{plan.subject.attend_mean});
      const dsp::EpochTensor train = preprocess_session(calib.recording);

      auto pipeline = make_pipeline(pid, cfg.params);
      const auto t0 = Clock::now();
      pipeline->fit(train, derive_seed(cell_seed, "fit"));
      const double train_time_s =
          std::chrono::duration<double>(Clock::now() - t0).count();

      for (size_t sess = 0; sess < per_cell; ++sess) {
        ComparisonRow& row = rows[static_cast<size_t>(idx) * per_cell + sess];
        const SessionResult r =
            decode_online_session(*pipeline, plan, derive_seed(cell_seed, "online", {sess}));
        row.report = r.report;
        row.train_time_s = train_time_s;
        row.infer_ms = r.infer_ms_per_trial;
        row.params = pipeline->param_count();
        row.macs = pipeline->analytic_macs();
      }
    } catch (const std::exception& e) {
      for (size_t sess = 0; sess < per_cell; ++sess) {
        ComparisonRow& row = rows[static_cast<size_t>(idx) * per_cell + sess];
        row.failed = true;
        row.error = e.what();
      }
    }
  });

  ComparisonResult result;
  result.rows = std::move(rows);
  for (const ComparisonRow& r : result.rows) result.incomplete_cells += r.failed;

  // Per-pipeline aggregates over all successful rows.
  for (const std::string& pid : cfg.pipelines) {
    std::vector<double> auc, cdr, itr, ba;
    for (const ComparisonRow& r : result.rows) {
      if (r.pipeline != pid || r.failed) continue;
      auc.push_back(r.report.auc);
      cdr.push_back(r.report.detection_rate);
      itr.push_back(r.report.itr);
      ba.push_back(r.report.balanced_acc);
    }
    PipelineAggregate agg;
    agg.pipeline = pid;
    agg.n = auc.size();
    agg.auc_mean = stats::mean(auc);
    agg.auc_std = stats::sample_std(auc);
    agg.cdr_mean = stats::mean(cdr);
    agg.cdr_std = stats::sample_std(cdr);
    agg.itr_mean = stats::mean(itr);
    agg.itr_std = stats::sample_std(itr);
    agg.ba_mean = stats::mean(ba);
    agg.ba_std = stats::sample_std(ba);
    result.aggregates.push_back(agg);
  }

  result.stats = analyze_rows(result.rows);
  return result;
}

std::vector<MetricStats> analyze_rows(const std::vector<ComparisonRow>& rows) {
  // Subject-level means per pipeline, in first-appearance order.
  std::vector<std::string> pipelines;
  std::vector<int> subjects;
  for (const ComparisonRow& r : rows) {
    if (r.failed) continue;
    if (std::find(pipelines.begin(), pipelines.end(), r.pipeline) == pipelines.end()) {
      pipelines.push_back(r.pipeline);
    }
    if (std::find(subjects.begin(), subjects.end(), r.subject) == subjects.end()) {
      subjects.push_back(r.subject);
    }
  }
  std::sort(subjects.begin(), subjects.end());

  std::vector<MetricStats> out;
  const char* names[3] = {"auc", "cdr", "itr"};
  for (int m = 0; m < 3; ++m) {
    MetricStats ms;
    ms.metric = names[m];
    Tensor matrix({subjects.size(), pipelines.size()}, 0.0);
    Tensor counts({subjects.size(), pipelines.size()}, 0.0);
    for (const ComparisonRow& r : rows) {
      if (r.failed) continue;
      const size_t i = static_cast<size_t>(
          std::find(subjects.begin(), subjects.end(), r.subject) - subjects.begin());
      const size_t j = static_cast<size_t>(
          std::find(pipelines.begin(), pipelines.end(), r.pipeline) - pipelines.begin());
      const double v = m == 0 ? r.report.auc
                              : (m == 1 ? r.report.detection_rate : r.report.itr);
      matrix.at(i, j) += v;
      counts.at(i, j) += 1.0;
    }
    bool complete = subjects.size() >= 2 && pipelines.size() >= 2;
    for (size_t i = 0; i < matrix.size() && complete; ++i) complete = counts[i] > 0.0;
    if (complete) {
      for (size_t i = 0; i < matrix.size(); ++i) matrix[i] /= counts[i];
      try {
        const stats::FriedmanResult fr = stats::friedman(matrix);
        ms.friedman_chi2 = fr.chi2;
        ms.friedman_p = fr.p;
        ms.friedman_defined = true;
      } catch (const Error&) {
        ms.friedman_defined = false;
      }
      for (size_t a = 0; a < pipelines.size(); ++a) {
        for (size_t b = a + 1; b < pipelines.size(); ++b) {
          std::vector<double> va(subjects.size()), vb(subjects.size());
          for (size_t i = 0; i < subjects.size(); ++i) {
            va[i] = matrix.at(i, a);
            vb[i] = matrix.at(i, b);
          }
          PairTest pt;
          pt.a = pipelines[a];
          pt.b = pipelines[b];
          try {
            const stats::WilcoxonResult wr = stats::wilcoxon_signed_rank(va, vb);
            pt.w_plus = wr.w_plus;
            pt.p = wr.p_two_sided;
          } catch (const Error&) {
            pt.w_plus = 0.0;
            pt.p = 1.0;
          }
          ms.wilcoxon.push_back(pt);
        }
      }
    }
    out.push_back(std::move(ms));
  }
  return out;
}

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
}  // namespace

std::string comparison_csv(const ComparisonResult& r) {
  std::ostringstream out;
  out << "subject,session,pipeline,repeat,ba,auc,cdr,itr,train_time_s,infer_ms,params,macs\n";
  for (const ComparisonRow& row : r.rows) {
    if (row.failed) {
      out << row.subject << ',' << row.session << ',' << row.pipeline << ',' << row.repeat
          << ",nan,nan,nan,nan,nan,nan,0,0\n";
      continue;
    }
    out << row.subject << ',' << row.session << ',' << row.pipeline << ',' << row.repeat << ','
        << fmt(row.report.balanced_acc) << ',' << fmt(row.report.auc) << ','
        << fmt(row.report.detection_rate) << ',' << fmt(row.report.itr) << ','
        << fmt(row.train_time_s) << ',' << fmt(row.infer_ms) << ',' << row.params << ','
        << row.macs << '\n';
  }
  return out.str();
}

std::string comparison_summary_json(const ComparisonResult& r, bool include_timing) {
  json j;
  j["kind"] = "comparison_summary";
  j["incomplete_cells"] = r.incomplete_cells;
  json pipelines = json::object();
  for (const PipelineAggregate& a : r.aggregates) {
    json p;
    p["n"] = a.n;
    p["auc"] = {{"mean", a.auc_mean}, {"std", a.auc_std}};
    p["cdr"] = {{"mean", a.cdr_mean}, {"std", a.cdr_std}};
    p["itr"] = {{"mean", a.itr_mean}, {"std", a.itr_std}};
    p["ba"] = {{"mean", a.ba_mean}, {"std", a.ba_std}};
    pipelines[a.pipeline] = std::move(p);
  }
  j["pipelines"] = std::move(pipelines);
  json st = json::object();
  for (const MetricStats& ms : r.stats) {
    json mj;
    if (ms.friedman_defined) {
      mj["friedman"] = {{"chi2", ms.friedman_chi2}, {"p", ms.friedman_p}};
    } else {
      mj["friedman"] = nullptr;
    }
    json pairs = json::array();
    for (const PairTest& pt : ms.wilcoxon) {
      pairs.push_back({{"a", pt.a}, {"b", pt.b}, {"w_plus", pt.w_plus}, {"p", pt.p}});
    }
    mj["wilcoxon"] = std::move(pairs);
    st[ms.metric] = std::move(mj);
  }
  j["stats"] = std::move(st);
  if (include_timing) {
    json timing = json::object();
    std::map<std::string, std::pair<double, size_t>> per_pipeline;
    for (const ComparisonRow& row : r.rows) {
      if (row.failed) continue;
      auto& [sum, n] = per_pipeline[row.pipeline];
      sum += row.train_time_s;
      ++n;
    }
    for (const auto& [pid, agg] : per_pipeline) {
      timing[pid] = {{"train_time_s_mean", agg.second ? agg.first / agg.second : 0.0}};
    }
    j["timing"] = std::move(timing);
  }
  return j.dump(2) + "\n";
}

}  // namespace erpdeck::sim
