#include "lgn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lgn {

void MetricSpec::validate() const {
  if (n_values.empty() || m_values.empty()) {
    throw ConfigError("metric spec needs at least one n and one m");
  }
  for (std::size_t n : n_values) {
    if (n == 0) throw ConfigError("metric spec requires n >= 1");
  }
  for (double m : m_values) {
    if (!(m > 0.0 && m <= 1.0)) {
      throw ConfigError("metric spec requires m in (0, 1], got " +
                        std::to_string(m));
    }
  }
}

double MetricReport::at(std::size_t n, double m) const {
  for (const Entry& e : entries) {
    if (e.n == n && e.m == m) return e.percent;
  }
  throw ConfigError("metric report has no entry for n = " + std::to_string(n) +
                    ", m = " + std::to_string(m));
}

std::string MetricReport::table() const {
  std::ostringstream out;
  out << "queries: " << query_count
      << "  fingerprint: " << config_fingerprint << '\n';
  char line[64];
  for (const Entry& e : entries) {
    std::snprintf(line, sizeof(line), "Rank%zu@IoU%.2f  %6.2f%%\n", e.n, e.m,
                  e.percent);
    out << line;
  }
  return out.str();
}

bool query_hit(const std::vector<RankedProposal>& ranked,
               const MomentSpan& gt, std::size_t n, double m,
               bool open_threshold) {
  if (n == 0) {
    throw ConfigError("query_hit requires n >= 1");
  }
  const std::size_t limit = std::min(n, ranked.size());
  for (std::size_t i = 0; i < limit; ++i) {
    double iou = temporal_iou(ranked[i].span, gt);
    if (open_threshold ? iou > m : iou >= m) return true;
  }
  return false;
}

MetricReport evaluate(const std::vector<Sample>& dataset,
                      const LgnModel& model, const MetricSpec& spec,
                      std::vector<QueryOutcome>* outcomes) {
  spec.validate();
  if (dataset.empty()) {
    throw ValidationError("evaluate requires a non-empty dataset");
  }
  const std::size_t N = model.config().N;
  const std::size_t max_n =
      *std::max_element(spec.n_values.begin(), spec.n_values.end());

  std::vector<std::size_t> hits(spec.n_values.size() * spec.m_values.size(),
                                0);
  NoGradGuard guard;
  RunContext ctx;  // evaluation mode
  std::size_t index = 0;
  for (const Sample& sample : dataset) {
    ForwardResult out;
    try {
      out = model.forward(*sample.video, sample.annotation.tokens, ctx);
    } catch (const Error& e) {
      throw IngestionError("evaluation failed on video '" +
                           sample.annotation.video_id + "': " + e.what());
    }
    auto valid = build_validity_mask(N);
    const double duration = sample.video->duration_s;

    // one ranked list per distinct NMS setting
    std::vector<RankedProposal> plain;
    std::vector<RankedProposal> suppressed;
    auto ranked_for = [&](std::size_t n) -> const std::vector<RankedProposal>& {
      std::optional<double> nms =
          spec.nms_iou.has_value()
              ? spec.nms_iou
              : (n > 1 ? std::optional<double>(0.5) : std::nullopt);
      if (!nms.has_value()) {
        if (plain.empty())
          plain = rank_proposals(out.scores, valid, max_n, std::nullopt, N,
                                 duration);
        return plain;
      }
      if (suppressed.empty())
        suppressed =
            rank_proposals(out.scores, valid, max_n, nms, N, duration);
      return suppressed;
    };

    for (std::size_t ni = 0; ni < spec.n_values.size(); ++ni) {
      const auto& ranked = ranked_for(spec.n_values[ni]);
      for (std::size_t mi = 0; mi < spec.m_values.size(); ++mi) {
        if (query_hit(ranked, sample.annotation.span, spec.n_values[ni],
                      spec.m_values[mi], spec.open_threshold)) {
          hits[ni * spec.m_values.size() + mi] += 1;
        }
      }
    }

    if (outcomes != nullptr) {
      QueryOutcome qo;
      qo.index = index;
      qo.video_id = sample.annotation.video_id;
      qo.top = ranked_for(max_n);
      for (const RankedProposal& rp : qo.top)
        qo.ious.push_back(temporal_iou(rp.span, sample.annotation.span));
      outcomes->push_back(std::move(qo));
    }
    ++index;
  }

  MetricReport report;
  report.query_count = dataset.size();
  report.config_fingerprint = model_fingerprint(model);
  const double scale = 100.0 / static_cast<double>(dataset.size());
  for (std::size_t ni = 0; ni < spec.n_values.size(); ++ni) {
    for (std::size_t mi = 0; mi < spec.m_values.size(); ++mi) {
      report.entries.push_back(MetricReport::Entry{
          spec.n_values[ni], spec.m_values[mi],
          scale * static_cast<double>(hits[ni * spec.m_values.size() + mi])});
    }
  }
  return report;
}

void write_outcomes_csv(const std::filesystem::path& path,
                        const std::vector<QueryOutcome>& outcomes) {
  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot open CSV for writing: " + path.string());
  }
  out << "query,video_id,rank,start_s,end_s,score,iou\n";
  for (const QueryOutcome& qo : outcomes) {
    for (std::size_t r = 0; r < qo.top.size(); ++r) {
      out << qo.index << ',' << qo.video_id << ',' << (r + 1) << ','
          << qo.top[r].span.start_s << ',' << qo.top[r].span.end_s << ','
          << qo.top[r].score << ',' << qo.ious[r] << '\n';
    }
  }
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<AblationRow> ablation_report(
    const std::vector<Sample>& train_set, const std::vector<Sample>& test_set,
    const ModelConfig& base_config, const TrainConfig& train_config,
    const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) {
    throw ConfigError("ablation_report requires at least one seed");
  }
  struct Variant {
    const char* name;
    bool use_early, use_late;
  };
  const Variant variants[4] = {{"baseline", false, false},
                               {"early", true, false},
                               {"late", false, true},
                               {"full", true, true}};
  MetricSpec spec;
  spec.n_values = {1};
  spec.m_values = {0.5};

  std::vector<AblationRow> rows;
  for (const Variant& variant : variants) {
    AblationRow row;
    row.name = variant.name;
    for (std::uint64_t seed : seeds) {
      ModelConfig cfg = base_config;
      cfg.use_early = variant.use_early;
      cfg.use_late = variant.use_late;
      cfg.seed = seed;
      TrainConfig tc = train_config;
      tc.seed = seed;
      Rng init_rng(seed);
      LgnModel model(cfg, vocabulary_from_samples(train_set), init_rng);
      train(train_set, model, tc);
      MetricReport report = evaluate(test_set, model, spec);
      row.per_seed.push_back(report.at(1, 0.5));
    }
    row.median = median(row.per_seed);
    rows.push_back(std::move(row));
  }
  for (AblationRow& row : rows) row.delta = row.median - rows[0].median;
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "config      Rank1@IoU0.5   delta\n";
  char line[96];
  for (const AblationRow& row : rows) {
    std::snprintf(line, sizeof(line), "%-10s  %12.2f  %6.2f\n",
                  row.name.c_str(), row.median, row.delta);
    out << line;
  }
  return out.str();
}

}  // namespace lgn
