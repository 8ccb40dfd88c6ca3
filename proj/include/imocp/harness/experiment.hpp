#pragma once

// Drives calibrators over a score stream under seeded intermittent feedback,
// collects per-round records and summaries, and writes CSV output.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "imocp/calibrators.hpp"
#include "imocp/core.hpp"
#include "imocp/feedback.hpp"
#include "imocp/harness/config.hpp"
#include "imocp/harness/elm.hpp"
#include "imocp/harness/localization.hpp"
#include "imocp/harness/synthetic.hpp"
#include "imocp/metrics.hpp"

namespace imocp::harness {

struct DatasetInfo {
    double raw_bound = 0.0;  // residual scale B before normalization
    std::size_t train_size = 0;
    std::size_t calibration_size = 0;
    std::vector<std::size_t> test_pool = {0, 0, 0};
    std::size_t dropped_above_bound = 0;
    bool surrogate = false;
};

struct ScoreStream {
    std::vector<double> scores;
    std::vector<int> groups;
    double score_bound = 1.0;
    std::optional<DatasetInfo> dataset;
};

// Empirical q-quantile: the ⌈q n⌉-th order statistic.
inline double order_statistic_quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw ValidationError("quantile of an empty sample");
    std::sort(xs.begin(), xs.end());
    auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
    k = std::clamp<std::size_t>(k, 1, xs.size());
    return xs[k - 1];
}

// Split per building into train / calibration / test pools, fit the scaler and
// ELM, set B from the calibration residuals, then draw a length-T stream by
// picking a building uniformly each round and walking that building's shuffled
// test pool (cycling when exhausted). Test samples whose residual exceeds B are
// left out of the pool and counted.
inline ScoreStream build_localization_stream(std::vector<LocalizationSample> samples, const DatasetOptions& opt,
                                             std::size_t horizon) {
    std::vector<std::vector<std::size_t>> by_building(3);
    for (std::size_t i = 0; i < samples.size(); ++i)
        by_building[static_cast<std::size_t>(samples[i].building_id)].push_back(i);

    DatasetInfo info;
    info.surrogate = opt.path.empty();
    std::vector<std::size_t> train_idx, calib_idx;
    std::vector<std::vector<std::size_t>> test_idx(3);
    for (std::size_t b = 0; b < 3; ++b) {
        auto& idx = by_building[b];
        if (idx.empty()) throw ValidationError("no samples for building " + std::to_string(b));
        rng::CounterEngine eng(opt.seed, rng::kSplitStream + 10 + b);
        std::shuffle(idx.begin(), idx.end(), eng);
        const std::size_t want = b < opt.train_per_building.size() ? opt.train_per_building[b] : 0;
        // keep at least a few samples per building out of training
        const std::size_t n_train = std::min(want, idx.size() > 4 ? idx.size() - 4 : 0);
        const std::size_t rest = idx.size() - n_train;
        const auto n_calib = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(opt.calibration_fraction * static_cast<double>(rest))));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (k < n_train)
                train_idx.push_back(idx[k]);
            else if (k < n_train + n_calib)
                calib_idx.push_back(idx[k]);
            else
                test_idx[b].push_back(idx[k]);
        }
    }

    // Coordinates relative to the training centroid; raw UJI coordinates carry
    // offsets of ~1e6 m that wreck the conditioning of the ridge solve.
    double lon0 = 0.0, lat0 = 0.0;
    for (auto i : train_idx) {
        lon0 += samples[i].longitude;
        lat0 += samples[i].latitude;
    }
    lon0 /= static_cast<double>(train_idx.size());
    lat0 /= static_cast<double>(train_idx.size());
    for (auto& s : samples) {
        s.longitude -= lon0;
        s.latitude -= lat0;
    }

    std::vector<LocalizationSample> train;
    for (auto i : train_idx) train.push_back(samples[i]);
    const FeatureScaler scaler = FeatureScaler::fit(train);
    for (auto& s : train) scaler.apply(s);
    for (auto& s : samples) scaler.apply(s);
    const ElmModel model = train_elm(train, opt.hidden, opt.ridge, opt.seed);
    info.train_size = train.size();
    info.calibration_size = calib_idx.size();

    auto abs_residual = [&](const LocalizationSample& s) {
        return std::abs(coordinate_of(s, opt.coordinate) - model.predict(s)(static_cast<int>(opt.coordinate)));
    };
    std::vector<double> calib_res;
    for (auto i : calib_idx) calib_res.push_back(abs_residual(samples[i]));
    info.raw_bound = order_statistic_quantile(calib_res, opt.bound_quantile);
    if (!(info.raw_bound > 0.0)) throw ValidationError("calibration residuals are all zero");

    std::vector<std::vector<double>> pool(3);
    for (std::size_t b = 0; b < 3; ++b) {
        for (auto i : test_idx[b]) {
            if (abs_residual(samples[i]) > info.raw_bound) {
                ++info.dropped_above_bound;
                continue;
            }
            pool[b].push_back(residual_score(model, samples[i], info.raw_bound, opt.coordinate));
        }
        info.test_pool[b] = pool[b].size();
        if (pool[b].empty()) throw ValidationError("empty test pool for building " + std::to_string(b));
    }

    ScoreStream stream;
    stream.score_bound = 1.0;
    std::vector<std::size_t> cursor(3, 0);
    rng::CounterEngine pick(opt.seed, rng::kSplitStream + 20);
    for (std::size_t t = 0; t < horizon; ++t) {
        const auto b = static_cast<std::size_t>(pick.uniform() * 3.0);
        stream.scores.push_back(pool[b][cursor[b]++ % pool[b].size()]);
        stream.groups.push_back(static_cast<int>(b));
    }
    stream.dataset = info;
    return stream;
}

inline ScoreStream build_stream(const ExperimentConfig& config) {
    ScoreStream stream;
    if (config.data.synthetic) {
        stream.scores = generate_synthetic(*config.data.synthetic, config.data.synthetic_seed);
        stream.groups.assign(stream.scores.size(), 0);
        stream.score_bound = config.calibration.score_bound;
    } else if (config.data.dataset) {
        const auto& opt = *config.data.dataset;
        std::vector<LocalizationSample> samples;
        if (opt.path.empty()) {
            samples = generate_surrogate(opt.surrogate);
            apply_detection_floor(samples, opt.floor_dbm);
        } else {
            samples = load_ujiindoorloc(opt.path, opt.floor_dbm);
        }
        stream = build_localization_stream(std::move(samples), opt, config.calibration.horizon);
    } else {
        throw ValidationError("config has no data source");
    }
    for (double s : stream.scores) validate_score(s, stream.score_bound);
    if (!config.feedback_per_round) {
        for (int g : stream.groups)
            if (g < 0 || static_cast<std::size_t>(g) >= config.feedback_probs.size())
                throw ValidationError("no feedback probability for group " + std::to_string(g));
    }
    return stream;
}

inline FeedbackPolicy feedback_policy(const ExperimentConfig& config, std::uint64_t seed) {
    return config.feedback_per_round ? FeedbackPolicy::per_round(config.feedback_probs, seed)
                                     : FeedbackPolicy::per_group(config.feedback_probs, seed);
}

// One calibrator over the stream. ACI and B-ACI receive feedback every round
// (recorded with p = 1); the others follow the policy.
inline std::vector<StreamRecord> run_replica(Algorithm algorithm, const ScoreStream& stream,
                                             const ExperimentConfig& config, std::uint64_t seed) {
    const Regularizer reg = config.regularizer();
    Calibrator cal = [&]() -> Calibrator {
        if (algorithm == Algorithm::imocp)
            return ImOcp(config.calibration, config.schedule,
                         MirrorMap(reg, config.mirror_tolerance, config.mirror_max_iterations));
        return make_calibrator(algorithm, config.calibration, config.schedule, reg);
    }();
    const FeedbackPolicy policy = feedback_policy(config, seed);
    const FeedbackMode mode = feedback_mode(algorithm);
    const bool full = requires_full_feedback(algorithm);

    std::vector<StreamRecord> records;
    records.reserve(stream.scores.size());
    for (std::size_t i = 0; i < stream.scores.size(); ++i) {
        const std::size_t t = i + 1;
        const double score = stream.scores[i];
        const int group = stream.groups[i];
        const double r = threshold(cal);
        const double p = full ? 1.0 : policy.prob(t, group);
        const bool obs = full ? true : policy.draw_observation(t, group);
        StreamRecord rec;
        rec.t = t;
        rec.threshold = r;
        rec.true_score = score;
        rec.error = miscoverage_indicator(r, score);
        rec.observed = obs;
        rec.prob = p;
        rec.loss = quantile_loss(r, score, config.calibration.alpha);
        rec.group = group;
        records.push_back(rec);
        step(cal, make_event(obs, p, r, score, mode));
    }
    return records;
}

struct ReplicaSummary {
    Algorithm algorithm = Algorithm::imocp;
    std::uint64_t seed = 0;
    std::size_t rounds = 0;
    double miscoverage = 0.0;      // fraction of rounds with E_t = 1
    double miscoverage_gap = 0.0;  // |miscoverage - alpha|
    double cumulative_loss = 0.0;
    double regret = 0.0;
    double weighted_regret = 0.0;
    double observed_fraction = 0.0;
    double theorem1_bound = 0.0;
    double theorem2_bound = 0.0;
    double d_t = 0.0;
    double fit_a = 0.0;
    double fit_gamma = 0.0;
};

inline TheoryConstants theory_constants(const ExperimentConfig& config, std::span<const StreamRecord> records) {
    const Regularizer reg = config.regularizer();
    TheoryConstants k;
    k.L = reg.smoothness();
    k.mu = reg.mu();
    k.B = config.calibration.score_bound;
    k.p_min = 1.0;
    for (const auto& r : records) k.p_min = std::min(k.p_min, r.prob);
    k.eta_1 = config.schedule.eta(1);
    k.eta_T = config.schedule.eta(records.size());
    const auto scores = true_scores(records);
    k.D_T = max_bregman(reg, hindsight_quantile(scores, config.calibration.alpha), records);
    return k;
}

inline std::vector<double> step_sizes(const StepSchedule& s, std::size_t T) {
    std::vector<double> etas(T);
    for (std::size_t t = 1; t <= T; ++t) etas[t - 1] = s.eta(t);
    return etas;
}

inline ReplicaSummary summarize_replica(Algorithm algorithm, std::uint64_t seed, std::span<const StreamRecord> records,
                                        const ExperimentConfig& config) {
    const double alpha = config.calibration.alpha;
    MetricsAccumulator acc(false);
    std::size_t observed = 0;
    for (const auto& r : records) {
        acc.add(r);
        observed += r.observed ? 1 : 0;
    }
    ReplicaSummary s;
    s.algorithm = algorithm;
    s.seed = seed;
    s.rounds = records.size();
    s.miscoverage = acc.miscoverage();
    s.miscoverage_gap = miscoverage_rate(records, alpha);
    s.cumulative_loss = acc.cumulative_loss();
    s.regret = regret(records, alpha, false);
    s.weighted_regret = regret(records, alpha, true);
    s.observed_fraction = static_cast<double>(observed) / static_cast<double>(records.size());
    const TheoryConstants k = theory_constants(config, records);
    s.d_t = k.D_T;
    s.theorem1_bound = theorem1_bound(k, records.size());
    const auto etas = step_sizes(config.schedule, records.size());
    s.theorem2_bound = theorem2_bound(k, etas);
    const PowerLawFit fit = fit_miscoverage_decay(records, alpha);
    s.fit_a = fit.scale;
    s.fit_gamma = fit.exponent;
    return s;
}

struct ReplicaRun {
    Algorithm algorithm = Algorithm::imocp;
    std::uint64_t seed = 0;
    std::vector<StreamRecord> records;
    ReplicaSummary summary;
};

struct ExperimentResult {
    std::vector<ReplicaRun> runs;
};

// Replicas are independent; they run on `threads` workers (0 = hardware
// concurrency) and land in fixed slots, so output order never depends on
// scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const ScoreStream& stream) {
    config.validate();
    ExperimentResult result;
    for (Algorithm a : config.algorithms)
        for (std::uint64_t seed : config.seeds) result.runs.push_back({a, seed, {}, {}});

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < result.runs.size(); i = next++) {
            auto& run = result.runs[i];
            run.records = run_replica(run.algorithm, stream, config, run.seed);
            run.summary = summarize_replica(run.algorithm, run.seed, run.records, config);
        }
    };
    unsigned n = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    n = std::min<unsigned>(n, static_cast<unsigned>(result.runs.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    }
    return result;
}

inline constexpr const char* kRecordHeader =
    "t,threshold,true_score,error,observed,prob,loss,running_miscoverage,cumulative_loss,group";
inline constexpr const char* kSummaryHeader =
    "algorithm,seed,rounds,miscoverage,miscoverage_gap,cumulative_loss,regret,weighted_regret,"
    "observed_fraction,theorem1_bound,theorem2_bound,D_T,fit_A,fit_gamma";

inline void write_records_csv(std::ostream& out, std::span<const StreamRecord> records) {
    out << kRecordHeader << '\n';
    char buf[512];
    double errors = 0.0;
    double cumulative = 0.0;
    for (const auto& r : records) {
        errors += r.error ? 1.0 : 0.0;
        cumulative += r.loss;
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%d,%d,%.17g,%.17g,%.17g,%.17g,%d\n", r.t, r.threshold,
                      r.true_score, r.error ? 1 : 0, r.observed ? 1 : 0, r.prob, r.loss,
                      errors / static_cast<double>(r.t), cumulative, r.group);
        out << buf;
    }
}

inline void write_summary_row(std::ostream& out, const ReplicaSummary& s) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, "%s,%llu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  std::string(to_string(s.algorithm)).c_str(), static_cast<unsigned long long>(s.seed), s.rounds,
                  s.miscoverage, s.miscoverage_gap, s.cumulative_loss, s.regret, s.weighted_regret,
                  s.observed_fraction, s.theorem1_bound, s.theorem2_bound, s.d_t, s.fit_a, s.fit_gamma);
    out << buf;
}

inline std::string records_filename(Algorithm a, std::uint64_t seed) {
    return "records_" + std::string(to_string(a)) + "_seed" + std::to_string(seed) + ".csv";
}

// <dir>/records_<algorithm>_seed<seed>.csv per replica and <dir>/summary.csv.
inline void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& run : result.runs) {
        std::ofstream out(dir / records_filename(run.algorithm, run.seed));
        if (!out) throw std::runtime_error("cannot write to " + dir.string());
        write_records_csv(out, run.records);
    }
    std::ofstream summary(dir / "summary.csv");
    if (!summary) throw std::runtime_error("cannot write to " + dir.string());
    summary << kSummaryHeader << '\n';
    for (const auto& run : result.runs) write_summary_row(summary, run.summary);
}

}  // namespace imocp::harness
