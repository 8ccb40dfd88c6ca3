#pragma once

// Experiment configuration, read from a JSON document. Schema (all keys
// optional unless noted):
//
//   algorithms   ["imocp", "iaci", "ibaci", "aci", "baci"]       default ["imocp"]
//   alpha        target miscoverage                                default 0.1
//   score_bound  B                                                 default 1 (forced to 1 for dataset data)
//   r_init       initial threshold                                 default 1 - alpha
//   horizon      T (required for synthetic data without segments)
//   schedule     {"mode": "fixed"|"decaying", "c": 0.1, "beta": 0.5}
//   prior        {"kind": "uniform"} | {"kind": "triangular", "mode": m}
//                | {"kind": "truncated_gaussian", "mean": m, "variance": v}
//   sigma        regularizer curvature                             default 0.5
//   mirror       {"tolerance": 1e-12, "max_iterations": 200}
//   feedback     {"prob": p} | {"probs": [p0, p1, ...]} (per group) | {"per_round": [...]}
//   data         {"synthetic": {"seed": s, "distribution": D} |
//                              {"seed": s, "segments": [{"length": n, "distribution": D}, ...]}}
//                | {"dataset": {"path": "...", ...DatasetOptions}}
//                | {"surrogate": {"seed": s, "samples_per_building": [..], ...DatasetOptions}}
//                D = {"kind": "uniform", "lo": a, "hi": b} | {"kind": "point", "value": v}
//                    | any prior object (support taken from score_bound)
//   seeds        n (meaning 1..n) or [s1, s2, ...]                 default 1
//   output       output directory                                  default "out"
//   threads      worker threads for replicas                        default hardware concurrency

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "imocp/calibrators.hpp"
#include "imocp/core.hpp"
#include "imocp/harness/elm.hpp"
#include "imocp/harness/localization.hpp"
#include "imocp/harness/synthetic.hpp"
#include "imocp/prior.hpp"

namespace imocp::harness {

using json = nlohmann::json;

struct DatasetOptions {
    std::string path;  // empty means the synthetic surrogate
    SurrogateOptions surrogate;
    std::vector<std::size_t> train_per_building = {1000, 2000, 8000};
    double calibration_fraction = 0.5;  // of the non-training samples
    double bound_quantile = 0.995;
    double floor_dbm = -105.0;
    std::size_t hidden = 256;
    double ridge = 1e-3;
    Coordinate coordinate = Coordinate::longitude;
    std::uint64_t seed = 7;  // split, stream order and ELM weights
};

struct DataSource {
    std::optional<SyntheticSpec> synthetic;
    std::uint64_t synthetic_seed = 1;
    std::optional<DatasetOptions> dataset;
};

struct PriorSpec {
    std::string kind = "uniform";
    double mode = 0.1;
    double mean = 0.1;
    double variance = 2.0;

    Prior make(double bound) const {
        if (kind == "uniform") return Prior::uniform(bound);
        if (kind == "triangular") return Prior::triangular(mode, bound);
        if (kind == "truncated_gaussian") return Prior::truncated_gaussian(mean, variance, bound);
        throw ValidationError("unknown prior kind '" + kind + "'");
    }
};

struct ExperimentConfig {
    std::vector<Algorithm> algorithms = {Algorithm::imocp};
    CalibrationConfig calibration;
    StepSchedule schedule = StepSchedule::decaying(0.1);
    PriorSpec prior;
    double sigma = 0.5;
    double mirror_tolerance = 1e-12;
    int mirror_max_iterations = 200;
    std::vector<double> feedback_probs = {1.0};
    bool feedback_per_round = false;
    DataSource data;
    std::vector<std::uint64_t> seeds = {1};
    std::string output_dir = "out";
    unsigned threads = 0;

    Regularizer regularizer() const {
        return Regularizer(prior.make(calibration.score_bound), sigma, calibration.alpha);
    }

    void validate() const {
        calibration.validate();
        schedule.validate();
        if (algorithms.empty()) throw ValidationError("no algorithms selected");
        if (seeds.empty()) throw ValidationError("no seeds");
        (void)regularizer();
        for (double p : feedback_probs)
            if (!(p > 0.0 && p <= 1.0)) throw ValidationError("feedback probabilities must lie in (0,1]");
        if (feedback_per_round && feedback_probs.size() < calibration.horizon)
            throw ValidationError("per-round feedback probabilities shorter than the horizon");
        if (!data.synthetic && !data.dataset) throw ValidationError("config has no data source");
        for (Algorithm a : algorithms)
            if (feedback_mode(a) == FeedbackMode::score && !(schedule.eta(1) < 1.0))
                throw StepSizeError("B-ACI variants need η_t < 1");
    }
};

inline std::vector<std::uint64_t> parse_seeds(const json& j) {
    std::vector<std::uint64_t> seeds;
    if (j.is_number_unsigned() || j.is_number_integer()) {
        const auto n = j.get<std::int64_t>();
        if (n < 1) throw ValidationError("seed count must be positive");
        for (std::int64_t i = 1; i <= n; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
    } else if (j.is_array()) {
        for (const auto& s : j) seeds.push_back(s.get<std::uint64_t>());
    } else {
        throw ValidationError("seeds must be a count or a list");
    }
    return seeds;
}

// "5" -> 1..5, "3,9,11" -> {3,9,11}
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    if (text.find(',') == std::string::npos) return parse_seeds(json(std::stoll(text)));
    json list = json::array();
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(',', start), text.size());
        list.push_back(std::stoull(text.substr(start, end - start)));
        start = end + 1;
    }
    return parse_seeds(list);
}

inline PriorSpec parse_prior(const json& j) {
    PriorSpec p;
    p.kind = j.value("kind", std::string("uniform"));
    p.mode = j.value("mode", p.mode);
    p.mean = j.value("mean", p.mean);
    p.variance = j.value("variance", p.variance);
    return p;
}

inline ScoreDistribution parse_distribution(const json& j, double bound) {
    const std::string kind = j.value("kind", std::string("uniform"));
    if (kind == "uniform" && (j.contains("lo") || j.contains("hi")))
        return UniformScores{j.value("lo", 0.0), j.value("hi", bound)};
    if (kind == "uniform") return UniformScores{0.0, bound};
    if (kind == "point") return PointMass{j.at("value").get<double>()};
    return PriorScores{parse_prior(j).make(bound)};
}

inline DatasetOptions parse_dataset_options(const json& j) {
    DatasetOptions d;
    d.path = j.value("path", std::string());
    if (j.contains("samples_per_building"))
        d.surrogate.samples_per_building = j["samples_per_building"].get<std::vector<std::size_t>>();
    d.surrogate.seed = j.value("surrogate_seed", d.surrogate.seed);
    if (j.contains("train_per_building"))
        d.train_per_building = j["train_per_building"].get<std::vector<std::size_t>>();
    d.calibration_fraction = j.value("calibration_fraction", d.calibration_fraction);
    d.bound_quantile = j.value("bound_quantile", d.bound_quantile);
    d.floor_dbm = j.value("floor_dbm", d.floor_dbm);
    d.hidden = j.value("hidden", d.hidden);
    d.ridge = j.value("ridge", d.ridge);
    d.seed = j.value("seed", d.seed);
    const std::string coord = j.value("coordinate", std::string("longitude"));
    if (coord == "longitude")
        d.coordinate = Coordinate::longitude;
    else if (coord == "latitude")
        d.coordinate = Coordinate::latitude;
    else
        throw ValidationError("coordinate must be longitude or latitude");
    if (!(d.calibration_fraction > 0.0 && d.calibration_fraction < 1.0))
        throw ValidationError("calibration_fraction must lie in (0,1)");
    if (!(d.bound_quantile > 0.0 && d.bound_quantile <= 1.0))
        throw ValidationError("bound_quantile must lie in (0,1]");
    return d;
}

inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    try {
        if (j.contains("algorithms")) {
            c.algorithms.clear();
            for (const auto& a : j["algorithms"]) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
        }
        c.calibration.alpha = j.value("alpha", 0.1);
        c.calibration.score_bound = j.value("score_bound", 1.0);
        if (j.contains("r_init")) c.calibration.r_init = j["r_init"].get<double>();
        c.calibration.horizon = j.value("horizon", std::size_t{0});

        if (j.contains("data")) {
            const auto& d = j["data"];
            if (d.contains("synthetic")) {
                const auto& s = d["synthetic"];
                c.data.synthetic_seed = s.value("seed", std::uint64_t{1});
                SyntheticSpec spec;
                if (s.contains("segments")) {
                    for (const auto& seg : s["segments"])
                        spec.segments.push_back({seg.at("length").get<std::size_t>(),
                                                 parse_distribution(seg.at("distribution"), c.calibration.score_bound)});
                } else {
                    if (c.calibration.horizon == 0) throw ValidationError("synthetic data needs a horizon");
                    spec = SyntheticSpec::iid(c.calibration.horizon,
                                              parse_distribution(s.value("distribution", json::object()),
                                                                 c.calibration.score_bound));
                }
                if (c.calibration.horizon == 0) c.calibration.horizon = spec.length();
                if (spec.length() != c.calibration.horizon)
                    throw ValidationError("synthetic segments do not add up to the horizon");
                c.data.synthetic = std::move(spec);
            } else if (d.contains("dataset") || d.contains("surrogate")) {
                const bool real = d.contains("dataset");
                DatasetOptions opt = parse_dataset_options(real ? d["dataset"] : d["surrogate"]);
                if (real && opt.path.empty()) throw ValidationError("dataset source needs a path");
                if (!real) opt.path.clear();
                c.data.dataset = std::move(opt);
                c.calibration.score_bound = 1.0;  // scores are normalized by the fitted bound
                if (c.calibration.horizon == 0) c.calibration.horizon = 2400;
            }
        }

        if (j.contains("schedule")) {
            const auto& s = j["schedule"];
            const std::string mode = s.value("mode", std::string("decaying"));
            if (mode == "fixed")
                c.schedule.mode = StepSchedule::Mode::fixed;
            else if (mode == "decaying")
                c.schedule.mode = StepSchedule::Mode::decaying;
            else
                throw ValidationError("schedule mode must be fixed or decaying");
            c.schedule.c = s.value("c", c.schedule.c);
            c.schedule.beta = s.value("beta", c.schedule.beta);
        }
        c.schedule.horizon = c.calibration.horizon;
        if (j.contains("prior")) c.prior = parse_prior(j["prior"]);
        c.sigma = j.value("sigma", c.sigma);
        if (j.contains("mirror")) {
            c.mirror_tolerance = j["mirror"].value("tolerance", c.mirror_tolerance);
            c.mirror_max_iterations = j["mirror"].value("max_iterations", c.mirror_max_iterations);
        }
        if (j.contains("feedback")) {
            const auto& f = j["feedback"];
            if (f.contains("per_round")) {
                c.feedback_probs = f["per_round"].get<std::vector<double>>();
                c.feedback_per_round = true;
            } else if (f.contains("probs")) {
                c.feedback_probs = f["probs"].get<std::vector<double>>();
            } else {
                c.feedback_probs = {f.value("prob", 1.0)};
            }
        }
        if (j.contains("seeds")) c.seeds = parse_seeds(j["seeds"]);
        c.output_dir = j.value("output", c.output_dir);
        c.threads = j.value("threads", 0u);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return parse_config(j);
}

}  // namespace imocp::harness
