// imocp: run online calibration experiments, print theoretical bounds, or
// validate a configuration.
//
//   imocp run      --config exp.json [--seeds 20 | --seeds 1,2,3] [--out dir] [--algorithms imocp,iaci]
//   imocp bounds   --config exp.json
//   imocp validate --config exp.json

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "imocp/harness/config.hpp"
#include "imocp/harness/experiment.hpp"
#include "imocp/metrics.hpp"

namespace {

using namespace imocp;
using namespace imocp::harness;

struct Overrides {
    std::string config;
    std::string seeds;
    std::string out;
    std::string algorithms;
};

ExperimentConfig load_with_overrides(const Overrides& o) {
    ExperimentConfig c = load_config(o.config);
    if (!o.seeds.empty()) c.seeds = parse_seeds(o.seeds);
    if (!o.out.empty()) c.output_dir = o.out;
    if (!o.algorithms.empty()) {
        c.algorithms.clear();
        std::stringstream in(o.algorithms);
        std::string name;
        while (std::getline(in, name, ','))
            if (!name.empty()) c.algorithms.push_back(parse_algorithm(name));
    }
    c.validate();
    return c;
}

void print_stream_info(const ScoreStream& stream) {
    std::printf("stream: %zu rounds, B = %g\n", stream.scores.size(), stream.score_bound);
    if (stream.dataset) {
        const auto& d = *stream.dataset;
        std::printf("data: %s, train %zu, calibration %zu, test pools %zu/%zu/%zu, raw residual bound %.6g, "
                    "%zu test samples above bound left out\n",
                    d.surrogate ? "synthetic surrogate" : "dataset", d.train_size, d.calibration_size,
                    d.test_pool[0], d.test_pool[1], d.test_pool[2], d.raw_bound, d.dropped_above_bound);
    }
}

int cmd_run(const Overrides& o) {
    const ExperimentConfig config = load_with_overrides(o);
    const ScoreStream stream = build_stream(config);
    print_stream_info(stream);
    const ExperimentResult result = run_experiment(config, stream);
    write_outputs(result, config.output_dir);

    std::map<Algorithm, std::vector<ReplicaSummary>> by_alg;
    for (const auto& run : result.runs) by_alg[run.algorithm].push_back(run.summary);
    std::printf("%-6s %6s %22s %22s %22s %12s\n", "alg", "seeds", "miscoverage", "cumulative loss", "regret",
                "thm1 bound");
    for (const auto& [alg, rows] : by_alg) {
        std::vector<double> mis, loss, reg, t1;
        for (const auto& s : rows) {
            mis.push_back(s.miscoverage);
            loss.push_back(s.cumulative_loss);
            reg.push_back(s.regret);
            t1.push_back(s.theorem1_bound);
        }
        const auto m = summarize(mis), l = summarize(loss), r = summarize(reg), b = summarize(t1);
        std::printf("%-6s %6zu %12.5f ± %-7.5f %12.4f ± %-7.4f %12.4f ± %-7.4f %12.5f\n",
                    std::string(to_string(alg)).c_str(), rows.size(), m.mean, m.std_error, l.mean, l.std_error,
                    r.mean, r.std_error, b.mean);
    }
    std::printf("wrote %s/summary.csv and %zu record files\n", config.output_dir.c_str(), result.runs.size());
    return 0;
}

// A-priori bounds: D_T is replaced by its bound (L/2)(B + ϖ/μ)^2 from the
// iterate containment interval, with ϖ = η_1 / p_min.
int cmd_bounds(const Overrides& o) {
    const ExperimentConfig config = load_with_overrides(o);
    const Regularizer reg = config.regularizer();
    const std::size_t T = config.calibration.horizon;
    TheoryConstants k;
    k.L = reg.smoothness();
    k.mu = reg.mu();
    k.B = config.calibration.score_bound;
    k.p_min = *std::min_element(config.feedback_probs.begin(), config.feedback_probs.end());
    k.eta_1 = config.schedule.eta(1);
    k.eta_T = config.schedule.eta(T);
    const double varpi = k.eta_1 / k.p_min;
    k.D_T = 0.5 * k.L * std::pow(k.B + varpi / k.mu, 2);
    const auto etas = step_sizes(config.schedule, T);
    const auto rates = corollary1_rates(config.schedule.beta);

    std::printf("prior %s, sigma %g, alpha %g, B %g, T %zu\n", reg.prior().name().c_str(), reg.sigma(),
                config.calibration.alpha, k.B, T);
    std::printf("mu %.6g  L %.6g  p_min %.6g  eta_1 %.6g  eta_T %.6g\n", k.mu, k.L, k.p_min, k.eta_1, k.eta_T);
    std::printf("iterate interval  [%.6g, %.6g]\n", -config.calibration.alpha * varpi / k.mu,
                k.B + (1.0 - config.calibration.alpha) * varpi / k.mu);
    std::printf("miscoverage bound %.6g\n", theorem1_bound(k, T));
    std::printf("regret bound      %.6g (D_T <= %.6g)\n", theorem2_bound(k, etas), k.D_T);
    std::printf("rates: miscoverage T^-%.3g, regret T^%.3g\n", rates.gamma, rates.regret_exponent);
    return 0;
}

int cmd_validate(const Overrides& o) {
    const ExperimentConfig config = load_with_overrides(o);
    std::printf("config ok: %zu algorithm(s), %zu seed(s), T = %zu\n", config.algorithms.size(),
                config.seeds.size(), config.calibration.horizon);
    const ScoreStream stream = build_stream(config);
    print_stream_info(stream);
    std::printf("stream ok\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online conformal calibration under intermittent feedback"};
    app.require_subcommand(1);
    Overrides o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seeds", o.seeds, "seed count n (1..n) or comma-separated list");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--algorithms", o.algorithms, "comma-separated subset of aci,iaci,baci,ibaci,imocp");
    };
    auto* run = app.add_subcommand("run", "run the experiment and write CSV output");
    auto* bounds = app.add_subcommand("bounds", "print the miscoverage and regret bounds for a config");
    auto* validate = app.add_subcommand("validate", "check a config and its data source");
    add_common(run);
    add_common(bounds);
    add_common(validate);

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(o);
        if (bounds->parsed()) return cmd_bounds(o);
        if (validate->parsed()) return cmd_validate(o);
    } catch (const ValidationError& e) {
        std::cerr << "invalid: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
