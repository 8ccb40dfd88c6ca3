#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "imocp/harness/config.hpp"
#include "imocp/harness/elm.hpp"
#include "imocp/harness/experiment.hpp"
#include "imocp/harness/localization.hpp"
#include "imocp/harness/synthetic.hpp"
#include "oracles.hpp"

using namespace imocp;
using namespace imocp::harness;

namespace {

std::string header_line(std::size_t waps = kAccessPoints) {
    std::string h;
    for (std::size_t i = 0; i < waps; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "WAP%03zu,", i + 1);
        h += buf;
    }
    return h + "LONGITUDE,LATITUDE,FLOOR,BUILDINGID,USERID";
}

std::string data_row(double first_rssi, double lon, double lat, int building, std::size_t waps = kAccessPoints) {
    std::ostringstream row;
    row.precision(17);
    row << first_rssi;
    for (std::size_t i = 1; i < waps; ++i) row << ",100";
    row << ',' << lon << ',' << lat << ",2," << building << ",11";
    return row.str();
}

std::vector<LocalizationSample> small_surrogate(std::vector<std::size_t> sizes, std::uint64_t seed) {
    SurrogateOptions opt;
    opt.samples_per_building = std::move(sizes);
    opt.seed = seed;
    auto s = generate_surrogate(opt);
    apply_detection_floor(s);
    return s;
}

ExperimentConfig synthetic_config(std::size_t horizon, std::vector<Algorithm> algs, double prob) {
    json j = {{"alpha", 0.1},
              {"horizon", horizon},
              {"schedule", {{"mode", "decaying"}, {"c", 0.5}}},
              {"prior", {{"kind", "triangular"}, {"mode", 0.1}}},
              {"feedback", {{"prob", prob}}},
              {"data", {{"synthetic", {{"seed", 4}, {"distribution", {{"kind", "uniform"}}}}}}},
              {"threads", 2}};
    j["algorithms"] = json::array();
    for (Algorithm a : algs) j["algorithms"].push_back(std::string(to_string(a)));
    return parse_config(j);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Synthetic, UniformQuantileConcentrates) {
    const auto scores = generate_synthetic(SyntheticSpec::iid(100000, UniformScores{0.0, 1.0}), 12);
    ASSERT_EQ(scores.size(), 100000u);
    EXPECT_NEAR(hindsight_quantile(scores, 0.1), 0.9, 0.01);
}

TEST(Synthetic, PointMass) {
    for (double s : generate_synthetic(SyntheticSpec::iid(50, PointMass{0.3}), 1)) EXPECT_EQ(s, 0.3);
}

TEST(Synthetic, ChangepointQuantileBetweenRegimes) {
    SyntheticSpec spec;
    spec.segments = {{5000, UniformScores{0.0, 0.5}}, {5000, UniformScores{0.5, 1.0}}};
    const auto scores = generate_synthetic(spec, 3);
    for (std::size_t i = 0; i < 5000; ++i) ASSERT_LE(scores[i], 0.5);
    for (std::size_t i = 5000; i < 10000; ++i) ASSERT_GE(scores[i], 0.5);
    const double q = hindsight_quantile(scores, 0.1);
    // brute force: the pinball sum is piecewise linear with kinks at the scores
    double best = std::numeric_limits<double>::infinity(), arg = 0.0;
    auto sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); i += 1) {
        const double v = oracle::pinball_sum(sorted[i], scores, 0.1);
        if (v < best) best = v, arg = sorted[i];
    }
    EXPECT_EQ(q, arg);
    EXPECT_GT(q, 0.5);
    EXPECT_LT(q, 1.0);
}

TEST(Synthetic, PriorFamilyAndDeterminism) {
    const auto spec = SyntheticSpec::iid(2000, PriorScores{Prior::triangular(0.1, 1.0)});
    const auto a = generate_synthetic(spec, 8), b = generate_synthetic(spec, 8), c = generate_synthetic(spec, 9);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (double s : a) {
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
    EXPECT_THROW(generate_synthetic(SyntheticSpec{}, 1), ValidationError);
    EXPECT_THROW(generate_synthetic(SyntheticSpec::iid(10, UniformScores{0.6, 0.2}), 1), ValidationError);
}

TEST(Loader, HeaderOnly) {
    std::istringstream in(header_line() + "\n");
    EXPECT_TRUE(read_ujiindoorloc(in).empty());
}

TEST(Loader, SentinelAndColumns) {
    std::istringstream in(header_line() + "\n" + data_row(-70, -7600.5, 4864950.25, 1) + "\n" +
                          data_row(100, -7500, 4864900, 2) + "\n");
    const auto s = read_ujiindoorloc(in);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].rssi.size(), kAccessPoints);
    EXPECT_EQ(s[0].rssi[0], -70.0);
    EXPECT_EQ(s[0].rssi[1], -105.0);
    EXPECT_EQ(s[1].rssi[0], -105.0);
    EXPECT_EQ(s[0].longitude, -7600.5);
    EXPECT_EQ(s[0].latitude, 4864950.25);
    EXPECT_EQ(s[0].building_id, 1);
    EXPECT_EQ(s[1].building_id, 2);

    std::istringstream floor_in(header_line() + "\n" + data_row(100, 0, 0, 0) + "\n");
    EXPECT_EQ(read_ujiindoorloc(floor_in, -110.0)[0].rssi[0], -110.0);
}

TEST(Loader, ShortRowNamesTheRow) {
    std::istringstream in(header_line() + "\n" + data_row(-70, 0, 0, 0) + "\n" + data_row(-70, 0, 0, 0, 519) + "\n");
    try {
        read_ujiindoorloc(in);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }
}

TEST(Loader, MissingColumn) {
    std::istringstream in(header_line(519) + "\n");
    try {
        read_ujiindoorloc(in);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("WAP520"), std::string::npos) << e.what();
    }
}

TEST(Loader, BadValues) {
    std::string row = data_row(-70, 0, 0, 0);
    std::istringstream bad_number(header_line() + "\n" + "abc" + row.substr(row.find(',')) + "\n");
    EXPECT_THROW(read_ujiindoorloc(bad_number), ParseError);
    std::istringstream bad_building(header_line() + "\n" + data_row(-70, 0, 0, 5) + "\n");
    EXPECT_THROW(read_ujiindoorloc(bad_building), ParseError);
}

TEST(Loader, RoundTripsSurrogate) {
    SurrogateOptions opt;
    opt.samples_per_building = {5, 5, 5};
    const auto raw = generate_surrogate(opt);
    std::stringstream buf;
    write_ujiindoorloc(buf, raw);
    const auto back = read_ujiindoorloc(buf);
    ASSERT_EQ(back.size(), raw.size());
    auto expected = raw;
    apply_detection_floor(expected);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        EXPECT_EQ(back[i].rssi, expected[i].rssi);
        EXPECT_EQ(back[i].building_id, raw[i].building_id);
        EXPECT_NEAR(back[i].longitude, raw[i].longitude, 1e-5);
    }
}

TEST(FeatureScaler, MinMaxFromTraining) {
    std::vector<LocalizationSample> train(2);
    train[0].rssi = {-100, -50, -70};
    train[1].rssi = {-60, -50, -90};
    const auto scaler = FeatureScaler::fit(train);
    LocalizationSample x;
    x.rssi = {-80, -40, -100};
    scaler.apply(x);
    EXPECT_DOUBLE_EQ(x.rssi[0], 0.5);
    EXPECT_DOUBLE_EQ(x.rssi[1], 0.0);  // constant in training
    EXPECT_DOUBLE_EQ(x.rssi[2], -0.5);
}

TEST(Elm, ConstantTargetsAreFit) {
    auto samples = small_surrogate({40, 40, 40}, 5);
    const auto scaler = FeatureScaler::fit(samples);
    for (auto& s : samples) {
        scaler.apply(s);
        s.longitude = 3.0;
        s.latitude = -2.0;
    }
    const auto model = train_elm(samples, 256, 1e-9, 1);
    for (const auto& s : samples) {
        const auto p = model.predict(s);
        EXPECT_NEAR(p(0), 3.0, 1e-6);
        EXPECT_NEAR(p(1), -2.0, 1e-6);
    }
}

TEST(Elm, HugeRidgeShrinksToZero) {
    auto samples = small_surrogate({20, 20, 20}, 5);
    const auto scaler = FeatureScaler::fit(samples);
    for (auto& s : samples) {
        scaler.apply(s);
        s.longitude = 1.0;
        s.latitude = 1.0;
    }
    const auto model = train_elm(samples, 64, 1e14, 1);
    EXPECT_LT(model.output_weights.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(std::abs(model.predict(samples[0])(0)), 1e-8);
}

TEST(Elm, DeterministicGivenSeed) {
    auto samples = small_surrogate({30, 30, 30}, 6);
    const auto scaler = FeatureScaler::fit(samples);
    for (auto& s : samples) scaler.apply(s);
    const auto a = train_elm(samples, 32, 1e-3, 4), b = train_elm(samples, 32, 1e-3, 4), c = train_elm(samples, 32, 1e-3, 5);
    EXPECT_EQ(a.input_weights, b.input_weights);
    EXPECT_EQ(a.output_weights, b.output_weights);
    EXPECT_NE(a.input_weights, c.input_weights);
    EXPECT_LE(a.input_weights.maxCoeff(), 1.0);
    EXPECT_GE(a.input_weights.minCoeff(), -1.0);
    EXPECT_THROW(train_elm({}, 32, 1e-3, 1), ValidationError);
    EXPECT_THROW(train_elm(samples, 32, 0.0, 1), ValidationError);
}

TEST(Elm, BeatsMeanBaselineOnHeldOutSplit) {
    auto samples = small_surrogate({500, 500, 500}, 21);
    rng::CounterEngine eng(21, 99);
    std::shuffle(samples.begin(), samples.end(), eng);
    std::vector<LocalizationSample> train(samples.begin(), samples.end() - 500);
    std::vector<LocalizationSample> test(samples.end() - 500, samples.end());
    double lon0 = 0.0;
    for (const auto& s : train) lon0 += s.longitude;
    lon0 /= static_cast<double>(train.size());
    for (auto& s : train) s.longitude -= lon0;
    for (auto& s : test) s.longitude -= lon0;
    const auto scaler = FeatureScaler::fit(train);
    for (auto& s : train) scaler.apply(s);
    for (auto& s : test) scaler.apply(s);
    const auto model = train_elm(train, 256, 1e-3, 7);
    double elm = 0.0, baseline = 0.0;
    for (const auto& s : test) {
        elm += std::abs(s.longitude - model.predict(s)(0));
        baseline += std::abs(s.longitude);  // training mean is 0 after centering
    }
    EXPECT_LT(elm, baseline);
    EXPECT_LT(elm, 0.5 * baseline);
}

TEST(ResidualScore, Scaling) {
    ElmModel zero;
    zero.input_weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kAccessPoints), 4);
    zero.hidden_bias = Eigen::VectorXd::Zero(4);
    zero.output_weights = Eigen::MatrixXd::Zero(4, 2);
    LocalizationSample s;
    s.rssi.assign(kAccessPoints, 0.0);
    s.longitude = 0.0;
    EXPECT_EQ(residual_score(zero, s, 2.5), 0.0);
    s.longitude = -2.5;
    EXPECT_EQ(residual_score(zero, s, 2.5), 1.0);
    s.longitude = 2.6;
    EXPECT_THROW(residual_score(zero, s, 2.5), ValidationError);
    s.latitude = 1.0;
    EXPECT_DOUBLE_EQ(residual_score(zero, s, 2.0, Coordinate::latitude), 0.5);
}

TEST(Config, ParsesAndRejects) {
    const auto c = synthetic_config(100, {Algorithm::imocp, Algorithm::ibaci}, 0.4);
    EXPECT_EQ(c.calibration.horizon, 100u);
    EXPECT_EQ(c.algorithms.size(), 2u);
    EXPECT_EQ(c.prior.kind, "triangular");
    EXPECT_EQ(c.feedback_probs, std::vector<double>{0.4});

    json base = {{"horizon", 10}, {"data", {{"synthetic", {{"distribution", {{"kind", "point"}, {"value", 0.3}}}}}}}};
    EXPECT_NO_THROW(parse_config(base));
    auto bad = base;
    bad["alpha"] = 1.5;
    EXPECT_THROW(parse_config(bad), ValidationError);
    bad = base;
    bad["algorithms"] = {"foo"};
    EXPECT_THROW(parse_config(bad), ValidationError);
    bad = base;
    bad["feedback"] = {{"prob", 0.0}};
    EXPECT_THROW(parse_config(bad), ValidationError);
    bad = base;
    bad["algorithms"] = {"baci"};
    bad["schedule"] = {{"mode", "decaying"}, {"c", 1.0}};
    EXPECT_THROW(parse_config(bad), StepSizeError);
    bad = base;
    bad["prior"] = {{"kind", "cauchy"}};
    EXPECT_THROW(parse_config(bad), ValidationError);
    bad = base;
    bad["horizon"] = "ten";
    EXPECT_THROW(parse_config(bad), ValidationError);
    EXPECT_THROW(parse_config(json::object()), ValidationError);
    bad = base;
    bad["data"]["synthetic"]["distribution"] = {{"kind", "point"}, {"value", 3.0}};
    const auto cfg = parse_config(bad);
    EXPECT_THROW(build_stream(cfg), ValidationError);  // score outside [0, B]
}

TEST(Config, Seeds) {
    EXPECT_EQ(parse_seeds(std::string("3")), (std::vector<std::uint64_t>{1, 2, 3}));
    EXPECT_EQ(parse_seeds(std::string("4,9")), (std::vector<std::uint64_t>{4, 9}));
    EXPECT_THROW(parse_seeds(json(0)), ValidationError);
}

TEST(Config, GroupsMustBeCovered) {
    auto c = parse_config(json{{"horizon", 300},
                               {"feedback", {{"probs", {0.5, 0.3}}}},
                               {"data", {{"surrogate", {{"samples_per_building", {200, 200, 200}},
                                                        {"train_per_building", {100, 100, 100}}}}}}});
    EXPECT_THROW(build_stream(c), ValidationError);
}

TEST(Experiment, CsvRowCount) {
    auto config = synthetic_config(10, {Algorithm::imocp}, 1.0);
    const auto stream = build_stream(config);
    const auto result = run_experiment(config, stream);
    ASSERT_EQ(result.runs.size(), 1u);
    std::stringstream out;
    write_records_csv(out, result.runs[0].records);
    std::string line;
    std::getline(out, line);
    EXPECT_EQ(line, kRecordHeader);
    std::size_t rows = 0;
    while (std::getline(out, line)) ++rows;
    EXPECT_EQ(rows, 10u);
}

TEST(Experiment, RecordsAreConsistent) {
    auto config = synthetic_config(500, {Algorithm::imocp, Algorithm::iaci, Algorithm::ibaci, Algorithm::aci}, 0.3);
    config.seeds = {1, 2};
    const auto stream = build_stream(config);
    const auto result = run_experiment(config, stream);
    for (const auto& run : result.runs) {
        ASSERT_EQ(run.records.size(), 500u);
        for (std::size_t i = 0; i < run.records.size(); ++i) {
            const auto& r = run.records[i];
            ASSERT_EQ(r.t, i + 1);
            ASSERT_EQ(r.true_score, stream.scores[i]);
            ASSERT_EQ(r.error, miscoverage_indicator(r.threshold, r.true_score));
            ASSERT_EQ(r.loss, quantile_loss(r.threshold, r.true_score, 0.1));
            if (requires_full_feedback(run.algorithm)) {
                ASSERT_TRUE(r.observed);
                ASSERT_EQ(r.prob, 1.0);
            } else {
                ASSERT_EQ(r.prob, 0.3);
            }
        }
    }
}

TEST(Experiment, EndToEndDeterminism) {
    auto config = synthetic_config(300, {Algorithm::imocp, Algorithm::ibaci}, 0.5);
    config.seeds = {3, 4, 5};
    const auto dir = std::filesystem::temp_directory_path() / "imocp_determinism";
    std::filesystem::remove_all(dir);
    for (int run = 0; run < 2; ++run) {
        config.threads = run == 0 ? 1 : 3;
        const auto stream = build_stream(config);
        write_outputs(run_experiment(config, stream), dir / std::to_string(run));
    }
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir / "0")) {
        ++files;
        EXPECT_EQ(slurp(entry.path()), slurp(dir / "1" / entry.path().filename())) << entry.path();
    }
    EXPECT_EQ(files, 7u);
    std::filesystem::remove_all(dir);
}

TEST(Experiment, SummaryWithinMiscoverageBound) {
    auto config = synthetic_config(2000, {Algorithm::imocp}, 0.5);
    config.seeds = parse_seeds(json(20));
    const auto stream = build_stream(config);
    const auto result = run_experiment(config, stream);
    std::vector<double> gaps;
    for (const auto& run : result.runs) gaps.push_back(run.summary.miscoverage_gap);
    const auto s = summarize(gaps);
    const double bound = result.runs[0].summary.theorem1_bound;
    EXPECT_LE(s.mean, bound + 3.0 * s.std_error);
}

TEST(Experiment, LocalizationFeedbackRatesPerBuilding) {
    const auto config = load_config(IMOCP_SOURCE_DIR "/configs/localization_surrogate.json");
    const auto stream = build_stream(config);
    ASSERT_TRUE(stream.dataset);
    EXPECT_EQ(stream.scores.size(), 2400u);
    for (double s : stream.scores) {
        ASSERT_GE(s, 0.0);
        ASSERT_LE(s, 1.0);
    }
    std::map<int, std::pair<double, double>> counts;  // group -> (observed, rounds)
    for (std::uint64_t seed : config.seeds) {
        const auto policy = feedback_policy(config, seed);
        for (std::size_t i = 0; i < stream.scores.size(); ++i) {
            auto& c = counts[stream.groups[i]];
            c.first += policy.draw_observation(i + 1, stream.groups[i]) ? 1.0 : 0.0;
            c.second += 1.0;
        }
    }
    ASSERT_EQ(counts.size(), 3u);
    const double p[3] = {0.5, 0.3, 0.1};
    for (const auto& [g, c] : counts) {
        const double rate = c.first / c.second;
        const double se = std::sqrt(p[g] * (1.0 - p[g]) / c.second);
        EXPECT_NEAR(rate, p[g], 3.0 * se) << "building " << g;
    }
}
