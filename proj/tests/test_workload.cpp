#include <doctest.h>

#include <random>

#include "hetplan/workload.hpp"
#include "testutil.hpp"

using namespace hetplan;

TEST_CASE("classify follows the strict length thresholds") {
    CHECK(classify(2455, 18) == LengthLabel{InputClass::LongIn, OutputClass::ShortOut});
    CHECK(classify(496, 510) == LengthLabel{InputClass::ShortIn, OutputClass::LongOut});
    // exactly at the thresholds stays short
    CHECK(classify(512, 128) == LengthLabel{InputClass::ShortIn, OutputClass::ShortOut});
    CHECK(classify(513, 129) == LengthLabel{InputClass::LongIn, OutputClass::LongOut});
}

TEST_CASE("classification is monotone in both lengths") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> len(0, 4000);
    for (int i = 0; i < 10000; ++i) {
        const double in = len(rng), out = len(rng);
        const auto base = classify(in, out);
        const auto grown = classify(in + len(rng) / 2, out + len(rng) / 2);
        if (base.input == InputClass::LongIn) CHECK(grown.input == InputClass::LongIn);
        if (base.output == OutputClass::LongOut) CHECK(grown.output == OutputClass::LongOut);
    }
}

TEST_CASE("default class set is the nine benchmark pairs") {
    const auto classes = default_workload_classes();
    REQUIRE(classes.size() == 9);
    CHECK(classes[0].rep_input_len == 2455);
    CHECK(classes[0].rep_output_len == 510);
    CHECK(classes[8].rep_input_len == 496);
    CHECK(classes[8].rep_output_len == 18);
}

TEST_CASE("bucketing picks the quadrant-matching nearest representative") {
    const auto classes = default_workload_classes();
    // (2455, 18) quadrant long-in/short-out: candidates (2455,18) and (824,18)
    CHECK(bucket_class(2455, 18, classes) == 3);
    CHECK(bucket_class(1400, 20, classes) == 6);  // closer to 824 in log space
    CHECK(bucket_class(496, 510, classes) == 7);
    // empty quadrant falls back to the global nearest
    const std::vector<WorkloadType> skewed = {{1, 1000, 10}, {2, 2000, 10}};
    CHECK(bucket_class(100, 500, skewed) == 1);
}

TEST_CASE("ingest_trace conserves per-model counts") {
    const auto classes = default_workload_classes();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> len(1, 4000);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<RequestRecord> records;
        const int n_a = static_cast<int>(rng() % 200);
        const int n_b = static_cast<int>(rng() % 200);
        for (int i = 0; i < n_a; ++i) records.push_back({len(rng), len(rng), "a", {}});
        for (int i = 0; i < n_b; ++i) records.push_back({len(rng), len(rng), "b", {}});
        const DemandMatrix demand = ingest_trace(records, classes, {"a", "b"});
        double sum_a = 0, sum_b = 0;
        for (const auto& [key, count] : demand.f) {
            (key.first == "a" ? sum_a : sum_b) += count;
        }
        CHECK(sum_a == doctest::Approx(n_a));
        CHECK(sum_b == doctest::Approx(n_b));
    }
}

TEST_CASE("ingest_trace rejects unknown models") {
    const auto classes = default_workload_classes();
    CHECK_THROWS_WITH_AS(ingest_trace({{100, 10, "mystery", {}}}, classes, {"known"}),
                         doctest::Contains("mystery"), Error);
}

TEST_CASE("ingest splits mixed two-model traces by model") {
    const auto classes = default_workload_classes();
    std::vector<RequestRecord> records;
    for (int i = 0; i < 80; ++i) records.push_back({2455, 18, "small", {}});
    for (int i = 0; i < 20; ++i) records.push_back({2455, 18, "large", {}});
    const DemandMatrix demand = ingest_trace(records, classes, {"small", "large"});
    CHECK(demand.at("small", 3) == 80);
    CHECK(demand.at("large", 3) == 20);
}

TEST_CASE("synth_trace matches the requested ratios") {
    const auto classes = default_workload_classes();
    const std::map<int, double> trace1 = {{1, 33}, {2, 7}, {3, 8}, {4, 7}, {5, 27},
                                          {6, 6},  {7, 6}, {8, 3}, {9, 3}};
    const auto records = synth_trace(trace1, 1000, 42, "llama3-70b", classes);
    REQUIRE(records.size() == 1000);
    const DemandMatrix demand = ingest_trace(records, classes, {"llama3-70b"});
    CHECK(demand.at("llama3-70b", 1) == 330);
    CHECK(demand.at("llama3-70b", 5) == 270);
    CHECK(demand.at("llama3-70b", 9) == 30);

    const auto again = synth_trace(trace1, 1000, 42, "llama3-70b", classes);
    REQUIRE(again.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(again[i].input_len == records[i].input_len);
        CHECK(again[i].output_len == records[i].output_len);
    }

    const auto single = synth_trace({{1, 100}}, 5, 0, "m", classes);
    CHECK(single.size() == 5);
    for (const auto& r : single) CHECK(r.input_len == 2455);
}

TEST_CASE("synth_trace rejects ratios that do not sum to 100") {
    const auto classes = default_workload_classes();
    CHECK_THROWS_AS(synth_trace({{1, 60}, {2, 20}}, 10, 0, "m", classes), Error);
}

TEST_CASE("synth_trace counts stay within one of the exact share") {
    const auto classes = default_workload_classes();
    std::mt19937_64 rng(3);
    for (int iter = 0; iter < 30; ++iter) {
        std::map<int, double> ratios;
        double left = 100;
        for (int id = 1; id <= 8; ++id) {
            const unsigned span = std::max(1u, static_cast<unsigned>(left * 10));
            const double take = left > 0.5 ? static_cast<double>(rng() % span) / 10.0 : 0.0;
            ratios[id] = take;
            left -= take;
        }
        ratios[9] = left;
        const long total = 1 + static_cast<long>(rng() % 5000);
        const auto records = synth_trace(ratios, total, rng(), "m", classes);
        REQUIRE(static_cast<long>(records.size()) == total);
        const DemandMatrix demand = ingest_trace(records, classes, {"m"});
        for (const auto& [id, pct] : ratios) {
            const double exact = total * pct / 100.0;
            CHECK(std::abs(demand.at("m", id) - exact) <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("trace files round-trip") {
    const std::string path = "/tmp/hetplan_trace_test.jsonl";
    std::vector<RequestRecord> records = {{2455, 18, "m", {}}, {496, 510, "m", 1.5}};
    save_trace_file(path, records);
    const auto loaded = load_trace_file(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].input_len == 2455);
    CHECK(!loaded[0].arrival_time.has_value());
    CHECK(loaded[1].arrival_time.value() == 1.5);
}
