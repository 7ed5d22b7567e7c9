#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "hetplan/simulator.hpp"
#include "hetplan/solver.hpp"
#include "testutil.hpp"

using namespace hetplan;
using hetplan::testutil::load_golden;
using hetplan::testutil::make_fuzz_instance;

namespace {

std::vector<ActiveReplica> actives(const testutil::GoldenInstance& g,
                                   const std::map<std::string, int>& counts) {
    std::vector<ActiveReplica> result;
    for (const auto& [id, count] : counts) result.push_back({&g.config(id), count});
    return result;
}

}  // namespace

TEST_CASE("proportional assignment reproduces the composition golden values") {
    const auto g = load_golden();
    // one replica each of the three types
    const auto comp1 = proportional_assign(
        actives(g, {{"toy|t1:tp1:L1", 1}, {"toy|t2:tp1:L1", 1}, {"toy|t3:tp1:L1", 1}}), g.table,
        g.demand);
    CHECK(comp1.makespan == doctest::Approx(44.05).epsilon(0.0003));

    // one t1 plus two t2 replicas
    const auto comp2 = proportional_assign(
        actives(g, {{"toy|t1:tp1:L1", 1}, {"toy|t2:tp1:L1", 2}}), g.table, g.demand);
    CHECK(comp2.makespan == doctest::Approx(35.24).epsilon(0.0003));

    // t1 plus the TP pair on the two t2 units
    const auto tp = proportional_assign(
        actives(g, {{"toy|t1:tp1:L1", 1}, {"toy|t2:tp2:L1", 1}}), g.table, g.demand);
    CHECK(tp.makespan == doctest::Approx(30.94).epsilon(0.0003));
}

TEST_CASE("inner_assign solves the fixed-activation LP exactly") {
    const auto g = load_golden();

    SUBCASE("single replica, single class") {
        DemandMatrix demand;
        demand.f[{"toy", 1}] = 100;
        const auto a = inner_assign(actives(g, {{"toy|t1:tp1:L1", 1}}), g.table, demand);
        CHECK(a.makespan == doctest::Approx(100.0 / 1.0));  // f / (y*h)
        CHECK(a.x.at({"toy|t1:tp1:L1", "toy", 1}) == doctest::Approx(1.0));
    }

    SUBCASE("two identical replicas split a class evenly") {
        DemandMatrix demand;
        demand.f[{"toy", 1}] = 100;
        const auto a = inner_assign(actives(g, {{"toy|t2:tp1:L1", 2}}), g.table, demand);
        CHECK(a.makespan == doctest::Approx(100.0 / (2 * 0.9)));
    }

    SUBCASE("the optimized two-replica assignment beats the hand split") {
        // t1 takes all of w2 plus the balancing share of w1; the optimum of
        // this instance is 1450/51, slightly below the rounded 15%/85% split
        // whose makespan is 86/3.
        const auto a = inner_assign(actives(g, {{"toy|t1:tp1:L1", 1}, {"toy|t2:tp2:L1", 1}}),
                                    g.table, g.demand);
        CHECK(a.makespan == doctest::Approx(1450.0 / 51.0).epsilon(1e-9));
        CHECK(a.x.at({"toy|t1:tp1:L1", "toy", 2}) == doctest::Approx(1.0));
        CHECK(a.x.at({"toy|t1:tp1:L1", "toy", 1}) == doctest::Approx(5.0 / 34.0));
        CHECK(a.x.at({"toy|t2:tp2:L1", "toy", 1}) == doctest::Approx(29.0 / 34.0));
    }

    SUBCASE("unservable classes are reported by name") {
        DemandMatrix demand;
        demand.f[{"toy", 1}] = 10;
        demand.f[{"toy", 7}] = 10;  // no rates exist for class 7
        CHECK_THROWS_WITH_AS(
            inner_assign(actives(g, {{"toy|t1:tp1:L1", 1}}), g.table, demand),
            doctest::Contains("w7"), Error);
    }
}

TEST_CASE("solve_exact finds the golden instance optimum") {
    const auto g = load_golden();
    const SolveResult result = solve_exact(g.configs, g.table, g.demand, g.bundle.budget,
                                           g.bundle.availability, {});
    REQUIRE(result.plan.has_value());
    CHECK(result.status == SolveStatus::Optimal);
    // t1 solo plus the TP pair, optimally balanced
    CHECK(result.plan->makespan == doctest::Approx(1450.0 / 51.0).epsilon(1e-9));
    CHECK(result.plan->activations.at("toy|t1:tp1:L1") == 1);
    CHECK(result.plan->activations.at("toy|t2:tp2:L1") == 1);
    CHECK(result.plan->assignment.at({"toy|t1:tp1:L1", "toy", 2}) == doctest::Approx(1.0));
    CHECK(result.plan->assignment.at({"toy|t2:tp2:L1", "toy", 1}) >= 0.80);
    CHECK(result.plan->total_cost == doctest::Approx(8.0));
    CHECK(validate_plan(*result.plan, g.configs, g.table, g.demand, g.bundle.budget,
                        g.bundle.availability)
              .empty());
}

TEST_CASE("solve_exact reports infeasibility with the binding constraint") {
    const auto g = load_golden();
    const SolveResult result =
        solve_exact(g.configs, g.table, g.demand, Budget{0.01}, g.bundle.availability, {});
    CHECK(result.status == SolveStatus::Infeasible);
    CHECK(!result.plan.has_value());
    CHECK(result.infeasible_cause.find("budget") != std::string::npos);
}

TEST_CASE("solve_exact matches exhaustive enumeration on fuzzed instances") {
    std::mt19937_64 rng(101);
    int solved = 0;
    for (int iter = 0; iter < 60; ++iter) {
        const auto inst = make_fuzz_instance(rng, 3, 4, 3);
        const auto oracle = testutil::exhaustive_solve(inst);
        const SolveResult result = solve_exact(inst.configs, inst.table, inst.demand, inst.budget,
                                               inst.availability, {});
        if (!oracle.feasible) {
            CHECK(result.status == SolveStatus::Infeasible);
            continue;
        }
        REQUIRE(result.plan.has_value());
        CHECK(result.plan->makespan ==
              doctest::Approx(oracle.makespan).epsilon(1e-6));
        CHECK(validate_plan(*result.plan, inst.configs, inst.table, inst.demand, inst.budget,
                            inst.availability)
                  .empty());
        solved += 1;
    }
    CHECK(solved > 30);  // the generator must mostly produce feasible instances
}

TEST_CASE("pruning and warm start do not change the optimum") {
    std::mt19937_64 rng(4242);
    for (int iter = 0; iter < 20; ++iter) {
        const auto inst = make_fuzz_instance(rng, 3, 5, 3);
        SolverOptions plain;
        plain.enable_pruning = false;
        plain.enable_warm_start = false;
        SolverOptions tuned;
        tuned.enable_pruning = true;
        tuned.enable_warm_start = true;
        const auto a = solve_exact(inst.configs, inst.table, inst.demand, inst.budget,
                                   inst.availability, plain);
        const auto b = solve_exact(inst.configs, inst.table, inst.demand, inst.budget,
                                   inst.availability, tuned);
        REQUIRE(a.plan.has_value() == b.plan.has_value());
        if (a.plan) CHECK(a.plan->makespan == doctest::Approx(b.plan->makespan).epsilon(1e-9));
    }
}

TEST_CASE("makespan bounds bracket the optimum") {
    const auto g = load_golden();
    const auto [lo, hi] =
        makespan_bounds(g.configs, g.table, g.demand, g.bundle.availability, g.bundle.budget);
    CHECK(lo <= 1450.0 / 51.0 + 1e-9);
    CHECK(hi >= 1450.0 / 51.0 - 1e-9);

    std::mt19937_64 rng(77);
    for (int iter = 0; iter < 100; ++iter) {
        const auto inst = make_fuzz_instance(rng, 3, 4, 3);
        const auto oracle = testutil::exhaustive_solve(inst);
        if (!oracle.feasible) continue;
        const auto [lower, upper] = makespan_bounds(inst.configs, inst.table, inst.demand,
                                                    inst.availability, inst.budget);
        CHECK(lower <= oracle.makespan * (1 + 1e-9));
        CHECK(upper >= oracle.makespan * (1 - 1e-9));
    }
}

TEST_CASE("single config and class collapse the bounds") {
    const auto g = load_golden();
    std::vector<Configuration> one = {g.config("toy|t1:tp1:L1")};
    DemandMatrix demand;
    demand.f[{"toy", 1}] = 100;
    const auto [lo, hi] = makespan_bounds(one, g.table, demand, g.bundle.availability,
                                          Budget{1e18});
    // two units available: both run the config, f/(a*h) = 100/2
    CHECK(lo == doctest::Approx(50.0));
    CHECK(hi == doctest::Approx(100.0));  // single cheapest copy at its worst rate
}

TEST_CASE("feasibility check behaves as a decision procedure") {
    const auto g = load_golden();
    const double optimum = 1450.0 / 51.0;

    CHECK(!feasibility_check(0, g.configs, g.table, g.demand, g.bundle.budget,
                             g.bundle.availability, FeasibilityMode::ExactLp));
    // the hand-rounded 15/85 target is above the optimum, so feasible
    auto plan = feasibility_check(28.67, g.configs, g.table, g.demand, g.bundle.budget,
                                  g.bundle.availability, FeasibilityMode::ExactLp);
    REQUIRE(plan.has_value());
    CHECK(plan->makespan <= 28.67 + 1e-9);
    CHECK(plan->activations.at("toy|t2:tp2:L1") == 1);

    CHECK(!feasibility_check(optimum - 0.01, g.configs, g.table, g.demand, g.bundle.budget,
                             g.bundle.availability, FeasibilityMode::ExactLp));

    const auto [lo, hi] =
        makespan_bounds(g.configs, g.table, g.demand, g.bundle.availability, g.bundle.budget);
    CHECK(feasibility_check(hi, g.configs, g.table, g.demand, g.bundle.budget,
                            g.bundle.availability, FeasibilityMode::ExactLp)
              .has_value());
}

TEST_CASE("exact feasibility is monotone in the target") {
    std::mt19937_64 rng(303);
    for (int iter = 0; iter < 25; ++iter) {
        const auto inst = make_fuzz_instance(rng, 3, 4, 2);
        const auto oracle = testutil::exhaustive_solve(inst);
        if (!oracle.feasible) continue;
        const double t_star = oracle.makespan;
        bool previous_feasible = false;
        for (double factor : {0.5, 0.9, 0.999, 1.001, 1.5, 4.0}) {
            const bool feasible =
                feasibility_check(t_star * factor, inst.configs, inst.table, inst.demand,
                                  inst.budget, inst.availability, FeasibilityMode::ExactLp)
                    .has_value();
            if (previous_feasible) CHECK(feasible);
            previous_feasible = feasible;
            if (factor < 0.99) CHECK(!feasible);
            if (factor > 1.001) CHECK(feasible);
        }
    }
}

TEST_CASE("greedy knapsack feasibility is sound and usually agrees") {
    std::mt19937_64 rng(909);
    int greedy_hits = 0, exact_hits = 0;
    for (int iter = 0; iter < 40; ++iter) {
        const auto inst = make_fuzz_instance(rng, 3, 5, 3);
        const auto oracle = testutil::exhaustive_solve(inst);
        if (!oracle.feasible) continue;
        for (double factor : {1.05, 1.5, 3.0}) {
            const double target = oracle.makespan * factor;
            SolveStats stats;
            const auto plan =
                feasibility_check(target, inst.configs, inst.table, inst.demand, inst.budget,
                                  inst.availability, FeasibilityMode::KnapsackGreedy, &stats);
            exact_hits += 1;
            if (plan) {
                greedy_hits += 1;
                // soundness: the claimed plan really meets the target
                CHECK(plan->makespan <= target * (1 + 1e-9));
                CHECK(validate_plan(*plan, inst.configs, inst.table, inst.demand, inst.budget,
                                    inst.availability)
                          .empty());
            }
        }
    }
    // greedy may miss, but not always
    CHECK(greedy_hits > exact_hits / 2);
}

TEST_CASE("binary search lands within tolerance of the exact optimum") {
    const auto g = load_golden();
    SolverOptions options;
    options.mode = SolveMode::BinarySearch;
    options.tolerance = 0.01;
    const SolveResult result = binary_search_on_T(g.configs, g.table, g.demand, g.bundle.budget,
                                                  g.bundle.availability, options);
    REQUIRE(result.plan.has_value());
    CHECK(result.plan->makespan == doctest::Approx(1450.0 / 51.0).epsilon(1e-3));
    CHECK(std::abs(result.plan->makespan - 1450.0 / 51.0) <= options.tolerance + 1e-9);
}

TEST_CASE("binary search with a huge tolerance returns the upper-bound plan") {
    const auto g = load_golden();
    SolverOptions options;
    options.mode = SolveMode::BinarySearch;
    options.tolerance = 1e9;
    const SolveResult result = binary_search_on_T(g.configs, g.table, g.demand, g.bundle.budget,
                                                  g.bundle.availability, options);
    REQUIRE(result.plan.has_value());
    CHECK(result.stats.bs_iterations == 0);
    CHECK(validate_plan(*result.plan, g.configs, g.table, g.demand, g.bundle.budget,
                        g.bundle.availability)
              .empty());
}

TEST_CASE("binary search tracks the exact solver within one percent") {
    std::mt19937_64 rng(1234);
    int compared = 0;
    for (int iter = 0; iter < 15; ++iter) {
        const auto inst = make_fuzz_instance(rng, 4, 8, 3, 2);
        const auto exact = solve_exact(inst.configs, inst.table, inst.demand, inst.budget,
                                       inst.availability, {});
        if (!exact.plan) continue;
        SolverOptions options;
        options.mode = SolveMode::BinarySearch;
        options.tolerance = 0.01 * exact.plan->makespan;
        const auto bs = binary_search_on_T(inst.configs, inst.table, inst.demand, inst.budget,
                                           inst.availability, options);
        REQUIRE(bs.plan.has_value());
        CHECK(bs.plan->makespan >= exact.plan->makespan * (1 - 1e-9));
        CHECK(std::abs(bs.plan->makespan - exact.plan->makespan) <=
              0.01 * exact.plan->makespan + 1e-9);
        compared += 1;
    }
    CHECK(compared >= 10);
}

TEST_CASE("warm start yields a feasible or empty incumbent") {
    const auto g = load_golden();
    const auto seed = warm_start(g.configs, g.demand, g.bundle.models, g.bundle.budget, g.table,
                                 g.bundle.availability);
    REQUIRE(!seed.empty());
    double cost = 0;
    for (const auto& [id, count] : seed) cost += g.config(id).cost * count;
    CHECK(cost <= g.bundle.budget.limit + 1e-9);

    // unaffordable budget: no incumbent
    const auto none = warm_start(g.configs, g.demand, g.bundle.models, Budget{0.5}, g.table,
                                 g.bundle.availability);
    CHECK(none.empty());
}

TEST_CASE("warm start splits budget across models by memory-weighted demand") {
    std::mt19937_64 rng(31337);
    auto inst = make_fuzz_instance(rng, 2, 3, 2, 3, false);
    // clone the instance into a second model with its own configs
    ModelSpec other = inst.model;
    other.name = "m1";
    other.min_replica_memory = inst.model.min_replica_memory * 3;
    std::vector<Configuration> configs = inst.configs;
    for (const auto& c : inst.configs) {
        Configuration copy = c;
        std::vector<StageSpec> stages = c.stages;
        Configuration rebuilt = make_config(inst.catalog, other, stages);
        configs.push_back(rebuilt);
    }
    ThroughputTable table = inst.table;
    for (const auto& [key, rate] : inst.table.rate) {
        table.rate[{"m1|" + key.first.substr(3), key.second}] = rate;
    }
    DemandMatrix demand = inst.demand;
    for (const auto& [key, f] : inst.demand.f) demand.f[{"m1", key.second}] = f;

    const Budget budget{1000.0};
    Availability availability;
    for (const auto& t : inst.catalog.gpu_types) availability.counts[t.name] = 1000;
    const auto seed =
        warm_start(configs, demand, {inst.model, other}, budget, table, availability);
    REQUIRE(!seed.empty());
    double cost_m0 = 0, cost_m1 = 0;
    for (const auto& [id, count] : seed) {
        for (const auto& c : configs) {
            if (c.id == id) (c.model == "m0" ? cost_m0 : cost_m1) += c.cost * count;
        }
    }
    // m1 weighs 3x heavier per request: its share must dominate
    CHECK(cost_m1 > cost_m0);
}

TEST_CASE("multi-model entry point is bitwise identical for a single model") {
    std::mt19937_64 rng(555);
    for (int iter = 0; iter < 20; ++iter) {
        const auto inst = make_fuzz_instance(rng, 3, 4, 3);
        const auto a =
            solve_exact(inst.configs, inst.table, inst.demand, inst.budget, inst.availability, {});
        const auto b = solve_multi_model(inst.configs, inst.table, inst.demand, inst.budget,
                                         inst.availability, {});
        REQUIRE(a.plan.has_value() == b.plan.has_value());
        if (!a.plan) continue;
        CHECK(a.plan->makespan == b.plan->makespan);  // bitwise
        CHECK(a.plan->activations == b.plan->activations);
        CHECK(a.plan->assignment == b.plan->assignment);
        CHECK(a.plan->total_cost == b.plan->total_cost);
    }
}

TEST_CASE("disjoint-resource models decompose into independent solves") {
    std::mt19937_64 rng(808);
    for (int iter = 0; iter < 10; ++iter) {
        auto inst_a = make_fuzz_instance(rng, 2, 3, 2, 3, false);
        auto inst_b = make_fuzz_instance(rng, 2, 3, 2, 3, false);
        // rename b's world so resources are disjoint
        for (auto& t : inst_b.catalog.gpu_types) t.name = "x" + t.name;
        inst_b.model.name = "m1";
        Availability avail_b;
        for (const auto& [type, count] : inst_b.availability.counts) {
            avail_b.counts["x" + type] = count;
        }
        inst_b.availability = avail_b;
        std::vector<Configuration> configs_b;
        ThroughputTable table_b;
        for (const auto& c : inst_b.configs) {
            std::vector<StageSpec> stages = c.stages;
            for (auto& s : stages) s.gpu_type = "x" + s.gpu_type;
            Configuration rebuilt = make_config(inst_b.catalog, inst_b.model, stages);
            for (const auto& w : inst_b.classes) {
                if (inst_b.table.has(c.id, w.id)) {
                    table_b.rate[{rebuilt.id, w.id}] = inst_b.table.rate_at(c.id, w.id);
                }
            }
            configs_b.push_back(std::move(rebuilt));
        }
        DemandMatrix demand_b;
        for (const auto& [key, f] : inst_b.demand.f) demand_b.f[{"m1", key.second}] = f;

        const auto solo_a = solve_exact(inst_a.configs, inst_a.table, inst_a.demand,
                                        inst_a.budget, inst_a.availability, {});
        const auto solo_b =
            solve_exact(configs_b, table_b, demand_b, inst_b.budget, inst_b.availability, {});
        if (!solo_a.plan || !solo_b.plan) continue;

        // joint world
        std::vector<Configuration> joint_configs = inst_a.configs;
        for (const auto& c : configs_b) joint_configs.push_back(c);
        ThroughputTable joint_table = inst_a.table;
        for (const auto& [key, rate] : table_b.rate) joint_table.rate[key] = rate;
        DemandMatrix joint_demand = inst_a.demand;
        for (const auto& [key, f] : demand_b.f) joint_demand.f[key] = f;
        Availability joint_avail = inst_a.availability;
        for (const auto& [type, count] : inst_b.availability.counts) {
            joint_avail.counts[type] = count;
        }
        const Budget joint_budget{inst_a.budget.limit + inst_b.budget.limit};

        const auto joint = solve_multi_model(joint_configs, joint_table, joint_demand,
                                             joint_budget, joint_avail, {});
        REQUIRE(joint.plan.has_value());
        // with a pooled budget the joint optimum can only improve on the
        // max of the independent solves, and no type is over-used
        const double max_solo = std::max(solo_a.plan->makespan, solo_b.plan->makespan);
        CHECK(joint.plan->makespan <= max_solo * (1 + 1e-6));
        for (const auto& [type, used] : joint.plan->gpu_usage) {
            CHECK(used <= joint_avail.of(type));
        }
    }
}

TEST_CASE("scaling all demands by k scales the makespan by k") {
    std::mt19937_64 rng(11111);
    for (int iter = 0; iter < 10; ++iter) {
        const auto inst = make_fuzz_instance(rng, 3, 4, 3);
        const auto base =
            solve_exact(inst.configs, inst.table, inst.demand, inst.budget, inst.availability, {});
        if (!base.plan) continue;
        DemandMatrix scaled;
        const double k = 3.5;
        for (const auto& [key, f] : inst.demand.f) scaled.f[key] = f * k;
        const auto result =
            solve_exact(inst.configs, inst.table, scaled, inst.budget, inst.availability, {});
        REQUIRE(result.plan.has_value());
        CHECK(result.plan->makespan == doctest::Approx(k * base.plan->makespan).epsilon(1e-9));
        CHECK(result.plan->activations == base.plan->activations);
    }
}

TEST_CASE("scaling all prices and the budget leaves the chosen plan unchanged") {
    std::mt19937_64 rng(22222);
    for (int iter = 0; iter < 10; ++iter) {
        auto inst = make_fuzz_instance(rng, 3, 4, 3);
        const auto base =
            solve_exact(inst.configs, inst.table, inst.demand, inst.budget, inst.availability, {});
        const double k = 4.0;
        for (auto& t : inst.catalog.gpu_types) t.price *= k;
        std::vector<Configuration> configs;
        ThroughputTable table;
        for (const auto& c : inst.configs) {
            Configuration rebuilt = make_config(inst.catalog, inst.model, c.stages);
            for (const auto& w : inst.classes) {
                if (inst.table.has(c.id, w.id)) {
                    table.rate[{rebuilt.id, w.id}] = inst.table.rate_at(c.id, w.id);
                }
            }
            configs.push_back(std::move(rebuilt));
        }
        const auto scaled = solve_exact(configs, table, inst.demand, Budget{inst.budget.limit * k},
                                        inst.availability, {});
        REQUIRE(base.plan.has_value() == scaled.plan.has_value());
        if (!base.plan) continue;
        CHECK(scaled.plan->makespan == doctest::Approx(base.plan->makespan).epsilon(1e-9));
        CHECK(scaled.plan->activations == base.plan->activations);
    }
}

TEST_CASE("replanning is idempotent on unchanged inputs") {
    const auto g = load_golden();
    const auto first = solve_exact(g.configs, g.table, g.demand, g.bundle.budget,
                                   g.bundle.availability, {});
    REQUIRE(first.plan.has_value());
    const auto [second, delta] = replan(*first.plan, g.configs, g.table, g.demand,
                                        g.bundle.budget, g.bundle.availability, {});
    REQUIRE(second.plan.has_value());
    CHECK(second.plan->makespan == doctest::Approx(first.plan->makespan).epsilon(1e-9));
    CHECK(delta.added.empty());
    CHECK(delta.removed.empty());
}

TEST_CASE("replanning after a GPU drop excludes the lost units and recovers throughput") {
    const auto g = load_golden();
    const auto first = solve_exact(g.configs, g.table, g.demand, g.bundle.budget,
                                   g.bundle.availability, {});
    REQUIRE(first.plan.has_value());
    // the optimal plan uses both t2 units; drop them entirely
    Availability dropped = g.bundle.availability;
    dropped.counts["t2"] = 0;
    const auto [result, delta] =
        replan(*first.plan, g.configs, g.table, g.demand, g.bundle.budget, dropped, {});
    REQUIRE(result.plan.has_value());
    CHECK(result.plan->activations.count("toy|t2:tp2:L1") == 0);
    CHECK(result.plan->gpu_usage.count("t2") == 0);
    // the drop hurts, replanning recovers part of it
    CHECK(result.plan->makespan > first.plan->makespan);
    CHECK(delta.throughput_after > 0);
    CHECK(delta.removed.count("toy|t2:tp2:L1") == 1);
}

TEST_CASE("demand shifts move assignment mass toward the better-suited configs") {
    const auto g = load_golden();
    const auto base = solve_exact(g.configs, g.table, g.demand, g.bundle.budget,
                                  g.bundle.availability, {});
    REQUIRE(base.plan.has_value());
    DemandMatrix shifted;
    shifted.f[{"toy", 1}] = 10;
    shifted.f[{"toy", 2}] = 90;  // mass moves to class 2
    const auto [result, delta] = replan(*base.plan, g.configs, g.table, shifted, g.bundle.budget,
                                        g.bundle.availability, {});
    REQUIRE(result.plan.has_value());
    auto class2_rate = [&](const Plan& plan) {
        double rate = 0;
        for (const auto& [key, x] : plan.assignment) {
            if (std::get<2>(key) == 2) rate += x * g.table.rate_at(std::get<0>(key), 2);
        }
        return rate;
    };
    // weighted class-2 service rate should not degrade when class 2 dominates
    CHECK(class2_rate(*result.plan) >= class2_rate(*base.plan) - 1e-9);
}

TEST_CASE("the invariant checker catches corrupted plans") {
    const auto g = load_golden();
    const auto result = solve_exact(g.configs, g.table, g.demand, g.bundle.budget,
                                    g.bundle.availability, {});
    REQUIRE(result.plan.has_value());

    Plan bad_sum = *result.plan;
    bad_sum.assignment[{"toy|t1:tp1:L1", "toy", 1}] += 0.2;
    CHECK(!validate_plan(bad_sum, g.configs, g.table, g.demand, g.bundle.budget,
                         g.bundle.availability)
               .empty());

    Plan bad_coupling = *result.plan;
    bad_coupling.activations.erase("toy|t2:tp2:L1");
    CHECK(!validate_plan(bad_coupling, g.configs, g.table, g.demand, g.bundle.budget,
                         g.bundle.availability)
               .empty());

    Plan bad_budget = *result.plan;
    CHECK(!validate_plan(bad_budget, g.configs, g.table, g.demand, Budget{1.0},
                         g.bundle.availability)
               .empty());

    Plan bad_makespan = *result.plan;
    bad_makespan.makespan /= 2;
    CHECK(!validate_plan(bad_makespan, g.configs, g.table, g.demand, g.bundle.budget,
                         g.bundle.availability)
               .empty());

    Availability tight = g.bundle.availability;
    tight.counts["t2"] = 1;
    CHECK(!validate_plan(*result.plan, g.configs, g.table, g.demand, g.bundle.budget, tight)
               .empty());
}

TEST_CASE("plan documents round-trip through JSON") {
    const auto g = load_golden();
    const auto result = solve_exact(g.configs, g.table, g.demand, g.bundle.budget,
                                    g.bundle.availability, {});
    REQUIRE(result.plan.has_value());
    const auto doc = plan_to_json(*result.plan, result.stats);
    CHECK(doc.contains("makespan_s"));
    CHECK(doc.contains("total_cost_per_h"));
    CHECK(doc.contains("activations"));
    CHECK(doc.contains("assignment"));
    CHECK(doc.contains("gpu_usage"));
    CHECK(doc["solver"].contains("evaluated_nodes"));
    const Plan round = plan_from_json(doc);
    CHECK(round.makespan == result.plan->makespan);
    CHECK(round.activations == result.plan->activations);
    CHECK(round.assignment == result.plan->assignment);
}
