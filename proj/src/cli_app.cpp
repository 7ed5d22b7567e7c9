#include "hetplan/cli_app.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hetplan/catalog.hpp"
#include "hetplan/simulator.hpp"
#include "hetplan/solver.hpp"

namespace hetplan {

using nlohmann::json;

namespace {

struct GlobalArgs {
    std::string catalog_path;
    std::string out_path;
    std::uint64_t seed = 0;
    bool quiet = false;
};

json make_manifest(const std::string& command, const json& inputs, const json& options,
                   std::uint64_t seed, double wall_s) {
    return json{{"command", command}, {"inputs", inputs},       {"options", options},
                {"tool_version", kToolVersion}, {"seed", seed}, {"wall_s", wall_s}};
}

void write_output(const GlobalArgs& global, const json& doc, std::ostream& out) {
    if (global.out_path.empty()) {
        if (!global.quiet) out << doc.dump(2) << "\n";
        return;
    }
    std::ofstream file(global.out_path);
    if (!file) throw Error(cat("cannot write output file '", global.out_path, "'"));
    file << doc.dump(2) << "\n";
}

double now_wall() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct ProblemArgs {
    std::string demand_path;
    std::string trace_path;
    std::string classes_path;
    std::string profile_path;
    std::string table_mode = "auto";  // auto | analytic | merged | profile
    double budget_override = 0;
    int max_gpus_per_replica = 8;
    std::string mode = "exact";
    double tolerance = 1.0;
    std::string feasibility = "exact_lp";
    double wall_clock_limit = 0;
};

void add_problem_flags(CLI::App* cmd, ProblemArgs& args, bool demand_needed) {
    if (demand_needed) {
        cmd->add_option("--demand", args.demand_path, "demand document (classes + counts)");
        cmd->add_option("--trace", args.trace_path, "request trace, one JSON record per line");
        cmd->add_option("--classes", args.classes_path,
                        "workload class document (defaults to the nine stock classes)");
    }
    cmd->add_option("--profile-table", args.profile_path, "measured throughput table");
    cmd->add_option("--table", args.table_mode, "analytic | merged | profile")
        ->check(CLI::IsMember({"auto", "analytic", "merged", "profile"}));
    cmd->add_option("--budget", args.budget_override, "budget override, USD/hour");
    cmd->add_option("--max-gpus-per-replica", args.max_gpus_per_replica,
                    "cap on GPUs per model replica");
    cmd->add_option("--mode", args.mode, "exact | binary_search")
        ->check(CLI::IsMember({"exact", "binary_search"}));
    cmd->add_option("--tolerance", args.tolerance, "binary search stop width, seconds");
    cmd->add_option("--feasibility", args.feasibility, "exact_lp | knapsack_greedy")
        ->check(CLI::IsMember({"exact_lp", "knapsack_greedy"}));
    cmd->add_option("--wall-clock-limit", args.wall_clock_limit, "seconds, 0 = none");
}

std::vector<WorkloadType> load_classes_arg(const std::string& path) {
    if (path.empty()) return default_workload_classes();
    std::ifstream in(path);
    if (!in) throw Error(cat("cannot open classes file '", path, "'"));
    json doc = json::parse(in);
    return workload_classes_from_json(doc.is_array() ? doc : doc.at("classes"));
}

PlannerInputs assemble_inputs(const GlobalArgs& global, const ProblemArgs& args) {
    if (global.catalog_path.empty()) throw Error("--catalog is required");
    const CatalogBundle bundle = load_catalog_file(global.catalog_path);
    PlannerInputs inputs;
    inputs.catalog = bundle.catalog;
    inputs.availability = bundle.availability;
    inputs.budget = bundle.budget;
    inputs.models = bundle.models.empty() ? default_models() : bundle.models;
    if (args.budget_override > 0) inputs.budget.limit = args.budget_override;
    if (!(inputs.budget.limit > 0)) {
        throw Error("no budget: set budget_per_hour in the catalog or pass --budget");
    }

    if (!args.demand_path.empty()) {
        const DemandDocument doc = load_demand_file(args.demand_path);
        inputs.classes = doc.classes;
        inputs.demand = doc.demand;
    } else if (!args.trace_path.empty()) {
        inputs.classes = load_classes_arg(args.classes_path);
        std::vector<std::string> model_names;
        for (const auto& m : inputs.models) model_names.push_back(m.name);
        inputs.demand = ingest_trace(load_trace_file(args.trace_path), inputs.classes,
                                     model_names);
    } else {
        throw Error("provide --demand or --trace");
    }

    inputs.enum_options.max_gpus_per_replica = args.max_gpus_per_replica;
    inputs.solver.mode = args.mode == "binary_search" ? SolveMode::BinarySearch : SolveMode::Exact;
    inputs.solver.tolerance = args.tolerance;
    inputs.solver.wall_clock_limit = args.wall_clock_limit;
    inputs.solver.feasibility_mode = args.feasibility == "knapsack_greedy"
                                         ? FeasibilityMode::KnapsackGreedy
                                         : FeasibilityMode::ExactLp;

    std::string table_mode = args.table_mode;
    if (table_mode == "auto") table_mode = args.profile_path.empty() ? "analytic" : "merged";
    if (table_mode != "analytic" && args.profile_path.empty()) {
        throw Error(cat("--table ", table_mode, " requires --profile-table"));
    }
    inputs.profile_only = table_mode == "profile";
    if (!args.profile_path.empty() && table_mode != "analytic") {
        // Resolution against the enumerated configs happens in build_problem,
        // so stash the path and load lazily there.
        BuiltProblem probe;
        for (const auto& model : inputs.models) {
            auto result = enumerate_configs(inputs.catalog, inputs.availability, model,
                                            inputs.enum_options);
            for (auto& c : result.configs) probe.configs.push_back(std::move(c));
        }
        inputs.profile = load_profile_table_file(args.profile_path, probe.configs,
                                                 inputs.classes);
    }
    return inputs;
}

json problem_options_json(const ProblemArgs& args) {
    return json{{"mode", args.mode},
                {"tolerance", args.tolerance},
                {"feasibility", args.feasibility},
                {"max_gpus_per_replica", args.max_gpus_per_replica},
                {"table", args.table_mode},
                {"budget_override", args.budget_override}};
}

json problem_inputs_json(const GlobalArgs& global, const ProblemArgs& args) {
    json inputs = {{"catalog", global.catalog_path}};
    if (!args.demand_path.empty()) inputs["demand"] = args.demand_path;
    if (!args.trace_path.empty()) inputs["trace"] = args.trace_path;
    if (!args.classes_path.empty()) inputs["classes"] = args.classes_path;
    if (!args.profile_path.empty()) inputs["profile_table"] = args.profile_path;
    return inputs;
}

void print_plan_summary(const Plan& plan, const SolveResult& result, std::ostream& out) {
    out << std::fixed << std::setprecision(4);
    out << "makespan: " << plan.makespan << " s\n";
    out << "cost: " << plan.total_cost << " $/h\n";
    out << "status: "
        << (result.status == SolveStatus::Optimal ? "optimal"
                                                  : result.status == SolveStatus::Feasible
                                                        ? "feasible"
                                                        : "infeasible")
        << " (gap " << result.stats.gap << ", vectors " << result.stats.evaluated_vectors
        << ")\n";
    out << "activations:\n";
    for (const auto& [id, count] : plan.activations) {
        out << "  " << std::left << std::setw(40) << id << " x" << count << "\n";
    }
    out << "assignment:\n";
    for (const auto& [key, x] : plan.assignment) {
        out << "  " << std::left << std::setw(40) << std::get<0>(key) << " "
            << std::get<1>(key) << " w" << std::get<2>(key) << " " << std::setprecision(4)
            << 100 * x << "%\n";
    }
    out << "gpu usage:\n";
    for (const auto& [type, count] : plan.gpu_usage) {
        out << "  " << std::left << std::setw(12) << type << " x" << count << "\n";
    }
}

int finish_solve(const GlobalArgs& global, const ProblemArgs& args, const SolveResult& result,
                 const std::string& command, double start, std::ostream& out, std::ostream& err) {
    if (!result.plan) {
        err << "infeasible: " << result.infeasible_cause << "\n";
        return 2;
    }
    json doc = plan_to_json(*result.plan, result.stats);
    doc["manifest"] = make_manifest(command, problem_inputs_json(global, args),
                                    problem_options_json(args), global.seed, now_wall() - start);
    write_output(global, doc, out);
    if (!global.quiet) print_plan_summary(*result.plan, result, out);
    return 0;
}

int cmd_plan(const GlobalArgs& global, const ProblemArgs& args, std::ostream& out,
             std::ostream& err) {
    const double start = now_wall();
    const PlannerInputs inputs = assemble_inputs(global, args);
    const BuiltProblem problem = build_problem(inputs);
    const SolveResult result = solve(problem.configs, problem.table, inputs.demand,
                                     inputs.budget, inputs.availability, inputs.solver);
    return finish_solve(global, args, result, "plan", start, out, err);
}

int cmd_enumerate(const GlobalArgs& global, const ProblemArgs& args, const std::string& model_name,
                  std::ostream& out, std::ostream& err) {
    (void)err;
    const double start = now_wall();
    if (global.catalog_path.empty()) throw Error("--catalog is required");
    const CatalogBundle bundle = load_catalog_file(global.catalog_path);
    const auto models = bundle.models.empty() ? default_models() : bundle.models;

    EnumerationOptions options;
    options.max_gpus_per_replica = args.max_gpus_per_replica;
    json configs = json::array();
    json pruned = json::object();
    for (const auto& model : models) {
        if (!model_name.empty() && model.name != model_name) continue;
        const auto result = enumerate_configs(bundle.catalog, bundle.availability, model, options);
        for (const auto& c : result.configs) {
            json stages = json::array();
            for (const auto& s : c.stages) {
                stages.push_back(
                    {{"type", s.gpu_type}, {"tp", s.tp_degree}, {"layers", s.layer_count}});
            }
            configs.push_back({{"config_id", c.id},
                               {"model", c.model},
                               {"stages", std::move(stages)},
                               {"cost", c.cost}});
        }
        for (const auto& [reason, count] : result.pruned) {
            pruned[model.name][reason] = count;
        }
    }
    json doc = {{"configs", std::move(configs)}, {"pruned", std::move(pruned)}};
    doc["manifest"] = make_manifest("enumerate", problem_inputs_json(global, args),
                                    json{{"model", model_name},
                                         {"max_gpus_per_replica", args.max_gpus_per_replica}},
                                    global.seed, now_wall() - start);
    write_output(global, doc, out);
    return 0;
}

int cmd_profile(const GlobalArgs& global, const ProblemArgs& args, std::ostream& out,
                std::ostream& err) {
    (void)err;
    const double start = now_wall();
    if (global.catalog_path.empty()) throw Error("--catalog is required");
    const CatalogBundle bundle = load_catalog_file(global.catalog_path);
    const auto models = bundle.models.empty() ? default_models() : bundle.models;
    const auto classes = load_classes_arg(args.classes_path);

    EnumerationOptions options;
    options.max_gpus_per_replica = args.max_gpus_per_replica;
    std::vector<Configuration> configs;
    for (const auto& model : models) {
        auto result = enumerate_configs(bundle.catalog, bundle.availability, model, options);
        for (auto& c : result.configs) configs.push_back(std::move(c));
    }
    const ThroughputTable table =
        build_table(configs, classes, models, bundle.catalog, CommParams{}, MemoryParams{});
    json doc = profile_table_to_json(table, configs);
    doc["manifest"] = make_manifest("profile", problem_inputs_json(global, args),
                                    json{{"max_gpus_per_replica", args.max_gpus_per_replica}},
                                    global.seed, now_wall() - start);
    write_output(global, doc, out);
    return 0;
}

int cmd_simulate(const GlobalArgs& global, const ProblemArgs& args, const std::string& plan_path,
                 const std::string& request_log, std::ostream& out, std::ostream& err) {
    (void)err;
    const double start = now_wall();
    if (args.trace_path.empty()) throw Error("simulate requires --trace");
    std::ifstream plan_in(plan_path);
    if (!plan_in) throw Error(cat("cannot open plan file '", plan_path, "'"));
    const Plan plan = plan_from_json(json::parse(plan_in));

    ProblemArgs table_args = args;
    table_args.demand_path.clear();  // table construction only
    const PlannerInputs inputs = [&] {
        PlannerInputs in;
        const CatalogBundle bundle = load_catalog_file(global.catalog_path);
        in.catalog = bundle.catalog;
        in.availability = bundle.availability;
        in.budget = bundle.budget.limit > 0 ? bundle.budget : Budget{1.0};
        in.models = bundle.models.empty() ? default_models() : bundle.models;
        in.classes = load_classes_arg(args.classes_path);
        in.enum_options.max_gpus_per_replica = args.max_gpus_per_replica;
        in.profile_only = args.table_mode == "profile";
        return in;
    }();

    std::vector<Configuration> configs;
    for (const auto& model : inputs.models) {
        auto result =
            enumerate_configs(inputs.catalog, inputs.availability, model, inputs.enum_options);
        for (auto& c : result.configs) configs.push_back(std::move(c));
    }
    ThroughputTable table;
    if (!inputs.profile_only) {
        table = build_table(configs, inputs.classes, inputs.models, inputs.catalog, CommParams{},
                            MemoryParams{});
    }
    if (!args.profile_path.empty()) {
        table = merge_tables(table,
                             load_profile_table_file(args.profile_path, configs, inputs.classes));
    }

    const auto trace = load_trace_file(args.trace_path);
    std::ofstream log_file;
    std::ostream* log = nullptr;
    if (!request_log.empty()) {
        log_file.open(request_log);
        if (!log_file) throw Error(cat("cannot write request log '", request_log, "'"));
        log = &log_file;
    }
    const SimReport report =
        simulate_events(plan, trace, table, configs, inputs.classes, global.seed, log);

    json doc = sim_report_to_json(report);
    json manifest_inputs = problem_inputs_json(global, args);
    manifest_inputs["plan"] = plan_path;
    doc["manifest"] = make_manifest("simulate", manifest_inputs,
                                    json{{"seed", global.seed}}, global.seed, now_wall() - start);
    write_output(global, doc, out);
    if (!global.quiet) out << sim_report_table(report);
    return 0;
}

int cmd_compare(const GlobalArgs& global, const ProblemArgs& args,
                const std::vector<std::string>& baseline_names, std::ostream& out,
                std::ostream& err) {
    (void)err;
    const double start = now_wall();
    const PlannerInputs inputs = assemble_inputs(global, args);
    const BuiltProblem problem = build_problem(inputs);

    double total_demand = 0;
    for (const auto& [key, count] : inputs.demand.f) total_demand += count;

    struct Row {
        std::string variant;
        double makespan = 0;
        double throughput = 0;
        double cost = 0;
        bool feasible = false;
        std::string note;
    };
    std::vector<Row> rows;

    const SolveResult optimized = solve(problem.configs, problem.table, inputs.demand,
                                        inputs.budget, inputs.availability, inputs.solver);
    if (!optimized.plan) {
        err << "infeasible: " << optimized.infeasible_cause << "\n";
        return 2;
    }
    rows.push_back({"optimized", optimized.plan->makespan,
                    total_demand / optimized.plan->makespan, optimized.plan->total_cost, true,
                    ""});

    for (const auto& name : baseline_names) {
        Row row;
        row.variant = name;
        SolveResult result;
        try {
            if (name == "uniform_composition") {
                result = baseline(inputs, BaselineKind::UniformComposition);
            } else if (name == "uniform_deployment") {
                result = baseline(inputs, BaselineKind::UniformDeployment);
            } else if (name == "round_robin_assignment") {
                result = baseline(inputs, BaselineKind::RoundRobinAssignment);
            } else if (name.rfind("homogeneous:", 0) == 0) {
                result = baseline(inputs, BaselineKind::Homogeneous, name.substr(12));
            } else {
                throw Error(cat("unknown baseline '", name, "'"));
            }
        } catch (const Error& e) {
            row.note = e.what();
        }
        if (result.plan) {
            row.feasible = true;
            row.makespan = result.plan->makespan;
            row.throughput = total_demand / result.plan->makespan;
            row.cost = result.plan->total_cost;
        } else if (row.note.empty()) {
            row.note = result.infeasible_cause;
        }
        rows.push_back(std::move(row));
    }

    json table_json = json::array();
    const double base = rows.front().makespan;
    out << std::fixed << std::setprecision(4);
    out << std::left << std::setw(26) << "variant" << std::setw(14) << "makespan_s"
        << std::setw(16) << "throughput_rps" << std::setw(12) << "cost_per_h" << "delta_pct\n";
    for (const auto& row : rows) {
        const double delta = row.feasible ? (row.makespan / base - 1.0) * 100.0 : 0;
        table_json.push_back({{"variant", row.variant},
                              {"makespan", row.feasible ? json(row.makespan) : json()},
                              {"throughput", row.feasible ? json(row.throughput) : json()},
                              {"cost", row.feasible ? json(row.cost) : json()},
                              {"delta_pct", row.feasible ? json(delta) : json()},
                              {"note", row.note}});
        out << std::left << std::setw(26) << row.variant;
        if (row.feasible) {
            out << std::setw(14) << row.makespan << std::setw(16) << row.throughput
                << std::setw(12) << row.cost << delta << "\n";
        } else {
            out << "infeasible: " << row.note << "\n";
        }
    }
    json doc = {{"comparison", std::move(table_json)}};
    doc["manifest"] = make_manifest("compare", problem_inputs_json(global, args),
                                    problem_options_json(args), global.seed, now_wall() - start);
    write_output(global, doc, out);
    return 0;
}

int cmd_replan(const GlobalArgs& global, const ProblemArgs& args, const std::string& plan_path,
               std::ostream& out, std::ostream& err) {
    const double start = now_wall();
    std::ifstream plan_in(plan_path);
    if (!plan_in) throw Error(cat("cannot open plan file '", plan_path, "'"));
    const Plan previous = plan_from_json(json::parse(plan_in));

    const PlannerInputs inputs = assemble_inputs(global, args);
    const BuiltProblem problem = build_problem(inputs);
    const auto [result, delta] = replan(previous, problem.configs, problem.table, inputs.demand,
                                        inputs.budget, inputs.availability, inputs.solver);
    if (!result.plan) {
        err << "infeasible: " << result.infeasible_cause << "\n";
        return 2;
    }
    json doc = plan_to_json(*result.plan, result.stats);
    json added = json::object(), removed = json::object();
    for (const auto& [id, count] : delta.added) added[id] = count;
    for (const auto& [id, count] : delta.removed) removed[id] = count;
    doc["delta"] = {{"added", std::move(added)},
                    {"removed", std::move(removed)},
                    {"makespan_before", delta.makespan_before},
                    {"makespan_after", delta.makespan_after},
                    {"throughput_before", delta.throughput_before},
                    {"throughput_after", delta.throughput_after}};
    json manifest_inputs = problem_inputs_json(global, args);
    manifest_inputs["previous_plan"] = plan_path;
    doc["manifest"] = make_manifest("replan", manifest_inputs, problem_options_json(args),
                                    global.seed, now_wall() - start);
    write_output(global, doc, out);
    if (!global.quiet) {
        out << std::fixed << std::setprecision(4);
        out << "makespan before/after: " << delta.makespan_before << " / "
            << delta.makespan_after << " s\n";
        out << "throughput before/after: " << delta.throughput_before << " / "
            << delta.throughput_after << " req/s\n";
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cost-efficient LLM serving planner for heterogeneous cloud GPUs"};
    app.require_subcommand(1);

    GlobalArgs global;
    app.add_option("--catalog", global.catalog_path, "catalog document")->envname("HETPLAN_CATALOG");
    app.add_option("--out", global.out_path, "write the primary output document here");
    app.add_option("--seed", global.seed, "random seed");
    app.add_flag("--quiet", global.quiet, "suppress human-readable output");

    ProblemArgs plan_args;
    auto* plan_cmd = app.add_subcommand("plan", "compute a serving plan");
    add_problem_flags(plan_cmd, plan_args, true);

    ProblemArgs enum_args;
    std::string enum_model;
    auto* enum_cmd = app.add_subcommand("enumerate", "list feasible configurations");
    enum_cmd->add_option("--model", enum_model, "restrict to one model");
    enum_cmd->add_option("--max-gpus-per-replica", enum_args.max_gpus_per_replica,
                         "cap on GPUs per model replica");

    ProblemArgs profile_args;
    auto* profile_cmd = app.add_subcommand("profile", "emit the analytic throughput table");
    profile_cmd->add_option("--classes", profile_args.classes_path, "workload class document");
    profile_cmd->add_option("--max-gpus-per-replica", profile_args.max_gpus_per_replica,
                            "cap on GPUs per model replica");

    ProblemArgs sim_args;
    std::string sim_plan, sim_log;
    auto* sim_cmd = app.add_subcommand("simulate", "replay a plan against a trace");
    sim_cmd->add_option("--plan", sim_plan, "plan document")->required();
    sim_cmd->add_option("--trace", sim_args.trace_path, "request trace")->required();
    sim_cmd->add_option("--classes", sim_args.classes_path, "workload class document");
    sim_cmd->add_option("--profile-table", sim_args.profile_path, "measured throughput table");
    sim_cmd->add_option("--table", sim_args.table_mode, "analytic | merged | profile")
        ->check(CLI::IsMember({"auto", "analytic", "merged", "profile"}));
    sim_cmd->add_option("--max-gpus-per-replica", sim_args.max_gpus_per_replica,
                        "cap on GPUs per model replica");
    sim_cmd->add_option("--request-log", sim_log, "per-request completion CSV");

    ProblemArgs compare_args;
    std::vector<std::string> baselines;
    auto* compare_cmd = app.add_subcommand("compare", "optimized plan vs baselines");
    add_problem_flags(compare_cmd, compare_args, true);
    compare_cmd
        ->add_option("--baselines", baselines,
                     "uniform_composition | uniform_deployment | round_robin_assignment | "
                     "homogeneous:<type>")
        ->delimiter(',');

    ProblemArgs replan_args;
    std::string replan_previous;
    auto* replan_cmd = app.add_subcommand("replan", "re-solve from a previous plan");
    add_problem_flags(replan_cmd, replan_args, true);
    replan_cmd->add_option("--previous", replan_previous, "previous plan document")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream os;
        const int code = app.exit(e, os, os);
        (code == 0 ? out : err) << os.str();
        return code == 0 ? 0 : 1;
    }

    try {
        if (plan_cmd->parsed()) return cmd_plan(global, plan_args, out, err);
        if (enum_cmd->parsed()) return cmd_enumerate(global, enum_args, enum_model, out, err);
        if (profile_cmd->parsed()) return cmd_profile(global, profile_args, out, err);
        if (sim_cmd->parsed()) return cmd_simulate(global, sim_args, sim_plan, sim_log, out, err);
        if (compare_cmd->parsed()) return cmd_compare(global, compare_args, baselines, out, err);
        if (replan_cmd->parsed()) return cmd_replan(global, replan_args, replan_previous, out, err);
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << "error: no subcommand\n";
    return 1;
}

}  // namespace hetplan
