// allocnas command-line driver.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.

#include "allocnas/checkpoint.hpp"
#include "allocnas/config.hpp"
#include "allocnas/cost_model.hpp"
#include "allocnas/erf.hpp"
#include "allocnas/errors.hpp"
#include "allocnas/experiments.hpp"
#include "allocnas/report.hpp"
#include "allocnas/search.hpp"
#include "allocnas/transfer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

using namespace allocnas;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct RunOptions {
    std::string config;
    std::string preset = "stage-biased";
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string out;
    std::size_t threads = 0;
};

void add_run_options(CLI::App* cmd, RunOptions& o)
{
    cmd->add_option("--config", o.config, "TOML experiment config");
    cmd->add_option("--preset", o.preset, "domain preset when no config is given")->capture_default_str();
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&o](const std::uint64_t& s) {
            o.seed = s;
            o.seed_given = true;
        },
        "master seed (overrides the config)");
    cmd->add_option("--out", o.out, "output directory (overrides the config)");
    cmd->add_option("--threads", o.threads, "concurrent candidate evaluations");
}

ExperimentConfig resolve(const RunOptions& o)
{
    ExperimentConfig c = o.config.empty() ? default_config(o.preset) : load_config(o.config);
    if (o.config.empty() || o.seed_given)
        c.transfer.seed = o.seed;
    if (!o.out.empty())
        c.out_dir = o.out;
    if (o.threads)
        c.transfer.threads = o.threads;
    return c;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void finish(const ExperimentConfig& c, const std::map<std::string, std::uint64_t>& seeds, const std::vector<std::string>& files)
{
    write_manifest(c.out_dir, c.hash(), seeds, files);
}

TaskSpec pick_task(const ExperimentConfig& c, const std::string& domain)
{
    auto tasks = make_tasks(c.transfer);
    if (domain == "source")
        return tasks.first;
    if (domain == "target")
        return tasks.second;
    throw ConfigError("--domain must be source or target");
}

int cmd_train_supernet(const RunOptions& o)
{
    const auto c = resolve(o);
    const auto& t = c.transfer;
    const auto [source, target] = make_tasks(t);
    const auto init = derive_seed(t.seed, "supernet.init");
    const auto seed = derive_seed(t.seed, "supernet.source");
    SuperNet net = build_supernet(t.super_alloc, t.kind, source.label_space, init, t.geometry());
    const auto log = train_supernet_source(net, source, t.supernet_source, seed);
    ensure_dir(c.out_dir);
    save_supernet(path_in(c.out_dir, "supernet_source.spnw"), net, t.seed, "supernet_source");
    write_text(path_in(c.out_dir, "supernet_source.json"), phase_log_json(log));
    finish(c, {{"master", t.seed}, {"supernet.init", init}, {"supernet.source", seed}},
           {"supernet_source.spnw", "supernet_source.json"});
    std::printf("source val accuracy %.4f -> %.4f (%zu iterations)\n", log.before.top1_accuracy, log.after.top1_accuracy,
                log.iterations);
    return 0;
}

int cmd_finetune_target(const RunOptions& o, const std::string& checkpoint)
{
    const auto c = resolve(o);
    const auto& t = c.transfer;
    SuperNet net = load_supernet(checkpoint);
    const auto target = pick_task(c, "target");
    const auto seed = derive_seed(t.seed, "supernet.target");
    const auto log = finetune_supernet_target(net, target, t.supernet_target, seed);
    ensure_dir(c.out_dir);
    save_supernet(path_in(c.out_dir, "supernet_target.spnw"), net, t.seed, "supernet_target");
    write_text(path_in(c.out_dir, "supernet_target.json"), phase_log_json(log));
    finish(c, {{"master", t.seed}, {"supernet.target", seed}}, {"supernet_target.spnw", "supernet_target.json"});
    std::printf("target val accuracy %.4f -> %.4f\n", log.before.top1_accuracy, log.after.top1_accuracy);
    return 0;
}

int cmd_search(const RunOptions& o, const std::string& checkpoint, double budget)
{
    auto c = resolve(o);
    auto& t = c.transfer;
    if (budget > 0)
        t.budget = budget;
    const SuperNet net = load_supernet(checkpoint);
    const auto target = pick_task(c, "target");
    std::vector<double> weights;
    if (t.weighted)
        weights = derive_weights(desk_spec(net.kind(), net.geometry(), net.stages(), net.num_classes()));
    const SearchSpace space{net.alloc(), t.budget, weights};
    const auto trace = greedy_block_search(
        space, [&](const Allocation& a) { return evaluate(net, ActiveSet{a.counts()}, target).top1_accuracy; },
        {.start = std::nullopt, .threads = t.threads});
    ensure_dir(c.out_dir);
    std::ostringstream csv;
    trace.write_csv(csv);
    write_text(path_in(c.out_dir, "trace.csv"), csv.str());
    finish(c, {{"master", t.seed}}, {"trace.csv"});
    std::cout << csv.str();
    std::printf("evaluations: %zu, tie breaks: %zu\n", trace.eval_count, trace.tie_breaks);
    return 0;
}

int cmd_transfer(const RunOptions& o)
{
    const auto c = resolve(o);
    auto outcome = run_full_transfer(c.transfer);
    const auto& r = outcome.report;
    auto files = emit_report(r, c.out_dir);
    if (outcome.source_supernet) {
        save_supernet(path_in(c.out_dir, "supernet_source.spnw"), *outcome.source_supernet, c.transfer.seed, "supernet_source");
        files.push_back("supernet_source.spnw");
    }
    if (outcome.target_supernet) {
        save_supernet(path_in(c.out_dir, "supernet_target.spnw"), *outcome.target_supernet, c.transfer.seed, "supernet_target");
        files.push_back("supernet_target.spnw");
    }
    if (const auto* s = r.searched()) {
        save_supernet(path_in(c.out_dir, "child_final.spnw"), s->tuned.model, c.transfer.seed, "child_target");
        files.push_back("child_final.spnw");
    }
    finish(c, r.seeds, files);
    if (!r.complete) {
        std::fprintf(stderr, "transfer failed in phase '%s': %s\n", r.failed_phase.c_str(), r.failure.c_str());
        return kExitRuntime;
    }
    const auto* s = r.searched();
    std::printf("searched %s: target val accuracy %.4f\n", s->alloc.to_string().c_str(), s->tuned.final_metrics.top1_accuracy);
    if (r.baseline)
        std::printf("baseline %s: target val accuracy %.4f\n", r.baseline->alloc.to_string().c_str(),
                    r.baseline->tuned.final_metrics.top1_accuracy);
    return 0;
}

int cmd_evaluate(const RunOptions& o, const std::string& checkpoint, const std::string& domain, const std::string& split_name,
                 const std::string& alloc_text)
{
    const auto c = resolve(o);
    const SuperNet net = load_supernet(checkpoint);
    const auto task = pick_task(c, domain);
    if (split_name != "val" && split_name != "train")
        throw ConfigError("--split must be val or train");
    const auto active = alloc_text.empty() ? ActiveSet::full(net.alloc()) : ActiveSet{Allocation::parse(alloc_text).counts()};
    const auto m = evaluate(net, active, task, split_name == "val" ? SplitKind::Val : SplitKind::Train);
    ensure_dir(c.out_dir);
    write_text(path_in(c.out_dir, "metrics.json"), metrics_json(m));
    finish(c, {{"master", c.transfer.seed}}, {"metrics.json"});
    std::printf("loss %.6f top1 %.4f n %zu\n", m.loss, m.top1_accuracy, m.n_examples);
    return 0;
}

std::vector<double> parse_weights(const std::string& text, std::size_t stages)
{
    if (text.empty())
        return {};
    std::vector<double> w;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        w.push_back(std::stod(item));
    if (w.size() != stages)
        throw ConfigError("--weights needs one value per stage");
    return w;
}

int cmd_enumerate(const std::string& super_text, double budget, const std::string& weights_text, const std::string& out)
{
    const auto sup = Allocation::parse(super_text);
    const SearchSpace space{sup, budget, parse_weights(weights_text, sup.stages())};
    space.validate();
    const auto n = count_space(space);
    if (n > kExhaustiveLimit)
        throw ContractError("space has " + std::to_string(n) + " members; refusing to list more than " +
                            std::to_string(kExhaustiveLimit));
    const auto e = enumerate_space(space);
    std::ostringstream os;
    os << "allocation,size\n";
    for (const auto& a : e.members) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", reweighted_size(a, space.weights()));
        os << a.to_string() << ',' << buf << '\n';
    }
    std::cout << os.str();
    if (e.infeasible)
        std::cerr << "budget is infeasible for " << sup.to_string() << "\n";
    if (!out.empty()) {
        ensure_dir(out);
        write_text(path_in(out, "space.csv"), os.str());
    }
    return 0;
}

int cmd_flops(const std::string& family, const std::string& alloc_text, int input, const std::string& out)
{
    const auto spec = spec_for_family(family, input);
    const auto alloc = Allocation::parse(alloc_text);
    const auto b = flops_breakdown(alloc, spec);
    std::ostringstream os;
    char buf[64];
    os << "family,allocation,input,part,macs,gmacs\n";
    auto row = [&](const std::string& part, double v) {
        std::snprintf(buf, sizeof buf, "%.0f,%.6f", v, v / 1e9);
        os << spec.name << ',' << alloc.to_string() << ',' << input << ',' << part << ',' << buf << '\n';
    };
    row("stem", b.stem);
    for (std::size_t i = 0; i < b.stages.size(); ++i)
        row("stage" + std::to_string(i + 1), b.stages[i]);
    row("head", b.head);
    row("total", b.total);
    std::cout << os.str();
    if (!out.empty()) {
        ensure_dir(out);
        write_text(path_in(out, "flops.csv"), os.str());
    }
    return 0;
}

int cmd_erf(const RunOptions& o, const std::string& checkpoint, const std::string& alloc_text, int extent)
{
    const auto c = resolve(o);
    const auto& t = c.transfer;
    SuperNet net = checkpoint.empty()
                       ? build_supernet(t.super_alloc, t.kind, t.source.n_classes, derive_seed(t.seed, "supernet.init"), t.geometry())
                       : load_supernet(checkpoint);
    if (!alloc_text.empty())
        net = inherit_weights(net, Allocation::parse(alloc_text));
    const int e = extent > 0 ? extent : net.geometry().input_extent;
    const auto r = compute_erf(net, static_cast<std::size_t>(e));
    ensure_dir(c.out_dir);
    std::ostringstream os;
    for (int y = 0; y < e; ++y) {
        for (int x = 0; x < e; ++x) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.9g", r.heatmap[static_cast<std::size_t>(y * e + x)]);
            os << (x ? "," : "") << buf;
        }
        os << '\n';
    }
    write_text(path_in(c.out_dir, "erf_heatmap.csv"), os.str());
    nlohmann::ordered_json j{{"allocation", net.alloc().to_string()},
                             {"extent", e},
                             {"outer_response", r.outer_response},
                             {"total_response", r.heatmap.sum()},
                             {"support", r.support}};
    write_text(path_in(c.out_dir, "erf.json"), j.dump(2) + "\n");
    finish(c, {{"master", t.seed}}, {"erf_heatmap.csv", "erf.json"});
    std::printf("%s outer_response %.6g support %zu\n", net.alloc().to_string().c_str(), r.outer_response, r.support);
    return 0;
}

int cmd_sweep(const RunOptions& o)
{
    const auto c = resolve(o);
    auto seeds = c.sweep_seeds;
    if (o.seed_given)
        seeds = {o.seed};
    const auto result = motivation_sweep(c.transfer, c.sweep_allocations, seeds);
    ensure_dir(c.out_dir);
    std::ostringstream rows, summary;
    write_sweep_csv(result, rows);
    write_sweep_summary_csv(result, summary);
    write_text(path_in(c.out_dir, "sweep.csv"), rows.str());
    write_text(path_in(c.out_dir, "sweep_summary.csv"), summary.str());
    std::map<std::string, std::uint64_t> seed_map{{"master", c.transfer.seed}};
    for (auto s : seeds)
        seed_map["sweep." + std::to_string(s)] = s;
    finish(c, seed_map, {"sweep.csv", "sweep_summary.csv"});
    std::cout << summary.str();
    return 0;
}

int cmd_report(const std::string& run_dir)
{
    const auto manifest_path = path_in(run_dir, "manifest.json");
    if (!fs::exists(manifest_path))
        throw ConfigError("no manifest.json in '" + run_dir + "'");
    const auto bytes = read_bytes(manifest_path);
    const auto manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
    bool ok = true;
    for (const auto& [name, digest] : manifest.at("artifacts").items()) {
        const auto path = path_in(run_dir, name);
        const bool present = fs::exists(path);
        const bool match = present && file_sha256(path) == digest.get<std::string>();
        std::printf("%-24s %s\n", name.c_str(), match ? "ok" : (present ? "DIGEST MISMATCH" : "MISSING"));
        ok = ok && match;
    }
    const auto report_path = path_in(run_dir, "report.json");
    if (fs::exists(report_path)) {
        const auto rb = read_bytes(report_path);
        const auto r = nlohmann::json::parse(rb.begin(), rb.end());
        std::printf("status: %s\n", r.at("status").get<std::string>().c_str());
        for (const auto& row : r.at("per_budget"))
            std::printf("budget %-6g %-12s inherited %.4f final %.4f\n", row.at("budget").get<double>(),
                        row.at("allocation").get<std::string>().c_str(),
                        row.at("inherited").at("top1_accuracy").get<double>(),
                        row.at("weight_search").at("final").at("top1_accuracy").get<double>());
        if (!r.at("baseline").is_null())
            std::printf("baseline %-12s final %.4f\n", r.at("baseline").at("allocation").get<std::string>().c_str(),
                        r.at("baseline").at("weight_search").at("final").at("top1_accuracy").get<double>());
    }
    return ok ? 0 : kExitRuntime;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Joint block-allocation and weight transfer on desk-scale tasks"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    RunOptions run;
    std::string checkpoint, domain = "target", split_name = "val", alloc_text, super_text, weights_text, family = "bottleneck",
                            run_dir;
    double budget = 0;
    int input = 224, extent = 0;

    auto* train_cmd = app.add_subcommand("train-supernet", "train the super-network on the source task");
    add_run_options(train_cmd, run);

    auto* finetune_cmd = app.add_subcommand("finetune-target", "fine-tune a source super-network on the target task");
    add_run_options(finetune_cmd, run);
    finetune_cmd->add_option("--checkpoint", checkpoint, "source super-network checkpoint")->required();

    auto* search_cmd = app.add_subcommand("search", "greedy block search on target validation accuracy");
    add_run_options(search_cmd, run);
    search_cmd->add_option("--checkpoint", checkpoint, "target super-network checkpoint")->required();
    search_cmd->add_option("--budget", budget, "block budget (overrides the config)");

    auto* transfer_cmd = app.add_subcommand("transfer", "run the full pipeline and write a report");
    add_run_options(transfer_cmd, run);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint");
    add_run_options(evaluate_cmd, run);
    evaluate_cmd->add_option("--checkpoint", checkpoint)->required();
    evaluate_cmd->add_option("--domain", domain, "source or target")->capture_default_str();
    evaluate_cmd->add_option("--split", split_name, "val or train")->capture_default_str();
    evaluate_cmd->add_option("--alloc", alloc_text, "evaluate this sub-network (masked)");

    auto* enumerate_cmd = app.add_subcommand("enumerate", "list the allocations of a budget");
    enumerate_cmd->add_option("--super", super_text, "super-network allocation, e.g. 8,10,36,14")->required();
    enumerate_cmd->add_option("--budget", budget)->required();
    enumerate_cmd->add_option("--weights", weights_text, "per-stage cost weights, e.g. 1,2,1");
    enumerate_cmd->add_option("--out", run_dir, "also write space.csv here");

    auto* flops_cmd = app.add_subcommand("flops", "MAC count of an allocation");
    flops_cmd->add_option("--family", family, "bottleneck or mobilenetv2")->capture_default_str();
    flops_cmd->add_option("--alloc", alloc_text)->required();
    flops_cmd->add_option("--input", input, "input resolution")->capture_default_str();
    flops_cmd->add_option("--out", run_dir, "also write flops.csv here");

    auto* erf_cmd = app.add_subcommand("erf", "effective receptive field heatmap");
    add_run_options(erf_cmd, run);
    erf_cmd->add_option("--checkpoint", checkpoint, "network checkpoint (default: fresh super-network)");
    erf_cmd->add_option("--alloc", alloc_text, "inherit this child first");
    erf_cmd->add_option("--extent", extent, "input extent (default: network input)");

    auto* sweep_cmd = app.add_subcommand("motivation-sweep", "equal-size allocations, source vs target accuracy");
    add_run_options(sweep_cmd, run);

    auto* report_cmd = app.add_subcommand("report", "verify a run directory and summarize its report");
    report_cmd->add_option("--run", run_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*train_cmd)
            return cmd_train_supernet(run);
        if (*finetune_cmd)
            return cmd_finetune_target(run, checkpoint);
        if (*search_cmd)
            return cmd_search(run, checkpoint, budget);
        if (*transfer_cmd)
            return cmd_transfer(run);
        if (*evaluate_cmd)
            return cmd_evaluate(run, checkpoint, domain, split_name, alloc_text);
        if (*enumerate_cmd)
            return cmd_enumerate(super_text, budget, weights_text, run_dir);
        if (*flops_cmd)
            return cmd_flops(family, alloc_text, input, run_dir);
        if (*erf_cmd)
            return cmd_erf(run, checkpoint, alloc_text, extent);
        if (*sweep_cmd)
            return cmd_sweep(run);
        if (*report_cmd)
            return cmd_report(run_dir);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "invalid arguments: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitConfig;
}
