#include "cli.hpp"

#include <splitsolve/audit.hpp>
#include <splitsolve/campaign.hpp>
#include <splitsolve/search.hpp>
#include <splitsolve/semigroup.hpp>
#include <splitsolve/split.hpp>
#include <splitsolve/unit_file.hpp>
#include <splitsolve/wire.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <thread>
#include <unistd.h>

namespace splitsolve::cli {

namespace fs = std::filesystem;
using namespace std::chrono;

namespace {
    struct GenArgs {
        int order = 0;
        bool no_symmetry_breaking = false;
        bool exclude_zero = false;
        std::int64_t budget_ms = 0;
        int arity = 2;
        std::string out;
    };

    struct SolveArgs {
        std::string model;
        std::optional<std::int64_t> budget_ms;
        std::optional<int> arity;
        bool stream = false;
        std::string split_dir;
    };

    struct MasterArgs {
        std::string spool;
        std::string campaign = "campaign";
        std::string model;
        std::int64_t budget_ms = 0;
        int arity = 2;
        int workers = 1;
        std::int64_t lease_ms = 0;
        std::optional<std::uint64_t> seed;
        std::optional<std::uint64_t> node_limit;
        std::uint64_t check_interval = 512;
        std::string listen;
    };

    struct WorkerArgs {
        std::string spool;
        std::string campaign = "campaign";
        std::string master;
        std::string worker_id;
        std::optional<std::int64_t> budget_ms;
        std::optional<int> arity;
        std::int64_t poll_ms = 50;
    };

    struct AuditArgs {
        std::string spool;
        std::string campaign = "campaign";
        bool deep = false;
        std::string report;
    };

    struct OracleArgs {
        int order = 0;
        std::string mode = "canonical";
    };

    auto run_gen(const GenArgs & a, std::ostream & out) -> int
    {
        auto m = semigroup::build_model(a.order, {! a.no_symmetry_breaking, a.exclude_zero});
        m.options.budget_ms = a.budget_ms;
        m.options.arity = a.arity;
        write_unit(m, a.out);
        out << "wrote " << a.out << ": " << m.variable_count() << " variables, " << m.constraints.size()
            << " constraints\n";
        return kExitOk;
    }

    auto run_solve(const SolveArgs & a, std::ostream & out) -> int
    {
        Model m = read_unit(a.model);
        auto limits = limits_from_options(m.options);
        if (a.budget_ms)
            limits.budget = *a.budget_ms > 0 ? std::optional<milliseconds>{*a.budget_ms} : std::nullopt;

        SolutionSink sink;
        if (a.stream)
            sink = [&](std::span<const int> values) {
                out << "solution:";
                for (int v : values)
                    out << " " << v;
                out << "\n";
            };

        auto outcome = solve(m, limits, sink);
        const auto & stats = stats_of(outcome);
        out << "solutions: " << stats.solution_count << "\n";
        out << "nodes: " << stats.node_count << "\n";
        out << "time_ms: " << stats.wall_time.count() << "\n";
        if (auto * stopped = std::get_if<Stopped>(&outcome)) {
            out << "status: stopped\n";
            if (! a.split_dir.empty()) {
                SplitConfig cfg{a.arity.value_or(m.options.arity), limits.budget.value_or(milliseconds{0})};
                fs::create_directories(a.split_dir);
                for (auto & child : split_model(m, stopped->resume, cfg)) {
                    auto path = fs::path(a.split_dir) / (child.lineage->unit_id + ".model");
                    write_unit(child, path);
                    out << "child: " << path.string() << "\n";
                }
            }
        }
        else {
            out << "status: exhausted\n";
        }
        return kExitOk;
    }

    auto run_master(const MasterArgs & a, std::ostream & out) -> int
    {
        CampaignConfig cfg;
        cfg.spool = a.spool;
        cfg.campaign_id = a.campaign;
        cfg.root_model = a.model;
        cfg.budget = milliseconds{a.budget_ms};
        cfg.arity = a.arity;
        cfg.worker_count = a.workers;
        cfg.lease_duration = milliseconds{a.lease_ms};
        cfg.node_limit = a.node_limit;
        cfg.check_interval = a.check_interval;
        if (a.seed)
            cfg.fault_plan = FaultPlan::kill_each_worker_once(a.workers, *a.seed);
        if (! a.listen.empty()) {
            cfg.listen = a.listen;
            cfg.on_listen = [&](std::uint16_t port) { out << "listening: " << port << std::endl; };
        }
        if (! WorkQueue::exists(cfg.spool, cfg.campaign_id) && a.model.empty())
            throw std::invalid_argument("--model is required to start a new campaign");

        auto s = run_campaign(cfg);
        out << "solutions: " << s.total_solutions << "\n";
        out << "units: " << s.unit_count << "\n";
        out << "split_units: " << s.split_units << "\n";
        out << "max_depth: " << s.max_depth << "\n";
        out << "duplicates: " << s.duplicates << "\n";
        out << "requeued: " << s.requeued << "\n";
        out << "kills: " << s.kills << "\n";
        out << "resumed: " << (s.resumed ? "yes" : "no") << "\n";
        out << "wall_ms: " << s.wall_time.count() << "\n";
        return kExitOk;
    }

    auto run_worker_command(const WorkerArgs & a, std::ostream & out) -> int
    {
        ExecuteOptions opts;
        opts.use_unit_options = ! a.budget_ms && ! a.arity;
        opts.budget = milliseconds{a.budget_ms.value_or(0)};
        opts.arity = a.arity.value_or(2);
        const std::string id = a.worker_id.empty() ? "w" + std::to_string(::getpid()) : a.worker_id;
        const auto poll = milliseconds{a.poll_ms};

        std::size_t done = 0;
        if (! a.master.empty()) {
            auto [host, port] = parse_endpoint(a.master);
            WireClient client(host, port);
            try {
                done = run_worker(client, id, opts, {}, poll);
            }
            catch (const WireError & e) {
                out << "master gone: " << e.what() << "\n";
            }
        }
        else {
            auto queue = WorkQueue::open(a.spool, a.campaign);
            LocalQueueClient client(queue);
            done = run_worker(
                client, id, opts,
                [&] {
                    queue.requeue_expired();
                    return queue.finished();
                },
                poll);
        }
        out << "units: " << done << "\n";
        return kExitOk;
    }

    auto run_audit(const AuditArgs & a, std::ostream & out) -> int
    {
        auto tree = load_lineage(a.spool, a.campaign);
        auto report = verify_tree(tree, AuditOptions{a.deep});
        auto doc = report.to_json().dump(2) + "\n";
        if (! a.report.empty())
            write_file_atomic(a.report, doc);
        out << report.summary() << doc;
        return report.ok() ? kExitOk : kExitAuditFailed;
    }

    auto run_oracle(const OracleArgs & a, std::ostream & out) -> int
    {
        auto mode = a.mode == "labeled" ? semigroup::CountMode::labeled : semigroup::CountMode::canonical;
        out << semigroup::brute_force_count(a.order, mode) << "\n";
        return kExitOk;
    }
}

auto dispatch(const std::vector<std::string> & args, std::ostream & out, std::ostream & err) -> int
{
    CLI::App app{"Split-and-resume constraint search with a fault-tolerant work queue", "splitsolve"};
    app.require_subcommand(1);

    GenArgs gen;
    auto * gen_cmd = app.add_subcommand("gen", "Write the semigroup model of one order");
    gen_cmd->add_option("--order", gen.order, "Order n")->required()->check(CLI::Range(1, semigroup::kMaxOrder));
    gen_cmd->add_flag("--no-symmetry-breaking", gen.no_symmetry_breaking, "Count labeled tables");
    gen_cmd->add_flag("--exclude-zero-products", gen.exclude_zero, "Require a non-zero triple product");
    gen_cmd->add_option("--budget-ms", gen.budget_ms, "Budget stored in the unit (0 = unlimited)")
        ->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--arity", gen.arity, "Split arity stored in the unit")->check(CLI::Range(2, 64));
    gen_cmd->add_option("--out", gen.out, "Output unit file")->required();

    SolveArgs solve_args;
    auto * solve_cmd = app.add_subcommand("solve", "Solve one unit sequentially");
    solve_cmd->add_option("model", solve_args.model, "Unit file")->required();
    solve_cmd->add_option("--budget-ms", solve_args.budget_ms, "Override the unit budget (0 = unlimited)")
        ->check(CLI::NonNegativeNumber);
    solve_cmd->add_option("--arity", solve_args.arity, "Split arity for --split-dir")->check(CLI::Range(2, 64));
    solve_cmd->add_flag("--stream", solve_args.stream, "Print every solution");
    solve_cmd->add_option("--split-dir", solve_args.split_dir, "Write child units here when the budget runs out");

    MasterArgs master;
    auto * master_cmd = app.add_subcommand("master", "Run a campaign over a spool directory");
    master_cmd->add_option("--spool", master.spool, "Spool directory")->required();
    master_cmd->add_option("--campaign", master.campaign, "Campaign id");
    master_cmd->add_option("--model", master.model, "Root unit file (new campaigns)");
    master_cmd->add_option("--budget-ms", master.budget_ms, "Budget per unit (0 = unlimited)")
        ->check(CLI::NonNegativeNumber);
    master_cmd->add_option("--arity", master.arity, "Children per split")->check(CLI::Range(2, 64));
    master_cmd->add_option("--workers", master.workers, "In-process workers")->check(CLI::NonNegativeNumber);
    master_cmd->add_option("--lease-ms", master.lease_ms, "Lease duration (0 = 3 x budget + 30 s)")
        ->check(CLI::NonNegativeNumber);
    master_cmd->add_option("--seed", master.seed, "Kill every in-process worker once, seeded");
    master_cmd->add_option("--node-limit", master.node_limit, "Stop each unit after this many nodes");
    master_cmd->add_option("--check-interval", master.check_interval, "Nodes between clock checks")
        ->check(CLI::PositiveNumber);
    master_cmd->add_option("--listen", master.listen, "Serve remote workers on host:port");

    WorkerArgs worker;
    auto * worker_cmd = app.add_subcommand("worker", "Pull and solve units until the campaign ends");
    auto * worker_spool = worker_cmd->add_option("--spool", worker.spool, "Shared spool directory");
    worker_cmd->add_option("--campaign", worker.campaign, "Campaign id");
    auto * worker_master = worker_cmd->add_option("--master", worker.master, "Master host:port");
    worker_spool->excludes(worker_master);
    worker_cmd->add_option("--worker-id", worker.worker_id, "Worker id (default w<pid>)");
    worker_cmd->add_option("--budget-ms", worker.budget_ms, "Override the unit budget")->check(CLI::NonNegativeNumber);
    worker_cmd->add_option("--arity", worker.arity, "Override the unit arity")->check(CLI::Range(2, 64));
    worker_cmd->add_option("--poll-ms", worker.poll_ms, "Idle poll interval")->check(CLI::PositiveNumber);

    AuditArgs audit;
    auto * audit_cmd = app.add_subcommand("audit", "Verify a campaign's lineage and totals");
    audit_cmd->add_option("--spool", audit.spool, "Spool directory")->required();
    audit_cmd->add_option("--campaign", audit.campaign, "Campaign id");
    audit_cmd->add_flag("--deep", audit.deep, "Also check every split partition");
    audit_cmd->add_option("--report", audit.report, "Write the JSON report here");

    OracleArgs oracle;
    auto * oracle_cmd = app.add_subcommand("oracle", "Count semigroups by exhaustive enumeration (n <= 3)");
    oracle_cmd->add_option("--order", oracle.order, "Order n")->required()->check(CLI::Range(1, 3));
    oracle_cmd->add_option("--mode", oracle.mode, "labeled or canonical")
        ->check(CLI::IsMember({"labeled", "canonical"}));

    std::vector<const char *> argv{"splitsolve"};
    for (auto & a : args)
        argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    }
    catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    }
    catch (const CLI::ParseError & e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    if (worker_cmd->parsed() && worker.spool.empty() && worker.master.empty()) {
        err << "error: worker needs --spool or --master\n\n" << worker_cmd->help();
        return kExitUsage;
    }

    try {
        if (gen_cmd->parsed())
            return run_gen(gen, out);
        if (solve_cmd->parsed())
            return run_solve(solve_args, out);
        if (master_cmd->parsed())
            return run_master(master, out);
        if (worker_cmd->parsed())
            return run_worker_command(worker, out);
        if (audit_cmd->parsed())
            return run_audit(audit, out);
        if (oracle_cmd->parsed())
            return run_oracle(oracle, out);
    }
    catch (const std::exception & e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}

} // namespace splitsolve::cli
