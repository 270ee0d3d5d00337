#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hamapprox/core.hpp"
#include "hamapprox/exact.hpp"
#include "hamapprox/expander.hpp"
#include "hamapprox/generators.hpp"
#include "hamapprox/io.hpp"
#include "hamapprox/linearize.hpp"
#include "hamapprox/mixing.hpp"
#include "hamapprox/net.hpp"
#include "hamapprox/pipeline.hpp"
#include "hamapprox/rng.hpp"
#include "hamapprox/sdp.hpp"

namespace {

using hamapprox::core::HamiltonianInstance;
using nlohmann::json;

void write_output(const json& j, const std::string& path) {
    if (path.empty()) {
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) throw hamapprox::linearizer::ParameterError("cannot open output file " + path);
    out << j.dump(2) << "\n";
}

HamiltonianInstance generate_family(const std::string& family, int n, int k, int d,
                                    std::uint64_t seed) {
    namespace gen = hamapprox::pipeline;
    if (family == "epr-chain") return gen::epr_chain(n);
    if (family == "w") return gen::w_clause();
    if (family == "tensor-epr") return gen::tensor_epr_clause(k);
    if (family == "epr-w") return gen::epr_w_clause();
    if (family == "maxent") return gen::maxent_qudit_clause(d);
    if (family == "random-dense") return gen::random_dense(n, k, d, seed);
    throw hamapprox::linearizer::ParameterError("unknown family " + family);
}

json assignment_to_json(const hamapprox::core::ProductAssignment& a) {
    json arr = json::array();
    for (const auto& rho : a.rho) arr.push_back(hamapprox::core::matrix_to_json(rho));
    return arr;
}

int default_workers() {
    if (const char* env = std::getenv("HAMAPPROX_WORKERS")) {
        const int w = std::atoi(env);
        if (w >= 1) return w;
    }
    return 1;
}

struct ApproximateArgs {
    std::string file;
    std::string mode = "desk";
    double eps = 0.1;
    int sample_size = 2;
    double delta = 0.5;
    std::optional<double> f_override;
    std::uint64_t seed = 1;
    int repetitions = 1;
    bool derandomize = false;
    std::uint64_t max_walks = 0;
    double candidate_budget = 2.2e7;
    double net_budget = 16777216.0;
    int workers = 0;
    int solver_max_iters = 60000;
    std::string dump_sdp;
    std::string solver_trace;
    std::string out;
};

json run_approximate(const ApproximateArgs& args) {
    const auto inst = hamapprox::core::load_instance(args.file);
    hamapprox::pipeline::ApproximateConfig cfg;
    cfg.eps = args.eps;
    cfg.mode = args.mode == "theoretical" ? hamapprox::pipeline::RunMode::theoretical
                                          : hamapprox::pipeline::RunMode::desk;
    if (args.mode != "desk" && args.mode != "theoretical")
        throw hamapprox::linearizer::ParameterError("mode must be desk or theoretical");
    cfg.sample_size = args.sample_size;
    cfg.net_delta = args.delta;
    cfg.f_override = args.f_override;
    cfg.seed = args.seed;
    cfg.repetitions = args.repetitions;
    cfg.derandomize = args.derandomize;
    cfg.max_walks = args.max_walks;
    cfg.candidate_budget = args.candidate_budget;
    cfg.net_budget = args.net_budget;
    cfg.workers = args.workers > 0 ? args.workers : default_workers();
    cfg.solver_max_iters = args.solver_max_iters;

    const auto report = hamapprox::pipeline::approximate(inst, cfg);

    if (!args.dump_sdp.empty() || !args.solver_trace.empty()) {
        const auto sdp = hamapprox::pipeline::rebuild_best_sdp(inst, report);
        if (!args.dump_sdp.empty())
            write_output(hamapprox::linearizer::sdp_to_json(sdp), args.dump_sdp);
        if (!args.solver_trace.empty()) {
            std::ofstream trace(args.solver_trace);
            if (!trace)
                throw hamapprox::linearizer::ParameterError("cannot open trace file " +
                                                            args.solver_trace);
            hamapprox::sdp_solver::SolveOptions opts;
            opts.eps_sdp = report.params.eps_sdp;
            opts.max_iters = args.solver_max_iters;
            opts.trace = &trace;
            hamapprox::sdp_solver::solve_sdp(sdp, opts);
        }
    }

    json j;
    j["value"] = report.value;
    j["alpha"] = report.alpha;
    j["candidates"] = report.candidates;
    j["feasible"] = report.feasible;
    j["infeasible"] = report.infeasible;
    j["unsolved"] = report.unsolved;
    j["best_candidate"] = report.best_candidate;
    j["sample"] = json::array();
    for (int s : report.sample) j["sample"].push_back(s + 1);
    j["params"] = {{"f", report.params.f},         {"g", report.params.g},
                   {"delta", report.params.delta}, {"eps", report.params.eps},
                   {"eps_sdp", report.params.eps_sdp}, {"seed", report.params.seed}};
    j["net"] = {{"size", report.net_size}, {"delta", report.net_delta}};
    j["derandomized"] = report.derandomized;
    if (report.derandomized) j["walk_id"] = report.walk_id;
    j["repetition"] = report.repetition;
    j["seconds"] = report.seconds;
    j["derivation"] = report.derivation;
    j["assignment"] = assignment_to_json(report.assignment);
    return j;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"product-state approximation toolkit for k-local Hamiltonians on qudits"};
    app.require_subcommand(1);

    // gen
    auto* gen_cmd = app.add_subcommand("gen", "generate an instance file");
    std::string gen_family = "epr-chain", gen_out;
    int gen_n = 4, gen_k = 2, gen_d = 2;
    std::uint64_t gen_seed = 1;
    gen_cmd->add_option("family", gen_family,
                        "epr-chain | w | tensor-epr | epr-w | maxent | random-dense")
        ->required();
    gen_cmd->add_option("--n", gen_n, "number of qudits");
    gen_cmd->add_option("--k", gen_k, "locality");
    gen_cmd->add_option("--d", gen_d, "local dimension");
    gen_cmd->add_option("--seed", gen_seed, "random seed");
    gen_cmd->add_option("-o,--out", gen_out, "output file (default stdout)");
    gen_cmd->callback([&] {
        const auto inst = generate_family(gen_family, gen_n, gen_k, gen_d, gen_seed);
        write_output(hamapprox::core::instance_to_json(inst), gen_out);
    });

    // exact
    auto* exact_cmd = app.add_subcommand("exact", "largest eigenvalue by dense diagonalization");
    std::string exact_file, exact_out;
    exact_cmd->add_option("file", exact_file, "instance file")->required();
    exact_cmd->add_option("-o,--out", exact_out, "output file (default stdout)");
    exact_cmd->callback([&] {
        const auto inst = hamapprox::core::load_instance(exact_file);
        const auto res = hamapprox::exact_oracle::exact_opt(inst);
        write_output({{"opt", res.opt}, {"residual", res.residual}}, exact_out);
    });

    // product-opt
    auto* prod_cmd = app.add_subcommand("product-opt", "best product state by grid plus ascent");
    std::string prod_file, prod_out;
    int prod_resolution = 8, prod_starts = 32, prod_sweeps = 500;
    std::uint64_t prod_seed = 12345;
    prod_cmd->add_option("file", prod_file, "instance file")->required();
    prod_cmd->add_option("--resolution", prod_resolution, "grid points per angle");
    prod_cmd->add_option("--starts", prod_starts, "random ascent starts");
    prod_cmd->add_option("--sweeps", prod_sweeps, "max ascent sweeps");
    prod_cmd->add_option("--seed", prod_seed, "random seed");
    prod_cmd->add_option("-o,--out", prod_out, "output file (default stdout)");
    prod_cmd->callback([&] {
        const auto inst = hamapprox::core::load_instance(prod_file);
        hamapprox::exact_oracle::ProductOptOptions opts;
        opts.resolution = prod_resolution;
        opts.ascent_starts = prod_starts;
        opts.max_sweeps = prod_sweeps;
        opts.seed = prod_seed;
        const auto res = hamapprox::exact_oracle::brute_force_product_opt(inst, opts);
        write_output({{"value", res.value}, {"method", res.method}}, prod_out);
    });

    // mixing
    auto* mix_cmd = app.add_subcommand(
        "mixing", "product ensemble of the top eigenvector and its best member");
    std::string mix_file, mix_out;
    std::size_t mix_members = 4096;
    mix_cmd->add_option("file", mix_file, "instance file")->required();
    mix_cmd->add_option("--max-members", mix_members, "ensemble truncation size");
    mix_cmd->add_option("-o,--out", mix_out, "output file (default stdout)");
    mix_cmd->callback([&] {
        const auto inst = hamapprox::core::load_instance(mix_file);
        const auto res = hamapprox::exact_oracle::exact_opt(inst);
        const auto ens = hamapprox::mixing::rsd_mixture(res.state, inst.n, inst.d, mix_members);
        const auto best = hamapprox::mixing::best_product_member(inst, ens);
        const auto purified =
            hamapprox::mixing::purify_by_conditional_expectations(inst, best.assignment);
        const double purified_value = hamapprox::core::assignment_value(inst, purified);
        write_output({{"opt", res.opt},
                      {"best_member", best.value},
                      {"purified", purified_value},
                      {"ratio", res.opt > 0 ? best.value / res.opt : 1.0},
                      {"members", ens.p.size()},
                      {"truncated", ens.truncated}},
                     mix_out);
    });

    // net
    auto* net_cmd = app.add_subcommand("net", "delta-net counts and coverage probe");
    int net_d = 2;
    double net_delta = 0.5, net_budget = 16777216.0;
    int net_probe = 0;
    std::uint64_t net_seed = 1;
    std::string net_out;
    net_cmd->add_option("--d", net_d, "local dimension");
    net_cmd->add_option("--delta", net_delta, "net resolution");
    net_cmd->add_option("--budget", net_budget, "maximum net size");
    net_cmd->add_option("--probe", net_probe, "random densities to round");
    net_cmd->add_option("--seed", net_seed, "probe seed");
    net_cmd->add_option("-o,--out", net_out, "output file (default stdout)");
    net_cmd->callback([&] {
        const auto net = hamapprox::net_sampling::build_net(net_d, net_delta, net_budget);
        json j{{"d", net_d},
               {"delta", net_delta},
               {"diag_count", net.diag_count()},
               {"offdiag_count", net.offdiag_count()},
               {"size", net.size()}};
        if (net_probe > 0) {
            hamapprox::util::Rng rng(net_seed);
            double worst = 0.0;
            for (int t = 0; t < net_probe; ++t) {
                hamapprox::core::Mat g(net_d, net_d);
                for (int r = 0; r < net_d; ++r)
                    for (int c = 0; c < net_d; ++c)
                        g(r, c) = hamapprox::core::cxd(rng.normal(), rng.normal());
                hamapprox::core::Mat rho = g * g.adjoint();
                rho /= rho.trace().real();
                worst = std::max(worst, net.nearest_distance(rho));
            }
            j["probe"] = net_probe;
            j["max_entry_distance"] = worst;
            j["covered"] = worst <= net_delta;
        }
        write_output(j, net_out);
    });

    // approximate
    auto* approx_cmd = app.add_subcommand("approximate", "sampling + linearization pipeline");
    ApproximateArgs aa;
    double f_value = 0.0;
    bool f_given = false;
    approx_cmd->add_option("file", aa.file, "instance file")->required();
    approx_cmd->add_option("--mode", aa.mode, "desk | theoretical");
    approx_cmd->add_option("--eps", aa.eps, "error budget");
    approx_cmd->add_option("--sample-size", aa.sample_size, "desk mode qudit samples");
    approx_cmd->add_option("--delta", aa.delta, "desk mode net resolution");
    approx_cmd->add_option("--f", f_value, "override the union bound exponent")
        ->each([&](const std::string&) { f_given = true; });
    approx_cmd->add_option("--seed", aa.seed, "random seed");
    approx_cmd->add_option("--repetitions", aa.repetitions, "independent repetitions");
    approx_cmd->add_flag("--derandomize", aa.derandomize, "enumerate expander walks");
    approx_cmd->add_option("--max-walks", aa.max_walks, "cap on enumerated walks (0 = all)");
    approx_cmd->add_option("--candidate-budget", aa.candidate_budget, "max programs to solve");
    approx_cmd->add_option("--net-budget", aa.net_budget, "max net size");
    approx_cmd->add_option("--workers", aa.workers, "threads (default HAMAPPROX_WORKERS or 1)");
    approx_cmd->add_option("--solver-max-iters", aa.solver_max_iters, "solver iteration cap");
    approx_cmd->add_option("--dump-sdp", aa.dump_sdp, "write the winning program as JSON");
    approx_cmd->add_option("--solver-trace", aa.solver_trace, "re-solve the winner with a CSV trace");
    approx_cmd->add_option("-o,--out", aa.out, "output file (default stdout)");
    approx_cmd->callback([&] {
        if (f_given) aa.f_override = f_value;
        write_output(run_approximate(aa), aa.out);
    });

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "compare oracles and the pipeline on a family");
    std::string bench_family = "epr-chain", bench_out;
    std::vector<int> bench_ns{4};
    int bench_k = 2, bench_d = 2, bench_sample = 2;
    double bench_delta = 0.5;
    std::uint64_t bench_seeds = 1;
    bench_cmd->add_option("--family", bench_family, "instance family");
    bench_cmd->add_option("--sizes,--n", bench_ns, "qudit counts (comma separated)")
        ->delimiter(',');
    bench_cmd->add_option("--k", bench_k, "locality");
    bench_cmd->add_option("--d", bench_d, "local dimension");
    bench_cmd->add_option("--sample-size", bench_sample, "desk mode samples");
    bench_cmd->add_option("--delta", bench_delta, "net resolution");
    bench_cmd->add_option("--seeds", bench_seeds, "seeds tried per size (1..N)");
    bench_cmd->add_option("-o,--out", bench_out, "CSV output file (default stdout)");
    bench_cmd->callback([&] {
        std::ostringstream csv;
        csv << "family,n,d,k,seed,opt,product_opt,mixing_value,approx_value,ratio,candidates,"
               "infeasible,seconds\n";
        for (int n : bench_ns) {
            for (std::uint64_t seed = 1; seed <= bench_seeds; ++seed) {
                const auto inst = generate_family(bench_family, n, bench_k, bench_d, seed);
                const auto exact = hamapprox::exact_oracle::exact_opt(inst);
                const auto prod = hamapprox::exact_oracle::brute_force_product_opt(inst);
                const auto ens =
                    hamapprox::mixing::rsd_mixture(exact.state, inst.n, inst.d, 4096);
                const auto member = hamapprox::mixing::best_product_member(inst, ens);
                hamapprox::pipeline::ApproximateConfig cfg;
                cfg.sample_size = bench_sample;
                cfg.net_delta = bench_delta;
                cfg.seed = seed;
                cfg.workers = default_workers();
                const auto report = hamapprox::pipeline::approximate(inst, cfg);
                csv << bench_family << ',' << inst.n << ',' << inst.d << ',' << inst.k << ','
                    << seed << ',' << exact.opt << ',' << prod.value << ',' << member.value
                    << ',' << report.value << ','
                    << (prod.value > 0 ? report.value / prod.value : 1.0) << ','
                    << report.candidates << ',' << report.infeasible << ',' << report.seconds
                    << "\n";
            }
        }
        if (bench_out.empty()) {
            std::cout << csv.str();
        } else {
            std::ofstream out(bench_out);
            if (!out)
                throw hamapprox::linearizer::ParameterError("cannot open output file " + bench_out);
            out << csv.str();
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const hamapprox::pipeline::AllInfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const hamapprox::linearizer::ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const hamapprox::core::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
