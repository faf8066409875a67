#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cli.hpp"

int main(int argc, char** argv) {
    using namespace mmi::cli;
    CLI::App app{"Monotone multi-index model estimation: generate data, fit, evaluate, sweep, check nets"};
    app.require_subcommand(1);

    Args args;
    std::uint64_t seed = 0;
    std::string mode;
    std::size_t nmc = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config, "Flat JSON config file");
        sub->add_option("--out", args.out, "Output directory (created if missing)");
        sub->add_option("--seed", seed, "Seed overriding the config");
    };

    CLI::App* gen = app.add_subcommand("generate", "Draw a synthetic dataset and its metadata sidecar");
    add_common(gen);
    gen->get_option("--config")->required();

    CLI::App* fit = app.add_subcommand("fit", "Fit a model on a dataset (sidecar must sit next to the CSV)");
    add_common(fit);
    fit->add_option("--data", args.data, "Dataset CSV")->required();
    fit->add_option("--mode", mode, "Interpolation mode")->check(CLI::IsMember({"step", "lipschitz"}));
    fit->add_option("--nmc", nmc, "Monte-Carlo draws for l2LossMC");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a model against the ground truth of a sidecar");
    add_common(eval);
    eval->add_option("--model", args.model, "Model JSON")->required();
    eval->add_option("--truth", args.truth, "Metadata sidecar of the generating dataset")->required();
    eval->add_option("--nmc", nmc, "Monte-Carlo draws");

    CLI::App* sweep = app.add_subcommand("sweep", "Fit over a grid of (n, d, seed) and write a long CSV");
    add_common(sweep);
    sweep->get_option("--config")->required();
    sweep->add_option("--mode", mode, "Interpolation mode")->check(CLI::IsMember({"step", "lipschitz"}));

    CLI::App* net = app.add_subcommand("netcheck", "Empirical near-net coverage against the lemma bound");
    add_common(net);
    net->get_option("--config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUserError;
    }

    for (CLI::App* sub : {gen, fit, eval, sweep, net}) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) args.seed = seed;
        if (sub->get_option_no_throw("--mode") && sub->count("--mode")) args.mode = mode;
        if (sub->get_option_no_throw("--nmc") && sub->count("--nmc")) args.nmc = nmc;
    }
    if (gen->parsed()) return run_command(cmd_generate, args, std::cout, std::cerr);
    if (fit->parsed()) return run_command(cmd_fit, args, std::cout, std::cerr);
    if (eval->parsed()) return run_command(cmd_eval, args, std::cout, std::cerr);
    if (sweep->parsed()) return run_command(cmd_sweep, args, std::cout, std::cerr);
    return run_command(cmd_netcheck, args, std::cout, std::cerr);
}
