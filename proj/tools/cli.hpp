#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "mmi/mmi.hpp"

namespace mmi::cli {

enum ExitCode : int { kOk = 0, kUserError = 2, kEnvError = 3 };

// Exit-code classes for problems detected by the front end itself.
struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EnvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Arguments shared by all subcommands; each command reads the ones it needs.
struct Args {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::string data;   // fit: dataset CSV
    std::string model;  // eval: model JSON
    std::string truth;  // eval: metadata sidecar
    std::optional<std::size_t> nmc;
};

// Flat JSON object whose keys are checked against a per-command whitelist.
class Config {
public:
    Config() = default;

    static Config load(const std::string& path, const std::set<std::string>& allowed) {
        Config c;
        if (path.empty()) return c;
        std::string text;
        try {
            text = read_text_file(path);
        } catch (const IoError& e) {
            throw EnvError(e.what());
        }
        try {
            c.j_ = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw UserError("config '" + path + "' is not valid JSON: " + e.what());
        }
        if (!c.j_.is_object()) throw UserError("config '" + path + "' must be a JSON object");
        for (const auto& item : c.j_.items())
            if (!allowed.count(item.key())) throw UserError("config has unknown field '" + item.key() + "'");
        return c;
    }

    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

    template <class T>
    T get(const std::string& key) const {
        if (!has(key)) throw UserError("config is missing field '" + key + "'");
        try {
            return j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw UserError("config field '" + key + "' has the wrong type");
        }
    }

    template <class T>
    T get_or(const std::string& key, T fallback) const {
        return has(key) ? get<T>(key) : fallback;
    }

private:
    nlohmann::json j_;
};

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw EnvError("cannot create output directory '" + dir + "'");
}

inline std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline std::string csv_row(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_double(values[i]);
    return out + "\n";
}

inline const std::set<std::string> kConstantKeys{"d", "k", "sStar", "r", "C", "b", "eta"};

inline ModelConstants constants_from_config(const Config& cfg) {
    ModelConstants c;
    c.d = cfg.get<std::size_t>("d");
    c.k = cfg.get<std::size_t>("k");
    c.sStar = cfg.get<std::size_t>("sStar");
    c.r = cfg.get<double>("r");
    c.C = cfg.get<double>("C");
    c.b = cfg.get<double>("b");
    c.eta = cfg.get<double>("eta");
    return c;
}

inline std::set<std::string> with_keys(std::set<std::string> base, std::initializer_list<std::string> extra) {
    base.insert(extra.begin(), extra.end());
    return base;
}

inline const std::set<std::string> kFitKeys{"N0",     "seed",     "mode",     "lambda",      "tau",  "admmRho",
                                            "maxIter", "primalTol", "dualTol", "penaltySign", "nMC", "enumerationBudget"};

inline FitOptions fit_options_from_config(const Config& cfg, const Args& args, std::uint64_t seed) {
    FitOptions o;
    o.N0 = cfg.get_or<std::size_t>("N0", 32);
    if (o.N0 < 1) throw UserError("config field 'N0' must be at least 1");
    o.netSeed = derive_seed(seed, "net");
    o.mode = parse_fit_mode(args.mode.value_or(cfg.get_or<std::string>("mode", "step")));
    if (cfg.has("lambda")) o.lambda = cfg.get<double>("lambda");
    if (cfg.has("tau")) o.tau = cfg.get<double>("tau");
    o.sdp.admmRho = cfg.get_or<double>("admmRho", o.sdp.admmRho);
    o.sdp.maxIter = cfg.get_or<std::size_t>("maxIter", o.sdp.maxIter);
    o.sdp.primalTol = cfg.get_or<double>("primalTol", o.sdp.primalTol);
    o.sdp.dualTol = cfg.get_or<double>("dualTol", o.sdp.dualTol);
    const std::string sign = cfg.get_or<std::string>("penaltySign", "subtract");
    if (sign == "subtract") o.sdp.penaltySign = PenaltySign::Subtract;
    else if (sign == "add-as-printed") o.sdp.penaltySign = PenaltySign::AddAsPrinted;
    else throw UserError("config field 'penaltySign' must be 'subtract' or 'add-as-printed'");
    o.search.enumerationBudget = cfg.get_or<std::size_t>("enumerationBudget", o.search.enumerationBudget);
    return o;
}

// ---------------------------------------------------------------------------

inline int cmd_generate(const Args& args, std::ostream& log) {
    const Config cfg = Config::load(args.config, with_keys(kConstantKeys, {"n", "seed"}));
    ModelConstants c = constants_from_config(cfg);
    const auto n = cfg.get<std::size_t>("n");
    if (n < 1) throw UserError("config field 'n' must be at least 1");
    const std::uint64_t seed = args.seed.value_or(cfg.get<std::uint64_t>("seed"));

    const GroundTruth gt = make_ground_truth(c, seed);
    const Dataset data = sample_dataset(gt, n, derive_seed(seed, "data"));
    ensure_dir(args.out);
    write_text_file(join(args.out, "data.csv"), dataset_to_csv(data));
    write_text_file(join(args.out, "data.meta.json"), metadata_to_json({gt.constants, seed, n}));
    log << "wrote " << n << " samples to " << join(args.out, "data.csv") << "\n";
    return kOk;
}

inline std::string sidecar_for(const std::string& csv) {
    std::filesystem::path p(csv);
    return (p.parent_path() / (p.stem().string() + ".meta.json")).string();
}

inline int cmd_fit(const Args& args, std::ostream& log) {
    const Config cfg = Config::load(args.config, kFitKeys);
    if (args.data.empty()) throw UserError("fit needs --data <dataset.csv>");
    const auto start = std::chrono::steady_clock::now();

    const DatasetMetadata meta = metadata_from_json(read_text_file(sidecar_for(args.data)));
    auto [x, y] = dataset_from_csv(read_text_file(args.data));
    if (static_cast<std::size_t>(x.cols()) != meta.constants.d)
        throw UserError("dataset has " + std::to_string(x.cols()) + " covariates but the sidecar says d = " +
                        std::to_string(meta.constants.d));
    if (y.size() % 2 != 0) throw UserError("sample split requires even N (dataset has " + std::to_string(y.size()) + " rows)");

    const GroundTruth gt = make_ground_truth(meta.constants, meta.seed);
    const Dataset data{std::move(x), std::move(y), gt.constants};
    const std::uint64_t seed = args.seed.value_or(cfg.get_or<std::uint64_t>("seed", 1));
    const FitOptions opts = fit_options_from_config(cfg, args, seed);
    const std::size_t nmc = args.nmc.value_or(cfg.get_or<std::size_t>("nMC", 10000));
    if (nmc < 1) throw UserError("config field 'nMC' must be at least 1");

    ModelFile model;
    model.fit = fit_mmi(data, opts);
    model.constants = gt.constants;
    model.dataSeed = meta.seed;
    model.netSeed = opts.netSeed;
    model.N0 = opts.N0;

    const double l2 = l2_loss_mc(FittedModel(model.fit).as_function(), gt, nmc, derive_seed(seed, "eval")).value;
    const double pd = procrustes_dist(model.fit.Qn, gt.Qstar);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    ensure_dir(args.out);
    write_text_file(join(args.out, "model.json"), model_to_json(model));
    write_text_file(join(args.out, "fit_metrics.csv"),
                    "empiricalLoss,procrustesDist,l2LossMC,wallTimeMs\n" + csv_row({model.fit.empiricalLoss, pd, l2, ms}));
    log << "fit: empiricalLoss=" << format_double(model.fit.empiricalLoss) << " procrustesDist=" << format_double(pd)
        << " l2LossMC=" << format_double(l2) << "\n";
    return kOk;
}

inline int cmd_eval(const Args& args, std::ostream& log) {
    const Config cfg = Config::load(args.config, {"nMC", "seed"});
    if (args.model.empty() || args.truth.empty()) throw UserError("eval needs --model <model.json> and --truth <meta.json>");
    const std::size_t nmc = args.nmc.value_or(cfg.get_or<std::size_t>("nMC", 10000));
    if (nmc < 1) throw UserError("nMC must be at least 1");
    const std::uint64_t seed = args.seed.value_or(cfg.get_or<std::uint64_t>("seed", 1));

    const ModelFile model = model_from_json(read_text_file(args.model));
    const DatasetMetadata meta = metadata_from_json(read_text_file(args.truth));
    const GroundTruth gt = make_ground_truth(meta.constants, meta.seed);
    if (static_cast<std::size_t>(model.fit.Qn.rows()) != gt.constants.d || static_cast<std::size_t>(model.fit.Qn.cols()) != gt.constants.k)
        throw UserError("model shape does not match the ground truth (d, k)");

    const double l2 = l2_loss_mc(FittedModel(model.fit).as_function(), gt, nmc, seed).value;
    const Matrix p = procrustes_align(model.fit.Qn, gt.Qstar);
    const double pd = (model.fit.Qn * p - gt.Qstar).norm();
    const ModelConstants& c = gt.constants;
    const double eps1 = (p * gt.Rstar - model.fit.Rbar).norm();
    const double eps2 = 4.0 * std::sqrt(2.0) * static_cast<double>(c.sStar) * model.fit.lambda / c.rhoZero;
    const double z = z_bound(eps1, eps2, c.C, c.eta, c.k, c.r);

    const std::string csv = "l2LossMC,procrustesDist,zBoundAtSchedule\n" + csv_row({l2, pd, z});
    ensure_dir(args.out);
    write_text_file(join(args.out, "eval_metrics.csv"), csv);
    log << csv;
    return kOk;
}

struct SweepRow {
    std::size_t n, d;
    std::uint64_t seed;
    double l2, pd, emp;
};

inline int cmd_sweep(const Args& args, std::ostream& log) {
    const Config cfg = Config::load(args.config, with_keys(with_keys(kConstantKeys, {"nGrid", "dGrid", "seeds"}), {
                                                               "N0", "mode", "lambda", "tau", "admmRho", "maxIter",
                                                               "primalTol", "dualTol", "penaltySign", "nMC",
                                                               "enumerationBudget"}));
    const ModelConstants base = constants_from_config(cfg);
    std::vector<std::size_t> ns = cfg.get<std::vector<std::size_t>>("nGrid");
    std::vector<std::size_t> ds = cfg.get_or<std::vector<std::size_t>>("dGrid", {base.d});
    std::vector<std::uint64_t> seeds = cfg.get<std::vector<std::uint64_t>>("seeds");
    if (ns.empty() || ds.empty() || seeds.empty()) throw UserError("config fields 'nGrid', 'dGrid' and 'seeds' must be nonempty");
    for (std::size_t n : ns)
        if (n < 1) throw UserError("config field 'nGrid' entries must be at least 1");
    std::sort(ns.begin(), ns.end());
    std::sort(ds.begin(), ds.end());
    std::sort(seeds.begin(), seeds.end());
    const std::size_t nmc = args.nmc.value_or(cfg.get_or<std::size_t>("nMC", 10000));
    if (nmc < 1) throw UserError("config field 'nMC' must be at least 1");

    std::vector<std::tuple<std::size_t, std::size_t, std::uint64_t>> grid;
    for (std::size_t n : ns)
        for (std::size_t d : ds)
            for (std::uint64_t s : seeds) grid.emplace_back(n, d, s);
    // Validate once up front so a bad grid fails before any work starts.
    for (std::size_t d : ds) {
        ModelConstants c = base;
        c.d = d;
        c.validate_inputs();
        if (c.sStar > c.d || c.k > c.sStar) throw UserError("grid value d = " + std::to_string(d) + " is below sStar");
    }

    std::vector<SweepRow> rows(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        const auto [n, d, s] = grid[i];
        ModelConstants c = base;
        c.d = d;
        const GroundTruth gt = make_ground_truth(c, s);
        const Dataset data = sample_dataset(gt, 2 * n, derive_seed(s, "data"));
        FitOptions opts = fit_options_from_config(cfg, args, s);
        opts.workers = 1;
        const FitResult fit = fit_mmi(data, opts);
        const double l2 = l2_loss_mc(FittedModel(fit).as_function(), gt, nmc, derive_seed(s, "eval")).value;
        rows[i] = {n, d, s, l2, procrustes_dist(fit.Qn, gt.Qstar), fit.empiricalLoss};
    });

    std::string csv = "n,d,seed,l2LossMC,procrustesDist,empiricalLoss\n";
    for (const SweepRow& r : rows)
        csv += std::to_string(r.n) + "," + std::to_string(r.d) + "," + std::to_string(r.seed) + "," +
               format_double(r.l2) + "," + format_double(r.pd) + "," + format_double(r.emp) + "\n";
    ensure_dir(args.out);
    write_text_file(join(args.out, "sweep.csv"), csv);
    log << "wrote " << rows.size() << " rows to " << join(args.out, "sweep.csv") << "\n";
    return kOk;
}

inline int cmd_netcheck(const Args& args, std::ostream& log) {
    const Config cfg = Config::load(args.config, {"k", "r", "N0", "eps", "trials", "seed"});
    const auto k = cfg.get<std::size_t>("k");
    const auto r = cfg.get<double>("r");
    const auto n0 = cfg.get<std::size_t>("N0");
    const auto eps = cfg.get<double>("eps");
    const auto trials = cfg.get<std::size_t>("trials");
    const std::uint64_t seed = args.seed.value_or(cfg.get<std::uint64_t>("seed"));
    if (k < 1) throw UserError("config field 'k' must be at least 1");
    if (!(r > 0.0)) throw UserError("config field 'r' must be positive");
    if (n0 < 1) throw UserError("config field 'N0' must be at least 1");
    if (!(eps > 0.0)) throw UserError("config field 'eps' must be positive");
    if (trials < 1) throw UserError("config field 'trials' must be at least 1");

    const NetCheckResult res = net_coverage_experiment(k, r, n0, eps, trials, seed);
    const std::string csv = "empiricalCoverage,lemmaBound\n" + csv_row({res.empiricalCoverage, res.lemmaBound});
    ensure_dir(args.out);
    write_text_file(join(args.out, "netcheck.csv"), csv);
    log << csv;
    return kOk;
}

// Maps failures onto the exit-code contract: 2 for anything the user can fix
// in their inputs, 3 for the environment (files, directories).
template <class Command>
int run_command(Command&& cmd, const Args& args, std::ostream& log, std::ostream& err) {
    try {
        return cmd(args, log);
    } catch (const UserError& e) {
        err << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const EnvError& e) {
        err << "error: " << e.what() << "\n";
        return kEnvError;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kEnvError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kEnvError;
    }
}

}  // namespace mmi::cli
