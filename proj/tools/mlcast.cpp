#include "mlcast/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string model;
};

mlcast::RunConfig resolve(const Options& opt) {
    mlcast::RunConfig cfg = opt.config.empty() ? mlcast::parse_config(mlcast::ordered_json::object(), opt.seed)
                                               : mlcast::load_config(opt.config, opt.seed);
    if (!opt.out.empty()) {
        cfg.output_dir = opt.out;
    }
    return cfg;
}

void print_metrics(const mlcast::SplitEvaluation& ev) {
    std::cout << "test window: " << ev.test_months << " months\n";
    for (const auto& row : ev.metrics) {
        std::cout << "  " << row.model;
        if (row.failed) {
            std::cout << "  FAILED\n";
            continue;
        }
        std::cout << "  rmse=" << mlcast::format_double(row.rmse) << "  mae=" << mlcast::format_double(row.mae);
        if (row.rmse_reduction_pct) {
            std::cout << "  reduction=" << mlcast::format_double(*row.rmse_reduction_pct) << "%";
        }
        if (row.dm) {
            std::cout << "  dm_p=" << mlcast::format_double(row.dm->pvalue);
        }
        std::cout << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mlcast: forecasting with penalized regression, tree ensembles, SVR and ARIMA, plus SHAP analysis"};
    app.require_subcommand(1);
    Options opt;
    std::uint64_t seed_value = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON run configuration");
        sub->add_option("--seed", seed_value, "master seed (overrides the config)");
        sub->add_option("--out", opt.out, "output directory (overrides the config)");
    };
    auto* run = app.add_subcommand("run", "tune, fit and evaluate every roster model on the primary split");
    auto* sweep = app.add_subcommand("sweep", "repeat the evaluation for every configured test window");
    auto* explain = app.add_subcommand("explain", "SHAP attributions and functional forms for one model");
    auto* synth = app.add_subcommand("synth", "write the configured synthetic panel");
    for (auto* sub : {run, sweep, explain, synth}) {
        add_common(sub);
    }
    explain->add_option("--model", opt.model, "roster model id")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    for (auto* sub : {run, sweep, explain, synth}) {
        if (sub->count("--seed") > 0) {
            opt.seed = seed_value;
        }
    }

    try {
        const mlcast::RunConfig cfg = resolve(opt);
        if (*run) {
            print_metrics(mlcast::cmd_run(cfg).evaluation);
        } else if (*sweep) {
            for (const auto& ev : mlcast::cmd_sweep(cfg)) {
                print_metrics(ev);
            }
        } else if (*explain) {
            const auto art = mlcast::cmd_explain(cfg, opt.model);
            std::cout << "global importance (" << opt.model << "):\n";
            for (std::size_t i = 0; i < art.importance.size(); ++i) {
                std::cout << "  " << i + 1 << ". " << art.importance[i].feature << "  "
                          << mlcast::format_double(art.importance[i].mean_abs_shap) << '\n';
            }
        } else if (*synth) {
            const auto result = mlcast::cmd_synth(cfg);
            std::cout << "wrote " << result.frame.n_rows() << " rows to " << cfg.output_dir << "/synth.csv\n";
        }
        std::cout << "outputs: " << cfg.output_dir << '\n';
    } catch (const mlcast::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const mlcast::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}
