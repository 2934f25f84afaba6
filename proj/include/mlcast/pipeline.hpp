#pragma once

#include "mlcast/arima.hpp"
#include "mlcast/common.hpp"
#include "mlcast/dataset.hpp"
#include "mlcast/evaluation.hpp"
#include "mlcast/interpretation.hpp"
#include "mlcast/models.hpp"
#include "mlcast/shapley.hpp"
#include "mlcast/tuning.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace mlcast {

using ordered_json = nlohmann::ordered_json;

struct RosterEntry {
    std::string id;
    Family family = Family::ols;
    std::optional<ParamGrid> grid;                      // feature models; default_grid when unset
    std::optional<std::vector<ArimaOrder>> candidates;  // ARIMA families; default grid when unset
};

struct SynthSource {
    DgpSpec dgp;
    std::size_t n = 84;
};

struct ExplainOptions {
    bool test_rows = false;
    std::size_t background_cap = 100;
    OutlierRule outliers;
    ColorBy color_by = ColorBy::automatic();
};

struct DmOptions {
    std::size_t horizon = 1;
    std::optional<bool> small_sample;  // unset: corrected when n < 50
};

struct RunConfig {
    std::variant<std::string, SynthSource> data = SynthSource{};
    ColumnSchema schema = default_schema();
    std::vector<std::size_t> split_months{24, 16, 12, 9, 6};
    std::size_t primary_split = 16;
    std::vector<RosterEntry> roster;
    CvPlan cv;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    DmOptions dm;
    ExplainOptions explain;
    std::string config_hash;  // of the effective config, output_dir excluded

    const RosterEntry& benchmark() const {
        for (const auto& e : roster) {
            if (e.family == Family::arima) {
                return e;
            }
        }
        throw ConfigError("roster has no arima benchmark");
    }

    const RosterEntry& entry(const std::string& id) const {
        for (const auto& e : roster) {
            if (e.id == id) {
                return e;
            }
        }
        throw ConfigError("model '" + id + "' is not in the roster");
    }
};

// ---------------------------------------------------------------------------
// Config parsing. Unknown keys anywhere are errors.
// ---------------------------------------------------------------------------

namespace detail {

inline void allow_keys(const ordered_json& j, std::initializer_list<std::string_view> keys, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + ": expected an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
T get_as(const ordered_json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + ": wrong value type");
    }
}

inline ParamGrid parse_grid(const ordered_json& j, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + ": grid must be an object of value lists");
    }
    ParamGrid grid;
    for (const auto& [name, list] : j.items()) {
        if (!list.is_array() || list.empty()) {
            throw ConfigError(where + "." + name + ": expected a nonempty list");
        }
        std::vector<ParamValue> values;
        for (const auto& v : list) {
            if (v.is_number()) {
                values.emplace_back(v.get<double>());
            } else if (v.is_string()) {
                values.emplace_back(v.get<std::string>());
            } else {
                throw ConfigError(where + "." + name + ": values must be numbers or strings");
            }
        }
        grid.axes.emplace_back(name, std::move(values));
    }
    return grid;
}

inline ArimaOrder parse_order(const ordered_json& j, const std::string& where) {
    const auto v = get_as<std::vector<int>>(j, where);
    if (v.size() != 3 && v.size() != 7) {
        throw ConfigError(where + ": order must be [p,d,q] or [p,d,q,P,D,Q,s]");
    }
    ArimaOrder o{v[0], v[1], v[2], 0, 0, 0, 1};
    if (v.size() == 7) {
        o = {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
    }
    try {
        o.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return o;
}

inline ColumnSchema parse_schema(const ordered_json& j) {
    allow_keys(j, {"target", "features", "log_columns"}, "schema");
    ColumnSchema s = default_schema();
    if (j.contains("target")) {
        s.target = get_as<std::string>(j["target"], "schema.target");
    }
    if (j.contains("features")) {
        s.features = get_as<std::vector<std::string>>(j["features"], "schema.features");
    }
    if (j.contains("log_columns")) {
        s.log_columns = get_as<std::vector<std::string>>(j["log_columns"], "schema.log_columns");
    }
    s.validate();
    return s;
}

inline SynthSource parse_synth(const ordered_json& j) {
    allow_keys(j, {"dgp", "n", "noise", "noise_ar", "feature_ar", "n_drivers", "start"}, "data.synth");
    SynthSource s;
    if (j.contains("dgp")) {
        s.dgp.id = get_as<std::string>(j["dgp"], "data.synth.dgp");
        (void)parse_dgp(s.dgp.id);
    }
    if (j.contains("n")) {
        s.n = get_as<std::size_t>(j["n"], "data.synth.n");
    }
    if (j.contains("noise")) {
        s.dgp.noise = get_as<double>(j["noise"], "data.synth.noise");
    }
    if (j.contains("noise_ar")) {
        s.dgp.noise_ar = get_as<double>(j["noise_ar"], "data.synth.noise_ar");
    }
    if (j.contains("feature_ar")) {
        s.dgp.feature_ar = get_as<double>(j["feature_ar"], "data.synth.feature_ar");
    }
    if (j.contains("n_drivers")) {
        s.dgp.n_drivers = get_as<std::size_t>(j["n_drivers"], "data.synth.n_drivers");
    }
    if (j.contains("start")) {
        const auto ym = YearMonth::parse(get_as<std::string>(j["start"], "data.synth.start"));
        if (!ym) {
            throw ConfigError("data.synth.start: expected YYYY-MM");
        }
        s.dgp.start = *ym;
    }
    if (s.n < 40) {
        throw ConfigError("data.synth.n: must be at least 40");
    }
    return s;
}

inline RosterEntry parse_roster_entry(const ordered_json& j, std::size_t index) {
    const std::string where = "roster[" + std::to_string(index) + "]";
    RosterEntry e;
    if (j.is_string()) {
        e.family = parse_family(j.get<std::string>());
        e.id = j.get<std::string>();
        return e;
    }
    allow_keys(j, {"id", "family", "grid", "candidates"}, where);
    if (!j.contains("family")) {
        throw ConfigError(where + ": missing 'family'");
    }
    e.family = parse_family(get_as<std::string>(j["family"], where + ".family"));
    e.id = j.contains("id") ? get_as<std::string>(j["id"], where + ".id") : std::string(family_name(e.family));
    if (j.contains("grid")) {
        if (is_univariate(e.family)) {
            throw ConfigError(where + ": ARIMA families take 'candidates', not 'grid'");
        }
        e.grid = parse_grid(j["grid"], where + ".grid");
    }
    if (j.contains("candidates")) {
        if (!is_univariate(e.family)) {
            throw ConfigError(where + ": 'candidates' only applies to ARIMA families");
        }
        if (!j["candidates"].is_array() || j["candidates"].empty()) {
            throw ConfigError(where + ".candidates: expected a nonempty list of orders");
        }
        std::vector<ArimaOrder> orders;
        for (std::size_t i = 0; i < j["candidates"].size(); ++i) {
            orders.push_back(parse_order(j["candidates"][i], where + ".candidates[" + std::to_string(i) + "]"));
        }
        e.candidates = std::move(orders);
    }
    return e;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace detail

inline std::vector<RosterEntry> default_roster() {
    std::vector<RosterEntry> out;
    for (Family f : kAllFamilies) {
        out.push_back({std::string(family_name(f)), f, std::nullopt, std::nullopt});
    }
    return out;
}

// Builds a RunConfig from parsed JSON; `seed_override` replaces the seed
// before hashing.
inline RunConfig parse_config(ordered_json j, std::optional<std::uint64_t> seed_override = std::nullopt) {
    detail::allow_keys(j, {"data", "schema", "split_months", "primary_split", "roster", "cv", "seed", "output_dir", "dm",
                           "explain"},
                       "config");
    if (seed_override) {
        j["seed"] = *seed_override;
    }
    RunConfig cfg;
    if (j.contains("data")) {
        const auto& d = j["data"];
        detail::allow_keys(d, {"csv", "synth"}, "data");
        if (d.contains("csv") == d.contains("synth")) {
            throw ConfigError("data: specify exactly one of 'csv' or 'synth'");
        }
        if (d.contains("csv")) {
            cfg.data = detail::get_as<std::string>(d["csv"], "data.csv");
        } else {
            cfg.data = detail::parse_synth(d["synth"]);
        }
    }
    if (j.contains("schema")) {
        cfg.schema = detail::parse_schema(j["schema"]);
    }
    if (j.contains("split_months")) {
        cfg.split_months = detail::get_as<std::vector<std::size_t>>(j["split_months"], "split_months");
        if (cfg.split_months.empty()) {
            throw ConfigError("split_months: empty list");
        }
    }
    if (j.contains("primary_split")) {
        cfg.primary_split = detail::get_as<std::size_t>(j["primary_split"], "primary_split");
    }
    for (std::size_t m : cfg.split_months) {
        if (m < 1) {
            throw ConfigError("split_months: every entry must be >= 1");
        }
    }
    if (cfg.primary_split < 1) {
        throw ConfigError("primary_split: must be >= 1");
    }
    if (j.contains("roster")) {
        if (!j["roster"].is_array() || j["roster"].empty()) {
            throw ConfigError("roster: expected a nonempty list");
        }
        for (std::size_t i = 0; i < j["roster"].size(); ++i) {
            cfg.roster.push_back(detail::parse_roster_entry(j["roster"][i], i));
        }
    } else {
        cfg.roster = default_roster();
    }
    for (std::size_t i = 0; i < cfg.roster.size(); ++i) {
        for (std::size_t k = 0; k < i; ++k) {
            if (cfg.roster[k].id == cfg.roster[i].id) {
                throw ConfigError("roster: duplicate model id '" + cfg.roster[i].id + "'");
            }
        }
    }
    (void)cfg.benchmark();
    if (j.contains("cv")) {
        detail::allow_keys(j["cv"], {"k", "shuffle"}, "cv");
        if (j["cv"].contains("k")) {
            cfg.cv.k = detail::get_as<std::size_t>(j["cv"]["k"], "cv.k");
        }
        if (j["cv"].contains("shuffle")) {
            cfg.cv.shuffle = detail::get_as<bool>(j["cv"]["shuffle"], "cv.shuffle");
        }
        if (cfg.cv.k < 2) {
            throw ConfigError("cv.k: must be >= 2");
        }
    }
    if (j.contains("seed")) {
        cfg.seed = detail::get_as<std::uint64_t>(j["seed"], "seed");
    }
    if (j.contains("output_dir")) {
        cfg.output_dir = detail::get_as<std::string>(j["output_dir"], "output_dir");
    }
    if (j.contains("dm")) {
        detail::allow_keys(j["dm"], {"horizon", "small_sample"}, "dm");
        if (j["dm"].contains("horizon")) {
            cfg.dm.horizon = detail::get_as<std::size_t>(j["dm"]["horizon"], "dm.horizon");
            if (cfg.dm.horizon < 1) {
                throw ConfigError("dm.horizon: must be >= 1");
            }
        }
        if (j["dm"].contains("small_sample")) {
            const auto& v = j["dm"]["small_sample"];
            if (v.is_string() && v.get<std::string>() == "auto") {
                cfg.dm.small_sample.reset();
            } else {
                cfg.dm.small_sample = detail::get_as<bool>(v, "dm.small_sample");
            }
        }
    }
    if (j.contains("explain")) {
        const auto& e = j["explain"];
        detail::allow_keys(e, {"rows", "background_cap", "outlier_k", "trim_axis", "color_by"}, "explain");
        if (e.contains("rows")) {
            const auto rows = detail::get_as<std::string>(e["rows"], "explain.rows");
            if (rows != "train" && rows != "test") {
                throw ConfigError("explain.rows: expected 'train' or 'test'");
            }
            cfg.explain.test_rows = rows == "test";
        }
        if (e.contains("background_cap")) {
            cfg.explain.background_cap = detail::get_as<std::size_t>(e["background_cap"], "explain.background_cap");
            if (cfg.explain.background_cap < 1) {
                throw ConfigError("explain.background_cap: must be >= 1");
            }
        }
        if (e.contains("outlier_k")) {
            cfg.explain.outliers.k = detail::get_as<double>(e["outlier_k"], "explain.outlier_k");
        }
        if (e.contains("trim_axis")) {
            const auto axis = detail::get_as<std::string>(e["trim_axis"], "explain.trim_axis");
            if (axis != "feature" && axis != "shap") {
                throw ConfigError("explain.trim_axis: expected 'feature' or 'shap'");
            }
            cfg.explain.outliers.axis = axis == "shap" ? TrimAxis::shap : TrimAxis::feature;
        }
        if (e.contains("color_by")) {
            const auto c = detail::get_as<std::string>(e["color_by"], "explain.color_by");
            if (c == "auto") {
                cfg.explain.color_by = ColorBy::automatic();
            } else if (c == "none") {
                cfg.explain.color_by = ColorBy::none();
            } else {
                if (std::find(cfg.schema.features.begin(), cfg.schema.features.end(), c) == cfg.schema.features.end()) {
                    throw ConfigError("explain.color_by: unknown feature '" + c + "'");
                }
                cfg.explain.color_by = ColorBy::by(c);
            }
        }
    }
    ordered_json hashed = j;
    hashed.erase("output_dir");
    cfg.config_hash = detail::hex64(fnv1a(hashed.dump()));
    return cfg;
}

inline RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(std::move(j), seed_override);
}

// ---------------------------------------------------------------------------
// Seed derivation tree (all from RunConfig::seed):
//   data            -> synthetic panel
//   folds           -> CV shuffling
//   model:<id>      -> per roster entry; its children are
//       cv          -> per-fold fit seeds (cv, fold index)
//       refit       -> final fit on the full training window
//       arima       -> ARIMA multistart perturbations
//   background      -> SHAP background subsample
// ---------------------------------------------------------------------------

inline std::uint64_t model_seed(const RunConfig& cfg, const std::string& id) {
    return derive_seed(cfg.seed, "model:" + id);
}

inline SeriesFrame prepare_frame(const RunConfig& cfg) {
    SeriesFrame frame = [&] {
        if (const auto* path = std::get_if<std::string>(&cfg.data)) {
            std::ifstream in(*path, std::ios::binary);
            if (!in) {
                throw DataError("cannot open data file '" + *path + "'");
            }
            std::stringstream ss;
            ss << in.rdbuf();
            return load_frame(ss.str(), cfg.schema);
        }
        const auto& synth = std::get<SynthSource>(cfg.data);
        return synth_generate(derive_seed(cfg.seed, "data"), synth.n, cfg.schema, synth.dgp).frame;
    }();
    if (!cfg.schema.log_columns.empty()) {
        frame = log_transform(frame, cfg.schema.log_columns);
    }
    return frame;
}

inline void check_splits(const RunConfig& cfg, const SeriesFrame& frame, const std::vector<std::size_t>& splits) {
    for (std::size_t m : splits) {
        if (m >= frame.n_rows()) {
            throw ConfigError("test window of " + std::to_string(m) + " months does not fit " +
                              std::to_string(frame.n_rows()) + " rows");
        }
        // CV needs at least k training rows
        if (frame.n_rows() - m < std::max<std::size_t>(cfg.cv.k, 2)) {
            throw ConfigError("test window of " + std::to_string(m) + " months leaves too few training rows");
        }
    }
}

struct ModelOutcome {
    std::string id;
    Family family = Family::ols;
    std::vector<double> forecast;
    std::optional<GridSearchResult> cv;
    std::optional<ArimaOrder> arima_order;
    std::optional<TrainedModel> model;
    std::string error;  // nonempty: the family failed
};

// Tunes on the training window, refits, and forecasts the test window.
inline ModelOutcome evaluate_model(const RunConfig& cfg, const RosterEntry& entry, const SeriesFrame& train,
                                   const SeriesFrame& test) {
    ModelOutcome out;
    out.id = entry.id;
    out.family = entry.family;
    const std::uint64_t seed = model_seed(cfg, entry.id);
    try {
        const auto& y_train = train.column(cfg.schema.target);
        if (is_univariate(entry.family)) {
            const auto candidates =
                entry.candidates.value_or(default_candidate_orders(entry.family == Family::sarima));
            const auto sel = select_order(y_train, candidates, derive_seed(seed, "arima"));
            out.arima_order = sel.order;
            out.forecast = forecast(sel.fit, y_train, static_cast<int>(test.n_rows()));
            return out;
        }
        const Matrix x_train = train.matrix(cfg.schema.features);
        const Matrix x_test = test.matrix(cfg.schema.features);
        const ParamGrid grid = entry.grid.value_or(default_grid(entry.family));
        CvPlan plan = cfg.cv;
        plan.seed = derive_seed(cfg.seed, "folds");
        out.cv = grid_search(entry.family, grid, x_train, y_train, plan, derive_seed(seed, "cv"));
        if (!std::isfinite(out.cv->best_mean_mse)) {
            throw std::runtime_error("every grid cell failed: " + out.cv->table.front().error);
        }
        out.model = fit_model(entry.family, out.cv->best, x_train, y_train, derive_seed(seed, "refit"));
        out.forecast = out.model->predict(x_test);
        for (double v : out.forecast) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("non-finite forecast");
            }
        }
    } catch (const std::exception& e) {
        out.error = e.what();
        out.forecast.clear();
    }
    return out;
}

namespace detail {

inline std::string provenance(const RunConfig& cfg) {
    return "# mlcast config_hash=" + cfg.config_hash + " seed=" + std::to_string(cfg.seed) + "\n";
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    out << content;
}

inline std::string params_json(const ParamSet& params) {
    ordered_json j = ordered_json::object();
    for (const auto& [name, value] : params) {
        if (const auto* d = std::get_if<double>(&value)) {
            j[name] = *d;
        } else {
            j[name] = std::get<std::string>(value);
        }
    }
    return j.dump();
}

}  // namespace detail

struct SplitEvaluation {
    std::size_t test_months = 0;
    std::vector<double> actual;
    std::vector<ModelOutcome> outcomes;  // roster order
    std::vector<MetricRow> metrics;      // benchmark first
};

inline SplitEvaluation evaluate_split(const RunConfig& cfg, const SeriesFrame& frame, std::size_t test_months,
                                      std::ostream& log) {
    const auto [train, test] = chrono_split(frame, {test_months});
    SplitEvaluation ev;
    ev.test_months = test_months;
    ev.actual = test.column(cfg.schema.target);
    for (const auto& entry : cfg.roster) {
        ev.outcomes.push_back(evaluate_model(cfg, entry, train, test));
        if (!ev.outcomes.back().error.empty()) {
            log << "warning: model '" << entry.id << "' failed on the " << test_months
                << "-month split: " << ev.outcomes.back().error << '\n';
        }
    }

    const std::string bench_id = cfg.benchmark().id;
    const ModelOutcome* bench = nullptr;
    for (const auto& o : ev.outcomes) {
        if (o.id == bench_id) {
            bench = &o;
        }
    }
    const bool bench_ok = bench->error.empty();
    std::vector<double> bench_err;
    MetricRow bench_row{bench_id, 0.0, 0.0, std::nullopt, std::nullopt, !bench_ok};
    if (bench_ok) {
        bench_row.mae = mae(ev.actual, bench->forecast);
        bench_row.rmse = rmse(ev.actual, bench->forecast);
        for (std::size_t i = 0; i < ev.actual.size(); ++i) {
            bench_err.push_back(ev.actual[i] - bench->forecast[i]);
        }
    }
    ev.metrics.push_back(bench_row);
    for (const auto& o : ev.outcomes) {
        if (o.id == bench_id) {
            continue;
        }
        MetricRow row{o.id, 0.0, 0.0, std::nullopt, std::nullopt, !o.error.empty()};
        if (o.error.empty()) {
            row.mae = mae(ev.actual, o.forecast);
            row.rmse = rmse(ev.actual, o.forecast);
            if (bench_ok && bench_row.rmse > 0.0) {
                row.rmse_reduction_pct = rmse_reduction(bench_row.rmse, row.rmse);
            }
            if (bench_ok && ev.actual.size() >= 8) {
                std::vector<double> err;
                for (std::size_t i = 0; i < ev.actual.size(); ++i) {
                    err.push_back(ev.actual[i] - o.forecast[i]);
                }
                try {
                    row.dm = dm_test(bench_err, err, cfg.dm.horizon, cfg.dm.small_sample);
                } catch (const std::exception& e) {
                    log << "warning: DM test for '" << o.id << "' undefined: " << e.what() << '\n';
                }
            }
        }
        ev.metrics.push_back(std::move(row));
    }
    return ev;
}

struct RunArtifacts {
    std::filesystem::path output_dir;
    SplitEvaluation evaluation;
};

// Primary split: forecasts.csv, metrics.csv, dm_tests.csv, cv_<id>.csv, selection.json
inline RunArtifacts cmd_run(const RunConfig& cfg, std::ostream& log = std::cerr) {
    const SeriesFrame frame = prepare_frame(cfg);
    check_splits(cfg, frame, {cfg.primary_split});
    RunArtifacts art;
    art.output_dir = cfg.output_dir;
    std::filesystem::create_directories(art.output_dir);
    art.evaluation = evaluate_split(cfg, frame, cfg.primary_split, log);
    const auto& ev = art.evaluation;
    const std::string head = detail::provenance(cfg);

    // forecasts.csv
    {
        const auto [train, test] = chrono_split(frame, {cfg.primary_split});
        std::string s = head + "date,actual";
        for (const auto& o : ev.outcomes) {
            s += ',' + o.id;
        }
        s += '\n';
        for (std::size_t t = 0; t < ev.actual.size(); ++t) {
            s += test.month(t).str() + ',' + format_double(ev.actual[t]);
            for (const auto& o : ev.outcomes) {
                s += ',' + (o.error.empty() ? format_double(o.forecast[t]) : std::string("NA"));
            }
            s += '\n';
        }
        detail::write_file(art.output_dir / "forecasts.csv", s);
    }
    detail::write_file(art.output_dir / "metrics.csv", head + metrics_csv(ev.metrics));

    // both DM variants side by side
    {
        const std::string bench_id = cfg.benchmark().id;
        const ModelOutcome* bench = nullptr;
        for (const auto& o : ev.outcomes) {
            if (o.id == bench_id) {
                bench = &o;
            }
        }
        std::string s = head + "model,n,horizon,dm_stat_normal,dm_pvalue_normal,dm_stat_hln,dm_pvalue_hln\n";
        for (const auto& o : ev.outcomes) {
            if (o.id == bench_id || !o.error.empty() || !bench->error.empty()) {
                continue;
            }
            std::vector<double> ea;
            std::vector<double> eb;
            for (std::size_t i = 0; i < ev.actual.size(); ++i) {
                ea.push_back(ev.actual[i] - bench->forecast[i]);
                eb.push_back(ev.actual[i] - o.forecast[i]);
            }
            s += o.id + ',' + std::to_string(ea.size()) + ',' + std::to_string(cfg.dm.horizon);
            for (bool small : {false, true}) {
                try {
                    const auto r = dm_test(ea, eb, cfg.dm.horizon, small);
                    s += ',' + format_double(r.statistic) + ',' + format_double(r.pvalue);
                } catch (const std::exception&) {
                    s += ",,";
                }
            }
            s += '\n';
        }
        detail::write_file(art.output_dir / "dm_tests.csv", s);
    }

    ordered_json selection = ordered_json::object();
    selection["meta"] = {{"config_hash", cfg.config_hash}, {"seed", cfg.seed}};
    selection["test_months"] = cfg.primary_split;
    selection["cv"] = {{"k", cfg.cv.k}, {"shuffle", cfg.cv.shuffle}};
    selection["dm"] = {{"horizon", cfg.dm.horizon},
                       {"truncation_lag", cfg.dm.horizon - 1},
                       {"small_sample", cfg.dm.small_sample ? ordered_json(*cfg.dm.small_sample) : ordered_json("auto")}};
    ordered_json models = ordered_json::array();
    for (const auto& o : ev.outcomes) {
        ordered_json m = {{"id", o.id}, {"family", family_name(o.family)}};
        if (!o.error.empty()) {
            m["error"] = o.error;
        }
        if (o.arima_order) {
            m["order"] = o.arima_order->str();
        }
        if (o.cv) {
            m["best_params"] = ordered_json::parse(detail::params_json(o.cv->best));
            m["best_mean_mse"] = o.cv->best_mean_mse;
            detail::write_file(art.output_dir / ("cv_" + o.id + ".csv"), head + cv_table_csv(*o.cv));
        }
        models.push_back(std::move(m));
    }
    selection["models"] = std::move(models);
    detail::write_file(art.output_dir / "selection.json", selection.dump(2) + "\n");
    return art;
}

// Re-runs tuning and evaluation for every configured split: split_sweep.csv
inline std::vector<SplitEvaluation> cmd_sweep(const RunConfig& cfg, std::ostream& log = std::cerr) {
    const SeriesFrame frame = prepare_frame(cfg);
    check_splits(cfg, frame, cfg.split_months);
    std::filesystem::create_directories(cfg.output_dir);
    std::vector<SplitEvaluation> out;
    std::string s = detail::provenance(cfg) + "model,test_months,rmse,mae\n";
    for (std::size_t m : cfg.split_months) {
        out.push_back(evaluate_split(cfg, frame, m, log));
        for (const auto& row : out.back().metrics) {
            s += row.model + ',' + std::to_string(m) + ',';
            s += row.failed ? std::string("NA,NA") : format_double(row.rmse) + ',' + format_double(row.mae);
            s += '\n';
        }
    }
    detail::write_file(std::filesystem::path(cfg.output_dir) / "split_sweep.csv", s);
    return out;
}

struct ExplainArtifacts {
    ShapMatrix shap;
    Matrix rows;
    std::vector<FeatureImportance> importance;
    std::vector<FunctionalForm> forms;
    std::vector<std::string> form_errors;  // per feature, empty when the fit succeeded
};

// Fits the model as `run` does and writes importance.csv, shap_values.csv,
// explained_predictions.csv, summary_plot.csv, dependence_<feature>.csv and
// functional_form.json.
inline ExplainArtifacts cmd_explain(const RunConfig& cfg, const std::string& model_id, std::ostream& log = std::cerr) {
    const RosterEntry& entry = cfg.entry(model_id);
    if (is_univariate(entry.family)) {
        throw ConfigError("explain: model '" + model_id + "' is an ARIMA benchmark; univariate models have no features "
                          "to attribute");
    }
    const SeriesFrame frame = prepare_frame(cfg);
    check_splits(cfg, frame, {cfg.primary_split});
    const auto [train, test] = chrono_split(frame, {cfg.primary_split});
    const auto outcome = evaluate_model(cfg, entry, train, test);
    if (!outcome.error.empty()) {
        throw std::runtime_error("explain: model '" + model_id + "' failed to fit: " + outcome.error);
    }
    const SeriesFrame& explained = cfg.explain.test_rows ? test : train;
    ExplainArtifacts art;
    art.rows = explained.matrix(cfg.schema.features);
    const Matrix background = make_background(train.matrix(cfg.schema.features), cfg.explain.background_cap,
                                              derive_seed(cfg.seed, "background"));
    art.shap = explain_matrix(*outcome.model, art.rows, background, cfg.schema.features);
    art.importance = global_importance(art.shap);

    const std::filesystem::path dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    const std::string head = detail::provenance(cfg);
    {
        std::string s = head + "rank,feature,mean_abs_shap\n";
        for (std::size_t i = 0; i < art.importance.size(); ++i) {
            s += std::to_string(i + 1) + ',' + art.importance[i].feature + ',' +
                 format_double(art.importance[i].mean_abs_shap) + '\n';
        }
        detail::write_file(dir / "importance.csv", s);
    }
    {
        std::string s = head + "# base_value=" + format_double(art.shap.base_value) + "\n";
        s += "row_index,feature,feature_value,shap_value\n";
        for (std::size_t r = 0; r < art.shap.n_rows(); ++r) {
            for (std::size_t j = 0; j < art.shap.n_features(); ++j) {
                s += std::to_string(r) + ',' + art.shap.feature_names[j] + ',' + format_double(art.rows(r, j)) + ',' +
                     format_double(art.shap.phi(r, j)) + '\n';
            }
        }
        detail::write_file(dir / "shap_values.csv", s);
    }
    {
        std::string s = head + "row_index,date,prediction\n";
        for (std::size_t r = 0; r < art.shap.n_rows(); ++r) {
            s += std::to_string(r) + ',' + explained.month(r).str() + ',' + format_double(art.shap.predictions[r]) +
                 '\n';
        }
        detail::write_file(dir / "explained_predictions.csv", s);
    }
    {
        std::string s = head + "feature,row_index,shap_value,normalized_value\n";
        for (const auto& rec : summary_plot_data(art.shap, art.rows)) {
            s += rec.feature + ',' + std::to_string(rec.row_index) + ',' + format_double(rec.shap_value) + ',' +
                 format_double(rec.normalized_value) + '\n';
        }
        detail::write_file(dir / "summary_plot.csv", s);
    }
    ordered_json forms = ordered_json::object();
    forms["meta"] = {{"config_hash", cfg.config_hash}, {"seed", cfg.seed}, {"model", model_id}};
    ordered_json features = ordered_json::object();
    for (const auto& feature : cfg.schema.features) {
        const auto dep = dependence_data(art.shap, art.rows, feature, cfg.explain.color_by);
        std::string s = head;
        if (dep.color_feature) {
            s += "# color_feature=" + *dep.color_feature + "\n";
        }
        s += "row_index,x_value,shap_value,color_value\n";
        for (const auto& pt : dep.points) {
            s += std::to_string(pt.row_index) + ',' + format_double(pt.x_value) + ',' + format_double(pt.shap_value) +
                 ',' + (pt.color_value ? format_double(*pt.color_value) : std::string()) + '\n';
        }
        detail::write_file(dir / ("dependence_" + feature + ".csv"), s);
        try {
            auto ff = analyze_feature(art.shap, art.rows, feature, cfg.explain.outliers);
            features[feature] = ordered_json::parse(to_json(ff).dump());
            art.forms.push_back(std::move(ff));
            art.form_errors.emplace_back();
        } catch (const std::invalid_argument& e) {
            features[feature] = {{"error", e.what()}};
            art.forms.push_back({feature, {}, {}, 0, false});
            art.form_errors.emplace_back(e.what());
            log << "warning: no functional form for '" << feature << "': " << e.what() << '\n';
        }
    }
    forms["features"] = std::move(features);
    detail::write_file(dir / "functional_form.json", forms.dump(2) + "\n");
    return art;
}

// Writes the configured synthetic panel as synth.csv plus synth_truth.json.
inline SynthResult cmd_synth(const RunConfig& cfg) {
    const auto* synth = std::get_if<SynthSource>(&cfg.data);
    if (synth == nullptr) {
        throw ConfigError("synth: config data source is a CSV file, not a synthetic generator");
    }
    auto result = synth_generate(derive_seed(cfg.seed, "data"), synth->n, cfg.schema, synth->dgp);
    const std::filesystem::path dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    detail::write_file(dir / "synth.csv", detail::provenance(cfg) + to_csv(result.frame));
    ordered_json truth = ordered_json::object();
    truth["meta"] = {{"config_hash", cfg.config_hash}, {"seed", cfg.seed}};
    truth["dgp"] = synth->dgp.id;
    std::vector<std::string> drivers;
    for (std::size_t d : result.truth.drivers) {
        drivers.push_back(cfg.schema.features[d]);
    }
    truth["drivers"] = drivers;
    truth["coefficients"] = result.truth.coefficients;
    truth["intercept"] = result.truth.intercept;
    detail::write_file(dir / "synth_truth.json", truth.dump(2) + "\n");
    return result;
}

}  // namespace mlcast
