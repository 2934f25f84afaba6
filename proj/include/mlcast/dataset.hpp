#pragma once

#include "mlcast/common.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mlcast {

// Calendar year-month.
struct YearMonth {
    int year = 2000;
    int month = 1;  // 1..12

    int ordinal() const noexcept { return year * 12 + (month - 1); }
    static YearMonth from_ordinal(int ord) noexcept { return {ord / 12, ord % 12 + 1}; }
    YearMonth plus(int months) const noexcept { return from_ordinal(ordinal() + months); }

    // Parses "YYYY-MM".
    static std::optional<YearMonth> parse(std::string_view s) {
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) {
            s.remove_suffix(1);
        }
        if (s.size() != 7 || s[4] != '-') {
            return std::nullopt;
        }
        int y = 0;
        int m = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            if (s[i] < '0' || s[i] > '9') {
                return std::nullopt;
            }
            y = y * 10 + (s[i] - '0');
        }
        for (std::size_t i = 5; i < 7; ++i) {
            if (s[i] < '0' || s[i] > '9') {
                return std::nullopt;
            }
            m = m * 10 + (s[i] - '0');
        }
        if (m < 1 || m > 12) {
            return std::nullopt;
        }
        return YearMonth{y, m};
    }

    std::string str() const {
        std::string out = std::to_string(year);
        out += month < 10 ? "-0" : "-";
        out += std::to_string(month);
        return out;
    }

    friend bool operator==(const YearMonth&, const YearMonth&) = default;
};

struct Column {
    std::string name;
    std::vector<double> values;

    friend bool operator==(const Column&, const Column&) = default;
};

// Contiguous monthly panel. Immutable once built; every column has n_rows
// finite values.
class SeriesFrame {
public:
    SeriesFrame(YearMonth start, std::vector<Column> columns) : start_(start), columns_(std::move(columns)) {
        if (columns_.empty()) {
            throw DataError("SeriesFrame: no columns");
        }
        n_rows_ = columns_.front().values.size();
        if (n_rows_ == 0) {
            throw DataError("SeriesFrame: zero rows");
        }
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            const auto& col = columns_[c];
            if (col.values.size() != n_rows_) {
                throw DataError("SeriesFrame: column '" + col.name + "' has " +
                                std::to_string(col.values.size()) + " rows, expected " +
                                std::to_string(n_rows_));
            }
            for (std::size_t r = 0; r < n_rows_; ++r) {
                if (!std::isfinite(col.values[r])) {
                    throw DataError("SeriesFrame: non-finite value at row " + std::to_string(r) +
                                    ", column '" + col.name + "'");
                }
            }
            for (std::size_t o = 0; o < c; ++o) {
                if (columns_[o].name == col.name) {
                    throw DataError("SeriesFrame: duplicate column '" + col.name + "'");
                }
            }
        }
    }

    YearMonth start() const noexcept { return start_; }
    YearMonth month(std::size_t row) const noexcept { return start_.plus(static_cast<int>(row)); }
    std::size_t n_rows() const noexcept { return n_rows_; }
    const std::vector<Column>& columns() const noexcept { return columns_; }

    bool has(std::string_view name) const noexcept { return find(name) != nullptr; }

    const std::vector<double>& column(std::string_view name) const {
        const Column* c = find(name);
        if (c == nullptr) {
            throw DataError("missing column '" + std::string(name) + "'");
        }
        return c->values;
    }

    // Rows [begin, end).
    SeriesFrame slice(std::size_t begin, std::size_t end) const {
        std::vector<Column> cols;
        cols.reserve(columns_.size());
        for (const auto& c : columns_) {
            cols.push_back({c.name, std::vector<double>(c.values.begin() + static_cast<std::ptrdiff_t>(begin),
                                                        c.values.begin() + static_cast<std::ptrdiff_t>(end))});
        }
        return {month(begin), std::move(cols)};
    }

    // Selected columns as an n_rows x names.size() matrix.
    Matrix matrix(const std::vector<std::string>& names) const {
        Matrix m(n_rows_, names.size());
        for (std::size_t c = 0; c < names.size(); ++c) {
            const auto& values = column(names[c]);
            for (std::size_t r = 0; r < n_rows_; ++r) {
                m(r, c) = values[r];
            }
        }
        return m;
    }

    friend bool operator==(const SeriesFrame&, const SeriesFrame&) = default;

private:
    const Column* find(std::string_view name) const noexcept {
        for (const auto& c : columns_) {
            if (c.name == name) {
                return &c;
            }
        }
        return nullptr;
    }

    YearMonth start_;
    std::size_t n_rows_ = 0;
    std::vector<Column> columns_;
};

struct ColumnSchema {
    std::string target;
    std::vector<std::string> features;
    std::vector<std::string> log_columns;

    void validate() const {
        if (target.empty()) {
            throw ConfigError("schema: empty target name");
        }
        if (features.empty()) {
            throw ConfigError("schema: no features");
        }
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (features[i] == target) {
                throw ConfigError("schema: target '" + target + "' also listed as a feature");
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (features[j] == features[i]) {
                    throw ConfigError("schema: duplicate feature '" + features[i] + "'");
                }
            }
        }
        for (const auto& l : log_columns) {
            if (l != target && std::find(features.begin(), features.end(), l) == features.end()) {
                throw ConfigError("schema: log column '" + l + "' is neither target nor feature");
            }
        }
    }

    std::vector<std::string> all_columns() const {
        std::vector<std::string> out{target};
        out.insert(out.end(), features.begin(), features.end());
        return out;
    }
};

// Payment-system, capital-market and macro regressors with inflation as the
// target. Nothing is log-transformed unless configured.
inline ColumnSchema default_schema() {
    return {"INF",
            {"RTGS", "SKNBI", "ATMD", "CC", "EM", "DC", "FT", "KUPVA", "CIC", "ER", "IR", "CSPI", "SMC",
             "ADT", "PER", "CCI"},
            {}};
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) {
            f.remove_prefix(1);
        }
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) {
            f.remove_suffix(1);
        }
    }
    return out;
}

}  // namespace detail

// Parses delimited text: header row with `date` first, then one row per
// month. Only the schema's columns are kept (target first, then features).
inline SeriesFrame load_frame(std::string_view source, const ColumnSchema& schema) {
    schema.validate();
    std::vector<std::string_view> lines;
    std::vector<std::size_t> line_numbers;  // 1-based position in the source
    {
        std::size_t pos = 0;
        std::size_t number = 0;
        while (pos <= source.size()) {
            std::size_t nl = source.find('\n', pos);
            if (nl == std::string_view::npos) {
                nl = source.size();
            }
            std::string_view line = source.substr(pos, nl - pos);
            ++number;
            if (!line.empty() && line.back() == '\r') {
                line.remove_suffix(1);
            }
            if (!line.empty() && line.front() != '#') {
                lines.push_back(line);
                line_numbers.push_back(number);
            }
            pos = nl + 1;
        }
    }
    if (lines.empty()) {
        throw DataError("empty input: no header row");
    }
    std::string_view header_line = lines.front();
    if (header_line.starts_with("\xEF\xBB\xBF")) {
        header_line.remove_prefix(3);
    }
    const auto header = detail::split_fields(header_line);
    if (header.empty() || header.front() != "date") {
        throw DataError("line " + std::to_string(line_numbers.front()) + ", column 1: expected 'date'");
    }
    const auto wanted = schema.all_columns();
    std::vector<std::size_t> positions;
    for (const auto& name : wanted) {
        const auto it = std::find(header.begin() + 1, header.end(), name);
        if (it == header.end()) {
            throw DataError("missing column '" + name + "' in header");
        }
        positions.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    if (lines.size() < 2) {
        throw DataError("no data rows");
    }

    std::vector<Column> columns;
    for (const auto& name : wanted) {
        columns.push_back({name, {}});
    }
    std::optional<YearMonth> start;
    int prev = 0;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t line_no = line_numbers[li];
        const auto fields = detail::split_fields(lines[li]);
        if (fields.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        }
        const auto ym = YearMonth::parse(fields.front());
        if (!ym) {
            throw DataError("line " + std::to_string(line_no) + ", column 'date': invalid year-month '" +
                            std::string(fields.front()) + "'");
        }
        if (start) {
            if (ym->ordinal() == prev) {
                throw DataError("line " + std::to_string(line_no) + ", column 'date': duplicate month " +
                                ym->str());
            }
            if (ym->ordinal() != prev + 1) {
                throw DataError("line " + std::to_string(line_no) + ", column 'date': calendar gap, expected " +
                                YearMonth::from_ordinal(prev + 1).str() + " but found " + ym->str());
            }
        } else {
            start = ym;
        }
        prev = ym->ordinal();
        for (std::size_t c = 0; c < wanted.size(); ++c) {
            double v = 0.0;
            if (!parse_double(fields[positions[c]], v)) {
                throw DataError("line " + std::to_string(line_no) + ", column '" + wanted[c] +
                                "': non-numeric value '" + std::string(fields[positions[c]]) + "'");
            }
            columns[c].values.push_back(v);
        }
    }
    return {*start, std::move(columns)};
}

// Writes a frame in the same layout load_frame reads.
inline std::string to_csv(const SeriesFrame& frame) {
    std::string out = "date";
    for (const auto& c : frame.columns()) {
        out += ',';
        out += c.name;
    }
    out += '\n';
    for (std::size_t r = 0; r < frame.n_rows(); ++r) {
        out += frame.month(r).str();
        for (const auto& c : frame.columns()) {
            out += ',';
            out += format_double(c.values[r]);
        }
        out += '\n';
    }
    return out;
}

namespace detail {

template <typename Fn>
SeriesFrame map_columns(const SeriesFrame& frame, const std::vector<std::string>& names, Fn&& fn) {
    for (const auto& n : names) {
        (void)frame.column(n);
    }
    std::vector<Column> cols = frame.columns();
    for (auto& c : cols) {
        if (std::find(names.begin(), names.end(), c.name) == names.end()) {
            continue;
        }
        for (std::size_t r = 0; r < c.values.size(); ++r) {
            c.values[r] = fn(c.values[r], r, c.name);
        }
    }
    return {frame.start(), std::move(cols)};
}

}  // namespace detail

inline SeriesFrame log_transform(const SeriesFrame& frame, const std::vector<std::string>& columns) {
    return detail::map_columns(frame, columns, [&frame](double v, std::size_t r, const std::string& name) {
        if (!(v > 0.0)) {
            throw DataError("log_transform: non-positive value " + format_double(v) + " at row " +
                            std::to_string(r) + " (" + frame.month(r).str() + "), column '" + name + "'");
        }
        return std::log(v);
    });
}

inline SeriesFrame exp_transform(const SeriesFrame& frame, const std::vector<std::string>& columns) {
    return detail::map_columns(frame, columns, [](double v, std::size_t, const std::string&) { return std::exp(v); });
}

struct SplitSpec {
    std::size_t test_months = 16;
};

// Chronological holdout: the last test_months rows form the test frame.
inline std::pair<SeriesFrame, SeriesFrame> chrono_split(const SeriesFrame& frame, SplitSpec spec) {
    const std::size_t n = frame.n_rows();
    if (spec.test_months < 1 || spec.test_months >= n) {
        throw DataError("chrono_split: test_months " + std::to_string(spec.test_months) +
                        " must lie in [1, " + std::to_string(n) + ")");
    }
    const std::size_t cut = n - spec.test_months;
    return {frame.slice(0, cut), frame.slice(cut, n)};
}

// Per-column centering and scaling learned on training data.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    bool empty() const noexcept { return mean.empty(); }

    // Population sd; zero-variance columns keep scale 1.
    static Standardizer fit(const Matrix& x) {
        Standardizer s;
        s.mean.resize(x.cols());
        s.scale.resize(x.cols());
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const auto col = x.column(c);
            s.mean[c] = mlcast::mean(col);
            const double sd = std::sqrt(variance(col));
            s.scale[c] = sd > 0.0 ? sd : 1.0;
        }
        return s;
    }

    Matrix apply(const Matrix& x) const {
        check(x);
        Matrix out(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t c = 0; c < x.cols(); ++c) {
                out(r, c) = (x(r, c) - mean[c]) / scale[c];
            }
        }
        return out;
    }

    Matrix invert(const Matrix& z) const {
        check(z);
        Matrix out(z.rows(), z.cols());
        for (std::size_t r = 0; r < z.rows(); ++r) {
            for (std::size_t c = 0; c < z.cols(); ++c) {
                out(r, c) = z(r, c) * scale[c] + mean[c];
            }
        }
        return out;
    }

private:
    void check(const Matrix& x) const {
        if (x.cols() != mean.size()) {
            throw std::invalid_argument("Standardizer: expected " + std::to_string(mean.size()) +
                                        " columns, got " + std::to_string(x.cols()));
        }
    }
};

struct FeatureScaling {
    std::string name;
    double mean = 0.0;
    double scale = 1.0;
};

struct StandardizedPair {
    SeriesFrame train;
    SeriesFrame test;
    std::vector<FeatureScaling> stats;
};

// Standardizes `features` in both frames with statistics from `train` only.
inline StandardizedPair standardize_fit_apply(const SeriesFrame& train, const SeriesFrame& test,
                                              const std::vector<std::string>& features) {
    const Standardizer s = Standardizer::fit(train.matrix(features));
    std::vector<FeatureScaling> stats;
    for (std::size_t i = 0; i < features.size(); ++i) {
        stats.push_back({features[i], s.mean[i], s.scale[i]});
    }
    auto transform = [&](const SeriesFrame& f) {
        return detail::map_columns(f, features, [&](double v, std::size_t, const std::string& name) {
            const auto i = static_cast<std::size_t>(std::find(features.begin(), features.end(), name) -
                                                    features.begin());
            return (v - s.mean[i]) / s.scale[i];
        });
    };
    return {transform(train), transform(test), std::move(stats)};
}

// ---------------------------------------------------------------------------
// Synthetic panels
// ---------------------------------------------------------------------------

enum class DgpKind { linear, nonlinear, quadratic };

inline DgpKind parse_dgp(std::string_view id) {
    if (id == "linear") {
        return DgpKind::linear;
    }
    if (id == "nonlinear") {
        return DgpKind::nonlinear;
    }
    if (id == "quadratic") {
        return DgpKind::quadratic;
    }
    throw ConfigError("unknown dgp identifier '" + std::string(id) + "'");
}

struct DgpSpec {
    std::string id = "nonlinear";
    double noise = 0.3;           // innovation sd of the AR(1) noise
    double noise_ar = 0.5;        // AR(1) coefficient of the noise
    double feature_ar = 0.6;      // AR(1) coefficient of every regressor
    std::size_t n_drivers = 3;
    YearMonth start{2015, 1};
};

// Description of the generated target: which features drive it and the
// noiseless function of the feature row.
struct SynthTruth {
    DgpKind kind = DgpKind::nonlinear;
    std::vector<std::size_t> drivers;  // indices into schema.features
    std::vector<double> coefficients;  // per driver
    double intercept = 0.0;

    double evaluate(std::span<const double> features) const {
        double y = intercept;
        for (std::size_t k = 0; k < drivers.size(); ++k) {
            const double x = features[drivers[k]];
            const double b = coefficients[k];
            switch (kind) {
                case DgpKind::linear:
                    y += b * x;
                    break;
                case DgpKind::quadratic:
                    // first driver enters as a parabola with roots at 0.5 and -1
                    y += k == 0 ? b * (x - 0.5) * (x + 1.0) : b * x;
                    break;
                case DgpKind::nonlinear:
                    switch (k % 3) {
                        case 0:
                            y += b * std::tanh(1.5 * x);
                            break;
                        case 1:
                            y += b * (x * x - 1.0);
                            break;
                        default:
                            y += b * std::max(x, 0.0);
                            break;
                    }
                    break;
            }
        }
        return y;
    }
};

struct SynthResult {
    SeriesFrame frame;
    SynthTruth truth;
};

// Regressors are independent stationary AR(1) processes with unit marginal
// variance; the target is truth.evaluate(row) plus AR(1) noise.
inline SynthResult synth_generate(std::uint64_t seed, std::size_t n, const ColumnSchema& schema,
                                  const DgpSpec& dgp) {
    const DgpKind kind = parse_dgp(dgp.id);
    schema.validate();
    if (n < 40) {
        throw ConfigError("synth_generate: n must be at least 40");
    }
    const std::size_t p = schema.features.size();
    if (dgp.n_drivers < 1 || dgp.n_drivers > p) {
        throw ConfigError("synth_generate: n_drivers must lie in [1, feature count]");
    }
    Rng rng(derive_seed(seed, "synth"));

    SynthTruth truth;
    truth.kind = kind;
    truth.drivers = rng.sample_without_replacement(p, dgp.n_drivers);
    switch (kind) {
        case DgpKind::linear:
            truth.intercept = 1.0;
            for (std::size_t k = 0; k < dgp.n_drivers; ++k) {
                truth.coefficients.push_back((k % 2 == 0 ? 1.0 : -1.0) * (1.0 + 0.5 * static_cast<double>(k)));
            }
            break;
        case DgpKind::quadratic:
            truth.intercept = 0.0;
            truth.coefficients.assign(dgp.n_drivers, 0.0);
            truth.coefficients[0] = 1.0;
            break;
        case DgpKind::nonlinear:
            truth.intercept = 3.0;
            for (std::size_t k = 0; k < dgp.n_drivers; ++k) {
                truth.coefficients.push_back(k % 3 == 0 ? 1.5 : (k % 3 == 1 ? 0.8 : 1.6));
            }
            break;
    }

    const double phi = dgp.feature_ar;
    const double innov_sd = std::sqrt(1.0 - phi * phi);
    std::vector<Column> features(p);
    for (std::size_t j = 0; j < p; ++j) {
        features[j].name = schema.features[j];
        features[j].values.resize(n);
        double x = rng.normal();
        for (std::size_t t = 0; t < n; ++t) {
            if (t > 0) {
                x = phi * x + innov_sd * rng.normal();
            }
            features[j].values[t] = x;
        }
    }
    Column target{schema.target, std::vector<double>(n)};
    double noise = 0.0;
    std::vector<double> row(p);
    for (std::size_t t = 0; t < n; ++t) {
        noise = dgp.noise_ar * noise + dgp.noise * rng.normal();
        for (std::size_t j = 0; j < p; ++j) {
            row[j] = features[j].values[t];
        }
        target.values[t] = truth.evaluate(row) + noise;
    }
    std::vector<Column> cols;
    cols.push_back(std::move(target));
    for (auto& f : features) {
        cols.push_back(std::move(f));
    }
    return {SeriesFrame(dgp.start, std::move(cols)), std::move(truth)};
}

}  // namespace mlcast
