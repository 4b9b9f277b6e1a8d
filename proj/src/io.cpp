#include "cvcov/io.hpp"

#include "cvcov/format.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace cvcov::io {

namespace {

using nlohmann::json;

std::vector<std::string> split_line(const std::string& line, char delim, std::size_t line_no) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == delim) {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) throw CsvError(line_no, out.size() + 1, "unterminated quoted field on line " + std::to_string(line_no));
    out.push_back(std::move(field));
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string csv_field(const std::string& s, char delim = ',') {
    if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos &&
        s.find('\n') == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

bool all_numeric(const std::vector<std::string>& fields) {
    double v = 0.0;
    return std::all_of(fields.begin(), fields.end(), [&](const std::string& f) { return parse_double(f, v); });
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    return out;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <class T>
json optional_number(const std::optional<T>& v) {
    return v ? number_or_null(*v) : json(nullptr);
}

}  // namespace

CsvTable read_csv_table(std::istream& in, const CsvOptions& options) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (options.comment != '\0' && line[0] == options.comment) continue;
        auto fields = split_line(line, options.delimiter, line_no);
        if (first) {
            first = false;
            width = fields.size();
            const bool is_header = options.header == HeaderMode::Present ||
                                   (options.header == HeaderMode::Auto && !all_numeric(fields));
            if (is_header) {
                for (auto& f : fields) table.header.push_back(trim(f));
                continue;
            }
        }
        if (fields.size() != width) {
            throw CsvError(line_no, std::min(fields.size(), width) + 1,
                           "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                               " fields, expected " + std::to_string(width));
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    return table;
}

CsvTable read_csv_table(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError(0, 0, "cannot open '" + path.string() + "' for reading");
    return read_csv_table(in, options);
}

NamedData read_data_csv(const std::filesystem::path& path, const CsvOptions& options) {
    const auto table = read_csv_table(path, options);
    if (table.rows.empty()) throw CsvError(0, 0, "'" + path.string() + "' contains no data rows");
    const Index n = static_cast<Index>(table.rows.size());
    const Index J = static_cast<Index>(table.rows[0].size());
    Matrix values(n, J);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < J; ++j) {
            double v = 0.0;
            const auto& cell = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (!parse_double(cell, v) || !std::isfinite(v)) {
                const auto line = table.line_numbers[static_cast<std::size_t>(i)];
                throw CsvError(line, static_cast<std::size_t>(j) + 1,
                               "line " + std::to_string(line) + ", column " + std::to_string(j + 1) +
                                   ": not a finite number: '" + cell + "'");
            }
            values(i, j) = v;
        }
    }
    return NamedData{DataMatrix(std::move(values)), table.header};
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header,
                      const std::string& comment_line) {
    auto out = open_out(path);
    if (!comment_line.empty()) out << '#' << ' ' << comment_line << '\n';
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << csv_field(header[j]);
        out << '\n';
    }
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
        out << '\n';
    }
}

Matrix read_matrix_csv(const std::filesystem::path& path, HeaderMode header) {
    CsvOptions opts;
    opts.header = header;
    return read_data_csv(path, opts).data.values();
}

void write_estimate_csv(const std::filesystem::path& path, const SelectionReport& report) {
    write_matrix_csv(path, report.estimate.dense(), {},
                     "J=" + std::to_string(report.estimate.dim()) + " selected=" + report.selected_id);
}

void write_risk_table_csv(const std::filesystem::path& path, const SelectionReport& report) {
    std::vector<std::size_t> order(report.candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ca = report.candidates[a];
        const auto& cb = report.candidates[b];
        if (ca.failed != cb.failed) return !ca.failed;
        if (ca.failed) return a < b;
        if (ca.cv_risk != cb.cv_risk) return ca.cv_risk < cb.cv_risk;
        return a < b;
    });
    auto out = open_out(path);
    out << "id,family,hyperparameters,cv_risk,psd,selected,failure\n";
    for (auto k : order) {
        const auto& c = report.candidates[k];
        std::string hp;
        for (const auto& [name, value] : c.hyperparameters) {
            if (!hp.empty()) hp += ';';
            hp += name + "=" + format_double(value);
        }
        out << csv_field(c.id) << ',' << family_name(c.family) << ',' << csv_field(hp) << ','
            << (c.failed ? "" : format_double(c.cv_risk)) << ','
            << (c.psd ? (*c.psd ? "true" : "false") : "") << ','
            << (k == report.selected_index ? "true" : "false") << ',' << csv_field(c.failure) << '\n';
    }
}

std::string selection_report_json(const SelectionReport& report) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["n"] = report.n;
    j["J"] = report.J;
    j["K"] = report.candidates.size();
    j["scheme"] = report.scheme;
    j["seed"] = report.seed;
    j["p_n"] = report.p_n;
    j["folds"] = report.fold_count;
    j["eta"] = eta_policy_name(report.eta);
    j["risk"] = report.route == RiskRoute::Observation ? "observation" : "matrix";
    j["centered"] = report.centered;
    j["selected_index"] = report.selected_index;
    j["selected_id"] = report.selected_id;
    j["tie_ids"] = report.tie_ids;
    j["warnings"] = report.warnings;
    json cands = json::array();
    for (const auto& c : report.candidates) {
        json row;
        row["id"] = c.id;
        row["family"] = family_name(c.family);
        json hp = json::object();
        for (const auto& [name, value] : c.hyperparameters) hp[name] = value;
        row["hyperparameters"] = hp;
        row["cv_risk"] = c.failed ? json(nullptr) : number_or_null(c.cv_risk);
        row["failed"] = c.failed;
        if (c.failed) row["failure"] = c.failure;
        row["psd"] = c.psd ? json(*c.psd) : json(nullptr);
        cands.push_back(std::move(row));
    }
    j["candidates"] = std::move(cands);
    return j.dump(2) + "\n";
}

Matrix pca_scores(const DataMatrix& data, const SymMatrix& estimate, int components, bool center) {
    if (components < 0 || components > data.J()) {
        throw ConfigError("PCA component count must lie in [0, J]");
    }
    if (estimate.dim() != data.J()) throw InvalidInput("estimate dimension does not match the data");
    const DataMatrix prepared = center && data.n() >= 2 ? center_columns(data) : data;
    const auto eig = eigendecompose(estimate);
    return prepared.values() * eig.vectors.leftCols(components);
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << "model,n,J,ratio,replication,subject,metric,value,seed\n";
    for (const auto& r : rows) {
        out << r.model << ',' << r.n << ',' << r.J << ',' << format_double(r.ratio) << ',' << r.replication << ','
            << csv_field(r.subject) << ',' << csv_field(r.metric) << ',' << format_double(r.value) << ','
            << r.seed << '\n';
    }
}

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
    auto out = open_out(path);
    write_results_csv(out, rows);
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
    CsvOptions opts;
    opts.header = HeaderMode::Present;
    const auto table = read_csv_table(path, opts);
    const std::vector<std::string> expected{"model", "n", "J", "ratio", "replication", "subject",
                                            "metric", "value", "seed"};
    if (table.header != expected) throw CsvError(1, 0, "unexpected results.csv header");
    std::vector<ResultRow> rows;
    rows.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& f = table.rows[i];
        const auto line = table.line_numbers[i];
        auto num = [&](std::size_t col) {
            double v = 0.0;
            if (!parse_double(f[col], v)) {
                throw CsvError(line, col + 1, "line " + std::to_string(line) + ": bad number '" + f[col] + "'");
            }
            return v;
        };
        ResultRow r;
        r.model = static_cast<int>(num(0));
        r.n = static_cast<Index>(num(1));
        r.J = static_cast<Index>(num(2));
        r.ratio = num(3);
        r.replication = static_cast<int>(num(4));
        r.subject = f[5];
        r.metric = f[6];
        r.value = num(7);
        try {
            r.seed = std::stoull(f[8]);
        } catch (const std::exception&) {
            throw CsvError(line, 9, "line " + std::to_string(line) + ": bad seed '" + f[8] + "'");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string summary_json(const std::vector<CellSummary>& cells, const ExperimentConfig& config,
                         const std::vector<std::string>& log) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["master_seed"] = config.master_seed;
    j["replications"] = config.replications;
    j["scheme"] = config.scheme.describe();
    j["p_n"] = config.scheme.validation_proportion();
    j["K"] = config.library.size();
    j["log"] = log;
    json out = json::array();
    for (const auto& c : cells) {
        json cell;
        cell["model"] = c.model;
        cell["n"] = c.n;
        cell["J"] = c.J;
        cell["ratio"] = c.ratio;
        cell["replications"] = c.replications;
        cell["cv_ratio_of_means"] = optional_number(c.cv_ratio_of_means);
        cell["cv_ratio_mean_of_ratios"] = optional_number(c.cv_ratio_mean_of_ratios);
        json per_rep = json::array();
        for (double v : c.cv_ratio_per_replication) per_rep.push_back(number_or_null(v));
        cell["cv_ratio_per_replication"] = std::move(per_rep);
        cell["full_ratio_of_means"] = optional_number(c.full_ratio_of_means);
        cell["full_ratio_mean_of_ratios"] = optional_number(c.full_ratio_mean_of_ratios);
        json full_rep = json::array();
        for (double v : c.full_ratio_per_replication) full_rep.push_back(number_or_null(v));
        cell["full_ratio_per_replication"] = std::move(full_rep);
        json frob = json::object();
        for (const auto& [s, v] : c.mean_frobenius) frob[s] = number_or_null(v);
        cell["mean_frobenius"] = std::move(frob);
        json spec = json::object();
        for (const auto& [s, v] : c.mean_spectral) spec[s] = number_or_null(v);
        cell["mean_spectral"] = std::move(spec);
        if (c.bound) {
            const auto& b = *c.bound;
            cell["bound"] = {
                {"label", "empirical plug-ins, not almost-sure bounds"},
                {"delta", b.delta},
                {"M1", b.M1},
                {"M2", b.M2},
                {"K", b.K},
                {"p_n", b.p_n},
                {"M_bar", b.bound.M_bar},
                {"c", b.bound.c_value},
                {"bound_term", b.bound.bound_term},
                {"selector_mean", b.selector_mean},
                {"oracle_mean", b.oracle_mean},
                {"rhs", b.bound.rhs},
                {"holds", b.holds},
            };
        } else {
            cell["bound"] = nullptr;
        }
        out.push_back(std::move(cell));
    }
    j["cells"] = std::move(out);
    return j.dump(2) + "\n";
}

void write_norms_csv(const std::filesystem::path& path, const std::vector<CellSummary>& cells) {
    auto out = open_out(path);
    out << "model,n,J,ratio,subject,metric,mean,replications\n";
    for (const auto& c : cells) {
        for (const auto& [metric, table] :
             {std::pair<const char*, const std::map<std::string, double>*>{"frobenius", &c.mean_frobenius},
              {"spectral", &c.mean_spectral}}) {
            for (const auto& [subj, v] : *table) {
                out << c.model << ',' << c.n << ',' << c.J << ',' << format_double(c.ratio) << ','
                    << csv_field(subj) << ',' << metric << ',' << format_double(v) << ',' << c.replications
                    << '\n';
            }
        }
    }
}

}  // namespace cvcov::io
