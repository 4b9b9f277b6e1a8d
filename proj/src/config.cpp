#include "cvcov/config.hpp"

#include "cvcov/errors.hpp"
#include "cvcov/format.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cvcov::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

double number(const std::string& text, const std::string& what) {
    double v = 0.0;
    if (!parse_double(text, v) || !std::isfinite(v)) {
        throw ConfigError(what + ": expected a number, got '" + text + "'");
    }
    return v;
}

int integer(const std::string& text, const std::string& what) {
    const double v = number(text, what);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(what + ": expected an integer, got '" + text + "'");
    return static_cast<int>(v);
}

std::uint64_t unsigned64(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw ConfigError(what + ": expected an unsigned integer, got '" + text + "'");
    }
    try {
        return std::stoull(t);
    } catch (const std::exception&) {
        throw ConfigError(what + ": value out of range '" + text + "'");
    }
}

void check_keys(const Section& s, const std::set<std::string>& allowed) {
    for (const auto& [k, v] : s.entries) {
        if (!allowed.count(k)) throw ConfigError("[" + s.name + "]: unknown key '" + k + "'");
    }
}

const std::string& require_key(const Section& s, const std::string& key) {
    const auto* v = s.find(key);
    if (v == nullptr) throw ConfigError("[" + s.name + "]: missing key '" + key + "'");
    return *v;
}

}  // namespace

const std::string* Section::find(const std::string& key) const {
    const std::string* found = nullptr;
    for (const auto& [k, v] : entries) {
        if (k == key) found = &v;
    }
    return found;
}

const Section* Document::find(const std::string& name) const {
    for (const auto& s : sections) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

std::vector<const Section*> Document::with_prefix(const std::string& prefix) const {
    std::vector<const Section*> out;
    for (const auto& s : sections) {
        if (s.name.size() > prefix.size() + 1 && s.name.compare(0, prefix.size(), prefix) == 0 &&
            s.name[prefix.size()] == '.') {
            out.push_back(&s);
        }
    }
    return out;
}

Document parse_ini(const std::string& text) {
    Document doc;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
            const std::string name = trim(t.substr(1, t.size() - 2));
            if (name.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
            if (doc.find(name) != nullptr) {
                throw ConfigError("line " + std::to_string(line_no) + ": duplicate section [" + name + "]");
            }
            doc.sections.push_back({name, {}});
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        if (doc.sections.empty()) doc.sections.push_back({"", {}});
        std::string value = trim(t.substr(eq + 1));
        const auto hash = value.find(" #");
        if (hash != std::string::npos) value = trim(value.substr(0, hash));
        doc.sections.back().entries.emplace_back(trim(t.substr(0, eq)), value);
    }
    return doc;
}

namespace {

std::string scalar_text(const nlohmann::json& v, const std::string& where) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_float()) return format_double(v.get<double>());
    throw ConfigError(where + ": unsupported JSON value");
}

void flatten(const std::string& name, const nlohmann::json& obj, Document& doc) {
    Section section{name, {}};
    std::vector<std::pair<std::string, const nlohmann::json*>> nested;
    for (const auto& [key, value] : obj.items()) {
        if (value.is_object()) {
            nested.emplace_back(key, &value);
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& item : value) {
                if (!joined.empty()) joined += ", ";
                joined += scalar_text(item, name + "." + key);
            }
            section.entries.emplace_back(key, joined);
        } else {
            section.entries.emplace_back(key, scalar_text(value, name + "." + key));
        }
    }
    doc.sections.push_back(std::move(section));
    for (const auto& [key, value] : nested) flatten(name + "." + key, *value, doc);
}

}  // namespace

Document parse_json(const std::string& text) {
    nlohmann::ordered_json parsed;
    try {
        parsed = nlohmann::ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    if (!parsed.is_object()) throw ConfigError("JSON config must be an object of sections");
    Document doc;
    for (const auto& [name, value] : parsed.items()) {
        if (!value.is_object()) throw ConfigError("JSON section '" + name + "' must be an object");
        flatten(name, nlohmann::json(value), doc);
    }
    return doc;
}

Document load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return parse_json(text);
    return parse_ini(text);
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split(text, ',')) {
        if (item.empty()) continue;
        const auto parts = split(item, ':');
        if (parts.size() == 1) {
            out.push_back(number(parts[0], "list item"));
        } else if (parts.size() == 2 || parts.size() == 3) {
            const double step = parts.size() == 3 ? number(parts[2], "range step") : 1.0;
            const auto grid = decimal_grid(number(parts[0], "range start"), number(parts[1], "range stop"), step);
            out.insert(out.end(), grid.begin(), grid.end());
        } else {
            throw ConfigError("bad range '" + item + "' (expected start:stop[:step])");
        }
    }
    if (out.empty()) throw ConfigError("empty list '" + text + "'");
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_list(text)) {
        if (v != std::floor(v)) throw ConfigError("expected integers in '" + text + "'");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

bool parse_bool(const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
    if (t == "false" || t == "no" || t == "0" || t == "off") return false;
    throw ConfigError("expected a boolean, got '" + text + "'");
}

namespace {

void expand_family(const Section& s, const std::string& family, std::vector<EstimatorSpec>& out) {
    if (family == "truth") {
        check_keys(s, {});
        out.push_back(EstimatorSpec::truth());
        return;
    }
    switch (family_from_name(family)) {
        case Family::SampleCov:
            check_keys(s, {});
            out.push_back(EstimatorSpec::sample_cov());
            break;
        case Family::LinearShrinkage:
            check_keys(s, {});
            out.push_back(EstimatorSpec::linear_shrinkage());
            break;
        case Family::DenseLinearShrinkage:
            check_keys(s, {});
            out.push_back(EstimatorSpec::dense_shrinkage());
            break;
        case Family::HardThreshold:
            check_keys(s, {"thresholds"});
            for (double u : parse_list(require_key(s, "thresholds"))) out.push_back(EstimatorSpec::hard(u));
            break;
        case Family::ScadThreshold: {
            check_keys(s, {"thresholds", "a"});
            const auto* a = s.find("a");
            const auto shapes = a ? parse_list(*a) : std::vector<double>{3.7};
            for (double shape : shapes) {
                for (double u : parse_list(require_key(s, "thresholds"))) out.push_back(EstimatorSpec::scad(u, shape));
            }
            break;
        }
        case Family::AdaptiveLassoThreshold:
            check_keys(s, {"thresholds", "exponents"});
            for (double u : parse_list(require_key(s, "thresholds"))) {
                for (double e : parse_list(require_key(s, "exponents"))) {
                    out.push_back(EstimatorSpec::adaptive_lasso(u, e));
                }
            }
            break;
        case Family::Banding:
            check_keys(s, {"bands"});
            for (int b : parse_int_list(require_key(s, "bands"))) out.push_back(EstimatorSpec::banding(b));
            break;
        case Family::Tapering:
            check_keys(s, {"bands"});
            for (int b : parse_int_list(require_key(s, "bands"))) out.push_back(EstimatorSpec::tapering(b));
            break;
        case Family::Poet:
            check_keys(s, {"factors", "thresholds"});
            for (int L : parse_int_list(require_key(s, "factors"))) {
                for (double u : parse_list(require_key(s, "thresholds"))) out.push_back(EstimatorSpec::poet(L, u));
            }
            break;
        case Family::Fixed: throw ConfigError("[" + s.name + "]: fixed candidates cannot be declared in config files");
    }
}

CandidateLibrary preset_library(const std::string& name) {
    if (name == "default") return default_library();
    if (name == "competitors") return competitor_library();
    if (name == "single_cell") return single_cell_library();
    throw ConfigError("unknown library preset '" + name + "' (expected default, competitors, single_cell, none)");
}

}  // namespace

std::optional<CandidateLibrary> build_library(const Document& doc, const std::string& prefix) {
    const Section* head = doc.find(prefix);
    const auto families = doc.with_prefix(prefix);
    if (head == nullptr && families.empty()) return std::nullopt;
    std::vector<EstimatorSpec> specs;
    if (head != nullptr) {
        check_keys(*head, {"preset"});
        if (const auto* preset = head->find("preset"); preset != nullptr && *preset != "none") {
            const auto lib = preset_library(*preset);
            specs.assign(lib.begin(), lib.end());
        }
    }
    for (const Section* s : families) expand_family(*s, s->name.substr(prefix.size() + 1), specs);
    return CandidateLibrary(std::move(specs));
}

namespace {

io::HeaderMode header_mode(const std::string& v) {
    if (v == "auto") return io::HeaderMode::Auto;
    if (v == "yes" || v == "true") return io::HeaderMode::Present;
    if (v == "no" || v == "false") return io::HeaderMode::Absent;
    throw ConfigError("header must be auto, yes or no");
}

char delimiter(const std::string& v) {
    if (v == "tab" || v == "\\t") return '\t';
    if (v == "comma" || v == ",") return ',';
    if (v == "semicolon" || v == ";") return ';';
    if (v == "space") return ' ';
    if (v.size() == 1) return v[0];
    throw ConfigError("unsupported delimiter '" + v + "'");
}

/// folds / pn / splits / seed keys shared by [select] and [experiment].
SplitScheme read_scheme(const Section& s, SplitScheme scheme) {
    if (const auto* seed = s.find("seed")) scheme.seed = unsigned64(*seed, "seed");
    const auto* folds = s.find("folds");
    const auto* pn = s.find("pn");
    if (folds && pn) throw ConfigError("[" + s.name + "]: 'folds' and 'pn' are mutually exclusive");
    if (folds) scheme.design = VFold{integer(*folds, "folds")};
    if (pn) {
        const double p = number(*pn, "pn");
        const auto* splits = s.find("splits");
        if (splits) {
            scheme.design = MonteCarloSplit{integer(*splits, "splits"), p};
        } else {
            scheme.design = SingleSplit{p};
        }
    } else if (s.find("splits")) {
        throw ConfigError("[" + s.name + "]: 'splits' requires 'pn'");
    }
    return scheme;
}

}  // namespace

SelectConfig select_config(const Document& doc) {
    SelectConfig cfg;
    if (const Section* s = doc.find("select")) {
        check_keys(*s, {"input", "delimiter", "header", "folds", "pn", "splits", "seed", "eta", "pca", "center",
                        "out", "threads"});
        if (const auto* v = s->find("input")) cfg.input = *v;
        if (const auto* v = s->find("delimiter")) cfg.csv.delimiter = delimiter(*v);
        if (const auto* v = s->find("header")) cfg.csv.header = header_mode(*v);
        cfg.scheme = read_scheme(*s, cfg.scheme);
        if (const auto* v = s->find("eta")) cfg.eta = eta_policy_from_name(*v);
        if (const auto* v = s->find("pca")) cfg.pca = integer(*v, "pca");
        if (const auto* v = s->find("center")) cfg.center = parse_bool(*v);
        if (const auto* v = s->find("out")) cfg.out_dir = *v;
        if (const auto* v = s->find("threads")) cfg.threads = static_cast<unsigned>(std::max(1, integer(*v, "threads")));
    }
    if (auto lib = build_library(doc, "library")) cfg.library = std::move(*lib);
    if (cfg.pca < 0) throw ConfigError("pca must be >= 0");
    return cfg;
}

Profile profile_from_name(const std::string& name) {
    if (name == "smoke") return Profile::Smoke;
    if (name == "desk") return Profile::Desk;
    if (name == "full") return Profile::Full;
    throw ConfigError("unknown profile '" + name + "' (expected smoke, desk, full)");
}

std::string profile_name(Profile p) {
    switch (p) {
        case Profile::Smoke: return "smoke";
        case Profile::Desk: return "desk";
        case Profile::Full: return "full";
    }
    return "smoke";
}

ExperimentConfig profile_defaults(Profile p) {
    ExperimentConfig c;
    c.scheme = SplitScheme::vfold(5, 0);
    c.library = default_library();
    switch (p) {
        case Profile::Smoke:
            c.models = {2};
            c.sample_sizes = {50};
            c.ratios = {0.3};
            c.replications = 2;
            c.metrics = {Metric::CvRatio, Metric::FullRatio, Metric::Frobenius, Metric::Spectral};
            break;
        case Profile::Desk:
            c.models = {1, 2, 3, 4, 5, 6, 7, 8};
            c.sample_sizes = {50, 100};
            c.ratios = {0.5, 1.0, 2.0};
            c.replications = 20;
            c.metrics = {Metric::CvRatio, Metric::FullRatio, Metric::Frobenius};
            break;
        case Profile::Full:
            c.models = {1, 2, 3, 4, 5, 6, 7, 8};
            c.sample_sizes = {50, 100, 200, 500};
            c.ratios = {0.3, 0.5, 1.0, 2.0, 5.0};
            c.replications = 200;
            c.metrics = {Metric::CvRatio, Metric::FullRatio, Metric::Frobenius, Metric::Spectral};
            break;
    }
    return c;
}

SimulateConfig simulate_config(const Document& doc, std::optional<Profile> profile_override) {
    SimulateConfig cfg;
    const Section* s = doc.find("experiment");
    if (s != nullptr) {
        check_keys(*s, {"profile", "models", "sample_sizes", "ratios", "replications", "metrics", "seed", "folds",
                        "pn", "splits", "threads", "fix_random_models", "eta", "center", "out"});
        if (const auto* v = s->find("profile")) cfg.profile = profile_from_name(*v);
    }
    if (profile_override) cfg.profile = *profile_override;
    cfg.experiment = profile_defaults(cfg.profile);
    auto& e = cfg.experiment;
    if (s != nullptr) {
        if (const auto* v = s->find("models")) e.models = parse_int_list(*v);
        if (const auto* v = s->find("sample_sizes")) {
            e.sample_sizes.clear();
            for (int n : parse_int_list(*v)) e.sample_sizes.push_back(n);
        }
        if (const auto* v = s->find("ratios")) e.ratios = parse_list(*v);
        if (const auto* v = s->find("replications")) e.replications = integer(*v, "replications");
        if (const auto* v = s->find("metrics")) {
            e.metrics.clear();
            for (const auto& m : split(*v, ',')) e.metrics.push_back(metric_from_name(m));
        }
        if (const auto* v = s->find("seed")) e.master_seed = unsigned64(*v, "seed");
        SplitScheme scheme = read_scheme(*s, e.scheme);
        scheme.seed = 0;
        e.scheme = scheme;
        if (const auto* v = s->find("threads")) e.threads = static_cast<unsigned>(std::max(1, integer(*v, "threads")));
        if (const auto* v = s->find("fix_random_models")) e.fix_random_models = parse_bool(*v);
        if (const auto* v = s->find("eta")) e.cv.eta = eta_policy_from_name(*v);
        if (const auto* v = s->find("center")) e.cv.center = parse_bool(*v);
        if (const auto* v = s->find("out")) cfg.out_dir = *v;
    }
    if (auto lib = build_library(doc, "library")) e.library = std::move(*lib);
    if (auto comp = build_library(doc, "competitors")) cfg.competitors = std::move(*comp);
    return cfg;
}

}  // namespace cvcov::config
