#pragma once

#include "cvcov/cv_engine.hpp"
#include "cvcov/estimators.hpp"
#include "cvcov/io.hpp"
#include "cvcov/simulation.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cvcov::config {

/// Ordered key/value sections. Parsed from the INI-style text format or from
/// JSON (objects of scalars/arrays, nested one level for "candidates.<family>").
struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    const std::string* find(const std::string& key) const;
};

struct Document {
    std::vector<Section> sections;

    const Section* find(const std::string& name) const;
    /// Sections named "<prefix>.<x>", in file order.
    std::vector<const Section*> with_prefix(const std::string& prefix) const;
};

Document parse_ini(const std::string& text);
Document parse_json(const std::string& text);
/// Dispatch on content: a leading '{' means JSON.
Document load(const std::filesystem::path& path);

/// "0.1:1.0:0.1, 2" style lists; ranges are inclusive and default to step 1.
std::vector<double> parse_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);
bool parse_bool(const std::string& text);

/// Expand a library from "<prefix>" (preset) and "<prefix>.<family>" sections.
/// Returns std::nullopt when neither is present.
std::optional<CandidateLibrary> build_library(const Document& doc, const std::string& prefix);

struct SelectConfig {
    std::filesystem::path input;
    io::CsvOptions csv;
    SplitScheme scheme = SplitScheme::vfold(5, 20240101);
    CandidateLibrary library = default_library();
    EtaPolicy eta = EtaPolicy::One;
    std::filesystem::path out_dir = ".";
    int pca = 0;
    bool center = true;
    unsigned threads = 1;
};

SelectConfig select_config(const Document& doc);

enum class Profile { Smoke, Desk, Full };
Profile profile_from_name(const std::string& name);
std::string profile_name(Profile p);

/// Defaults for a profile before config-file overrides.
ExperimentConfig profile_defaults(Profile p);

struct SimulateConfig {
    Profile profile = Profile::Smoke;
    ExperimentConfig experiment;
    CandidateLibrary competitors = competitor_library();
    std::filesystem::path out_dir = ".";
};

/// Reads [experiment] (and [competitors*] for benchmarks) on top of the profile defaults.
SimulateConfig simulate_config(const Document& doc, std::optional<Profile> profile_override);

}  // namespace cvcov::config
