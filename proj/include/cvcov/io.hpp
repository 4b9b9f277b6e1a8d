#pragma once

#include "cvcov/cv_engine.hpp"
#include "cvcov/errors.hpp"
#include "cvcov/matrix_core.hpp"
#include "cvcov/simulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cvcov::io {

inline constexpr int kSchemaVersion = 1;

/// Parse failure with 1-based line and column (0 when not applicable).
class CsvError : public InvalidInput {
public:
    CsvError(std::size_t line, std::size_t column, const std::string& what)
        : InvalidInput(what), line_(line), column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

enum class HeaderMode { Auto, Present, Absent };

struct CsvOptions {
    char delimiter = ',';
    HeaderMode header = HeaderMode::Auto;
    /// Lines starting with this character are skipped.
    char comment = '#';
};

struct CsvTable {
    std::vector<std::string> header;  // empty when absent
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // source line of each row
};

/// Reads delimiter-separated text with optional double-quoted fields. Rejects
/// ragged rows with a CsvError naming the line.
CsvTable read_csv_table(std::istream& in, const CsvOptions& options);
CsvTable read_csv_table(const std::filesystem::path& path, const CsvOptions& options);

struct NamedData {
    DataMatrix data;
    std::vector<std::string> column_names;  // empty when the file has no header
};

/// Numeric observation matrix, rows = observations.
NamedData read_data_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Dense numeric matrix; `comment_line` (without the leading '#') is written first when non-empty.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header = {}, const std::string& comment_line = "");
Matrix read_matrix_csv(const std::filesystem::path& path, HeaderMode header = HeaderMode::Auto);

/// estimate.csv: "# J=<J> selected=<id>" then the dense J x J matrix.
void write_estimate_csv(const std::filesystem::path& path, const SelectionReport& report);

/// Rows sorted by cv_risk ascending then library index; failed candidates last.
void write_risk_table_csv(const std::filesystem::path& path, const SelectionReport& report);

std::string selection_report_json(const SelectionReport& report);

/// (centered) data times the leading `components` eigenvectors of `estimate`.
Matrix pca_scores(const DataMatrix& data, const SymMatrix& estimate, int components, bool center);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

std::string summary_json(const std::vector<CellSummary>& cells, const ExperimentConfig& config,
                         const std::vector<std::string>& log);

/// Mean norm per (cell, subject, metric) for benchmark runs.
void write_norms_csv(const std::filesystem::path& path, const std::vector<CellSummary>& cells);

}  // namespace cvcov::io
