#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ledgerlab/attacks.hpp"
#include "ledgerlab/scenario.hpp"

namespace ledgerlab {

enum class ReportFormat : std::uint8_t { Structured, Table };

std::string_view to_string(ReportFormat format);
std::optional<ReportFormat> parse_report_format(std::string_view text);

/// Everything needed to repeat a run; echoed into every report header.
struct RunConfig {
    std::string scenario;
    std::vector<std::string> toggles;
    bool permissionless = false;
    std::size_t maintainers = 5;
    double adversary_power = 0.0;
    std::string adversary = "withholder";
    std::optional<std::size_t> confirmation_depth;
    Round rounds = 400;
    std::uint64_t seed = kDefaultSeed;
    std::uint64_t trials = 1000;
    std::filesystem::path out = ".";
    ReportFormat format = ReportFormat::Table;

    std::string engine_name() const { return permissionless ? "permissionless" : "permissioned"; }
    /// Command-line arguments that reproduce the run.
    std::vector<std::string> arguments(std::string_view verb) const;
};

std::string verdict_report(const Scenario& s, ReportFormat format);

std::string run_report(const RunConfig& cfg, const Scenario& s, const ScenarioRun& run, ReportFormat format);

struct AttackParameters {
    std::string attack;
    std::vector<std::pair<std::string, std::string>> values;   // as given, in order
};

std::string attack_report(const RunConfig& cfg, const AttackParameters& params, const AttackOutcome& outcome,
                          ReportFormat format);
std::string divergence_report(const RunConfig& cfg, const AttackParameters& params, const DivergenceReport& report,
                              ReportFormat format);

struct MatrixRow {
    std::string scenario;
    bool object_creation = false;
    bool internal_predicate = false;
    std::size_t trusted_entities = 0;
};

/// One row per scenario, ordered by name.
std::vector<MatrixRow> verdict_matrix(const std::vector<Scenario>& scenarios);
std::string matrix_report(const std::vector<MatrixRow>& rows,
                          const std::vector<std::pair<std::filesystem::path, std::string>>& errors, ReportFormat format);

} // namespace ledgerlab
