#pragma once

#include "stcert/evaluation.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace stcert
{

// Machine-readable summaries. Every summary carries a "kind" field:
// "eval", "sweep", "cross" or "adv".
nlohmann::json eval_summary(const MetricsReport& report);
nlohmann::json adv_summary(const AdvReport& report);
nlohmann::json sweep_summary(const SweepResult& sweep);
nlohmann::json cross_summary(const CrossMatrix& matrix);

// CSV reports. One row per category (eval), per level (sweep),
// per pair (cross and adv).
std::string eval_csv(const MetricsReport& report);
std::string adv_csv(const AdvReport& report);
std::string sweep_csv(const SweepResult& sweep);
std::string per_class_csv(const SweepResult& sweep, const Taxonomy& taxonomy);
std::string cross_csv(const CrossMatrix& matrix);

struct Series
{
    std::string name;
    std::vector<double> values;
};

/// Grouped bar chart; bars carry their numeric value as a text label.
std::string bar_chart_svg(const std::string& title,
                          const std::vector<std::string>& groups,
                          const std::vector<Series>& series);

/// Line chart of values against categorical x positions.
std::string line_chart_svg(const std::string& title,
                           const std::vector<std::string>& x_labels,
                           const std::vector<Series>& series);

/// Writes the charts for a summary document into `out_dir` and returns the
/// file names written. Throws ConfigError on a malformed summary.
std::vector<std::filesystem::path> render_report(const nlohmann::json& summary, const std::filesystem::path& out_dir);

/// Summary document rebuilt from a trial log (eval or adv, by record kind).
nlohmann::json summary_from_log(const std::vector<TrialRecord>& log);

void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace stcert
