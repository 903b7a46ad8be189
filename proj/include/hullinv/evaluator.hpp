#pragma once

// Test-set error reports in millimetres, one row per model or image case and
// one column per section plus a pooled Total.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hullinv/dataset.hpp"
#include "hullinv/model.hpp"
#include "hullinv/trainer.hpp"

namespace hullinv::eval {

struct ReportRow {
  std::string name;
  std::vector<double> sections;  // RMSE per section
  double total = 0.0;            // sqrt(sum SSE / sum count) over every entry

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct EvalReport {
  std::string title;
  int sections = 14;
  std::vector<ReportRow> rows;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Running per-section squared error.
class ErrorAccumulator {
 public:
  explicit ErrorAccumulator(int sections);
  void add(int section, double diff);
  ReportRow row(const std::string& name) const;

 private:
  std::vector<double> sse_;
  std::vector<std::size_t> count_;
};

// Predictions and labels in mm, same layout.
ReportRow control_point_rmse(std::span<const LabelVector> predictions,
                             std::span<const LabelVector> labels, const std::string& name);

// Reconstructs each predicted section with `levels` points, then compares y at
// `levels` z levels against the truth offsets.
ReportRow offset_rmse(std::span<const LabelVector> predictions,
                      std::span<const std::vector<hullgeom::SectionOffsets>> truth,
                      const std::string& name, int levels = hullgeom::kDefaultZLevels);

// The representation floor: offset_rmse of the fitted labels themselves.
ReportRow bspline_row(std::span<const data::Sample* const> samples,
                      const std::string& name = "B-spline",
                      int levels = hullgeom::kDefaultZLevels);

// De-normalized model predictions for each sample.
std::vector<LabelVector> predict(const model::ModelParams& params,
                                 std::span<const data::Sample* const> samples,
                                 const data::Normalization& norm);

enum class Protocol { kControl, kOffset };

ReportRow evaluate(const model::ModelParams& params, const data::Dataset& dataset,
                   data::Split split, Protocol protocol, const std::string& name);

enum class Format { kCsv, kMarkdown };
Format parse_format(const std::string& text);

void emit_report(std::ostream& out, const EvalReport& report, Format format);
void emit_report(const std::filesystem::path& path, const EvalReport& report, Format format);
EvalReport parse_report_csv(std::istream& in, const std::string& source = "<stream>");
EvalReport read_report_csv(const std::filesystem::path& path);

struct CaseStudyResult {
  EvalReport report;        // rows Case1, Case1-1, Case2, Case2-1
  std::string best_case;    // lowest Total
};

// Trains one model per image case on datasets that differ only in the image
// case and reports test-set control-point RMSE.
CaseStudyResult image_case_study(const data::DatasetConfig& base, const model::ArchitectureSpec& spec,
                                 const train::TrainConfig& config, int workers = 1);

}  // namespace hullinv::eval
