#include "hullinv/evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hullinv::eval {

ErrorAccumulator::ErrorAccumulator(int sections) : sse_(sections, 0.0), count_(sections, 0) {}

void ErrorAccumulator::add(int section, double diff) {
  sse_.at(section) += diff * diff;
  ++count_.at(section);
}

ReportRow ErrorAccumulator::row(const std::string& name) const {
  ReportRow r;
  r.name = name;
  double sse = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < sse_.size(); ++k) {
    r.sections.push_back(count_[k] ? std::sqrt(sse_[k] / static_cast<double>(count_[k])) : 0.0);
    sse += sse_[k];
    n += count_[k];
  }
  r.total = n ? std::sqrt(sse / static_cast<double>(n)) : 0.0;
  return r;
}

ReportRow control_point_rmse(std::span<const LabelVector> predictions,
                             std::span<const LabelVector> labels, const std::string& name) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("control_point_rmse: prediction and label counts differ");
  }
  const int sections = labels.empty() ? 0 : labels.front().sections;
  ErrorAccumulator acc(sections);
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const auto& y = labels[s];
    const auto& p = predictions[s];
    if (p.size() != y.size() || y.sections != sections) {
      throw std::invalid_argument("control_point_rmse: label length mismatch at sample " +
                                  std::to_string(s));
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      acc.add(static_cast<int>(i / y.task_size()), p.values[i] - y.values[i]);
    }
  }
  return acc.row(name);
}

ReportRow offset_rmse(std::span<const LabelVector> predictions,
                      std::span<const std::vector<hullgeom::SectionOffsets>> truth,
                      const std::string& name, int levels) {
  if (predictions.size() != truth.size()) {
    throw std::invalid_argument("offset_rmse: prediction and truth counts differ");
  }
  const int sections = truth.empty() ? 0 : static_cast<int>(truth.front().size());
  ErrorAccumulator acc(sections);
  for (std::size_t s = 0; s < truth.size(); ++s) {
    const auto polygons = polygons_from_labels(predictions[s]);
    if (static_cast<int>(polygons.size()) != sections ||
        static_cast<int>(truth[s].size()) != sections) {
      throw std::invalid_argument("offset_rmse: section count mismatch at sample " +
                                  std::to_string(s));
    }
    for (int k = 0; k < sections; ++k) {
      try {
        const auto recon = hullgeom::reconstruct_offsets(polygons[k], levels);
        const auto yp = hullgeom::interp_at_z_levels(recon, levels);
        const auto yt = hullgeom::interp_at_z_levels(truth[s][k], levels);
        for (int i = 0; i < levels; ++i) acc.add(k, yp[i] - yt[i]);
      } catch (const hullgeom::GeometryError& e) {
        throw hullgeom::GeometryError(e.code(),
                                      "sample " + std::to_string(s) + ", section " +
                                          std::to_string(k) + ": " + e.what(),
                                      k);
      }
    }
  }
  return acc.row(name);
}

ReportRow bspline_row(std::span<const data::Sample* const> samples, const std::string& name,
                      int levels) {
  std::vector<LabelVector> labels;
  std::vector<std::vector<hullgeom::SectionOffsets>> truth;
  for (const auto* s : samples) {
    if (s->offsets.empty()) throw std::invalid_argument("sample has no truth offsets");
    labels.push_back(s->label);
    truth.push_back(s->offsets);
  }
  return offset_rmse(labels, truth, name, levels);
}

std::vector<LabelVector> predict(const model::ModelParams& params,
                                 std::span<const data::Sample* const> samples,
                                 const data::Normalization& norm) {
  std::vector<LabelVector> out;
  out.reserve(samples.size());
  for (const auto* s : samples) {
    const auto fwd = model::forward(nullptr, params, train::input_tensor(s->image, norm));
    LabelVector p;
    p.sections = s->label.sections;
    p.controls = s->label.controls;
    p.values = norm.denormalize(fwd.prediction.values());
    out.push_back(std::move(p));
  }
  return out;
}

ReportRow evaluate(const model::ModelParams& params, const data::Dataset& dataset,
                   data::Split split, Protocol protocol, const std::string& name) {
  const auto samples = dataset.split(split);
  if (samples.empty()) {
    throw std::invalid_argument("dataset has no " + data::split_name(split) + " samples");
  }
  const auto preds = predict(params, samples, dataset.norm);
  if (protocol == Protocol::kControl) {
    std::vector<LabelVector> labels;
    for (const auto* s : samples) labels.push_back(s->label);
    return control_point_rmse(preds, labels, name);
  }
  std::vector<std::vector<hullgeom::SectionOffsets>> truth;
  for (const auto* s : samples) {
    if (s->offsets.empty()) throw std::invalid_argument("sample has no truth offsets");
    truth.push_back(s->offsets);
  }
  return offset_rmse(preds, truth, name);
}

Format parse_format(const std::string& text) {
  if (text == "csv") return Format::kCsv;
  if (text == "markdown" || text == "md") return Format::kMarkdown;
  throw std::invalid_argument("unknown report format '" + text + "' (expected csv or markdown)");
}

namespace {

std::string num(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

void emit_report(std::ostream& out, const EvalReport& report, Format format) {
  if (format == Format::kCsv) {
    out << "model";
    for (int k = 0; k < report.sections; ++k) out << ",Sec. " << k;
    out << ",Total\n";
    for (const auto& r : report.rows) {
      if (r.name.find_first_of(",\n") != std::string::npos) {
        throw std::invalid_argument("row name may not contain commas or newlines: " + r.name);
      }
      out << r.name;
      for (double v : r.sections) out << ',' << num("%.17g", v);
      out << ',' << num("%.17g", r.total) << '\n';
    }
    return;
  }
  if (!report.title.empty()) out << "**" << report.title << "**\n\n";
  out << "Unit: mm\n\n| Model |";
  for (int k = 0; k < report.sections; ++k) out << " Sec. " << k << " |";
  out << " Total |\n|---|";
  for (int k = 0; k <= report.sections; ++k) out << "---:|";
  out << '\n';
  for (const auto& r : report.rows) {
    out << "| " << r.name << " |";
    for (double v : r.sections) out << ' ' << num("%.3f", v) << " |";
    out << ' ' << num("%.3f", r.total) << " |\n";
  }
}

void emit_report(const std::filesystem::path& path, const EvalReport& report, Format format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  emit_report(out, report, format);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

EvalReport parse_report_csv(std::istream& in, const std::string& source) {
  EvalReport report;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(source + ": empty report file");
  {
    std::stringstream hs(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(hs, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2 || cells.front() != "model" || cells.back() != "Total") {
      throw std::runtime_error(source + ":1: not a report header");
    }
    report.sections = static_cast<int>(cells.size()) - 2;
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != report.sections + 2) {
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": wrong column count");
    }
    ReportRow r;
    r.name = cells[0];
    try {
      for (int k = 0; k < report.sections; ++k) r.sections.push_back(std::stod(cells[k + 1]));
      r.total = std::stod(cells.back());
    } catch (const std::logic_error&) {
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": bad number");
    }
    report.rows.push_back(std::move(r));
  }
  return report;
}

EvalReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report " + path.string());
  return parse_report_csv(in, path.string());
}

CaseStudyResult image_case_study(const data::DatasetConfig& base,
                                 const model::ArchitectureSpec& spec,
                                 const train::TrainConfig& config, int workers) {
  CaseStudyResult result;
  result.report.title = "Control point RMSE by input image case";
  result.report.sections = spec.sections;
  double best = 0.0;
  for (auto c : {synth::ImageCase::kCase1, synth::ImageCase::kCase1_1, synth::ImageCase::kCase2,
                 synth::ImageCase::kCase2_1}) {
    auto cfg = base;
    cfg.image_case = c;
    const auto ds = data::generate_dataset(cfg, workers);
    const auto trained = train::train(ds, spec, config);
    auto row = evaluate(trained.best.params, ds, data::Split::kTest, Protocol::kControl,
                        synth::case_tag(c));
    if (result.best_case.empty() || row.total < best) {
      best = row.total;
      result.best_case = row.name;
    }
    result.report.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace hullinv::eval
