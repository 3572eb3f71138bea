#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "srdrm/errors.hpp"
#include "srdrm/metrics.hpp"

namespace srdrm {

namespace fs = std::filesystem;

namespace {

std::map<std::string, fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  }
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) {
      out.emplace(entry.path().filename().string(), entry.path());
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  os << text;
  if (!os) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace

void MetricReport::recompute_mean() {
  if (rows.empty()) {
    mean.reset();
    return;
  }
  MetricRow m;
  m.id = "mean";
  for (const MetricRow& r : rows) {
    m.psnr += r.psnr;
    m.ssim += r.ssim;
    m.uiqm += r.uiqm;
  }
  const double n = static_cast<double>(rows.size());
  m.psnr /= n;
  m.ssim /= n;
  m.uiqm /= n;
  mean = m;
}

MetricRow score_pair(std::string id, const ImageRGB8& generated, const ImageRGB8& truth) {
  MetricRow row;
  row.id = std::move(id);
  row.psnr = psnr(generated, truth);
  row.ssim = ssim(generated, truth);
  row.uiqm = uiqm(generated).uiqm;
  return row;
}

MetricReport evaluate_dataset(const fs::path& generated_dir, const fs::path& truth_dir,
                              std::string scale_tag) {
  const auto generated = list_images(generated_dir);
  const auto truth = list_images(truth_dir);

  MetricReport report;
  report.scale_tag = std::move(scale_tag);
  std::vector<std::string> names;
  for (const auto& [name, path] : generated) {
    if (truth.contains(name)) {
      names.push_back(name);
    } else {
      report.unmatched.push_back(name);
    }
  }
  for (const auto& [name, path] : truth) {
    if (!generated.contains(name)) report.unmatched.push_back(name);
  }
  std::sort(report.unmatched.begin(), report.unmatched.end());

  report.rows.resize(names.size());
  std::vector<std::string> errors(names.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(names.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      const ImageRGB8 gen = read_image(generated.at(names[k]));
      const ImageRGB8 ref = read_image(truth.at(names[k]));
      report.rows[k] = score_pair(names[k], gen, ref);
    } catch (const std::exception& e) {
      errors[k] = fmt::format("{}: {}", names[k], e.what());
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw ContractError(e);
  }
  report.recompute_mean();
  return report;
}

std::string format_report(const MetricReport& report) {
  std::size_t id_width = 4;
  for (const MetricRow& r : report.rows) id_width = std::max(id_width, r.id.size());
  std::string out;
  if (!report.scale_tag.empty()) out += fmt::format("scale {}\n", report.scale_tag);
  out += fmt::format("{:<{}}  {:>9}  {:>7}  {:>7}\n", "id", id_width, "psnr_db", "ssim",
                     "uiqm");
  auto line = [&](const MetricRow& r) {
    return fmt::format("{:<{}}  {:>9.4f}  {:>7.4f}  {:>7.4f}\n", r.id, id_width, r.psnr,
                       r.ssim, r.uiqm);
  };
  for (const MetricRow& r : report.rows) out += line(r);
  if (report.mean) {
    out += std::string(id_width + 31, '-') + "\n";
    out += line(*report.mean);
  } else {
    out += "no matched pairs; no aggregate\n";
  }
  for (const std::string& name : report.unmatched) {
    out += fmt::format("unmatched: {}\n", name);
  }
  return out;
}

std::string format_report_csv(const MetricReport& report) {
  std::string out = "id,psnr,ssim,uiqm\n";
  auto line = [](const MetricRow& r) {
    return fmt::format("{},{:.17g},{:.17g},{:.17g}\n", r.id, r.psnr, r.ssim, r.uiqm);
  };
  for (const MetricRow& r : report.rows) out += line(r);
  if (report.mean) out += line(*report.mean);
  return out;
}

void write_report(const MetricReport& report, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, format_report(report));
  fs::path csv = path;
  csv.replace_extension(".csv");
  if (csv == path) csv += ".csv";
  write_text(csv, format_report_csv(report));
}

}  // namespace srdrm
