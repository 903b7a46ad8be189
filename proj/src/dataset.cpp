#include "hullinv/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "hullinv/config.hpp"
#include "hullinv/offsets_io.hpp"
#include "hullinv/pgm.hpp"
#include "hullinv/rng.hpp"

namespace hullinv::data {

namespace fs = std::filesystem;

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw DatasetError("unknown split '" + text + "'");
}

std::vector<const Sample*> Dataset::split(Split s) const {
  std::vector<const Sample*> out;
  for (const auto& sample : samples) {
    if (sample.split == s) out.push_back(&sample);
  }
  return out;
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, int id) {
  return derive_seed(dataset_seed, "sample", static_cast<std::uint64_t>(id));
}

std::vector<Split> assign_splits(int count, const SplitFractions& f, std::uint64_t seed) {
  if (count < 1) throw DatasetError("dataset needs at least one sample");
  if (f.train < 0 || f.val < 0 || f.test < 0) throw DatasetError("split fractions must be >= 0");
  const double total = f.train + f.val + f.test;
  if (!(total > 0)) throw DatasetError("split fractions sum to zero");

  auto rounded = [&](double frac) {
    if (frac <= 0) return 0;
    return std::max(1, static_cast<int>(std::lround(count * frac / total)));
  };
  const int n_val = rounded(f.val);
  const int n_test = rounded(f.test);
  const int n_train = count - n_val - n_test;
  if (n_train < (f.train > 0 ? 1 : 0) || n_train < 0) {
    throw DatasetError("too few samples (" + std::to_string(count) + ") for the requested splits");
  }

  std::vector<Split> order;
  order.reserve(count);
  order.insert(order.end(), n_train, Split::kTrain);
  order.insert(order.end(), n_val, Split::kVal);
  order.insert(order.end(), n_test, Split::kTest);

  Rng rng(derive_seed(seed, "split"));
  for (int i = count - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  return order;
}

Sample make_sample(const DatasetConfig& config, int id, Split split) {
  Sample s;
  s.id = id;
  s.seed = sample_seed(config.seed, id);
  s.split = split;
  const auto variant =
      synth::generate_variant(s.seed, synth::baseline_params(), synth::documented_ranges(), id);
  const auto field = synth::synth_pressure_field(variant, config.height, config.width);
  s.image = synth::render_case(field, config.image_case);
  s.label = synth::make_labels(variant, config.controls - 1, config.straight_tol);
  s.offsets = variant.sections;
  return s;
}

std::vector<double> Normalization::normalize(std::span<const double> mm) const {
  if (mm.size() != mean.size()) throw DatasetError("label length does not match normalization");
  std::vector<double> out(mm.size());
  for (std::size_t i = 0; i < mm.size(); ++i) {
    out[i] = (mm[i] - mean[i]) / (i % 2 == 0 ? scale_y : scale_z);
  }
  return out;
}

std::vector<double> Normalization::denormalize(std::span<const double> standardized) const {
  if (standardized.size() != mean.size()) {
    throw DatasetError("label length does not match normalization");
  }
  std::vector<double> out(standardized.size());
  for (std::size_t i = 0; i < standardized.size(); ++i) {
    out[i] = standardized[i] * (i % 2 == 0 ? scale_y : scale_z) + mean[i];
  }
  return out;
}

std::vector<double> Normalization::standardize_image(std::span<const double> pixels) const {
  if (pixel_mean.empty()) return std::vector<double>(pixels.begin(), pixels.end());
  if (pixels.size() != pixel_mean.size()) {
    throw DatasetError("image size does not match the normalization's pixel statistics");
  }
  std::vector<double> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = (pixels[i] - pixel_mean[i]) / pixel_scale;
  return out;
}

Normalization fit_normalization(std::span<const Sample* const> train) {
  if (train.empty()) throw DatasetError("cannot fit normalization on an empty training split");
  const std::size_t len = train.front()->label.size();
  Normalization norm;
  norm.mean.assign(len, 0.0);
  for (const Sample* s : train) {
    if (s->label.size() != len) throw DatasetError("inconsistent label lengths");
    for (std::size_t i = 0; i < len; ++i) norm.mean[i] += s->label.values[i];
  }
  for (double& m : norm.mean) m /= static_cast<double>(train.size());

  double ss[2] = {0.0, 0.0};
  std::size_t cnt[2] = {0, 0};
  for (const Sample* s : train) {
    for (std::size_t i = 0; i < len; ++i) {
      const double d = s->label.values[i] - norm.mean[i];
      ss[i % 2] += d * d;
      ++cnt[i % 2];
    }
  }
  auto pooled = [](double sum, std::size_t n) {
    const double sd = n > 0 ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
    return sd > 1e-9 ? sd : 1.0;
  };
  norm.scale_y = pooled(ss[0], cnt[0]);
  norm.scale_z = pooled(ss[1], cnt[1]);

  const std::size_t npix = train.front()->image.pixels.size();
  norm.pixel_mean.assign(npix, 0.0);
  for (const Sample* s : train) {
    if (s->image.pixels.size() != npix) throw DatasetError("inconsistent image sizes");
    for (std::size_t i = 0; i < npix; ++i) norm.pixel_mean[i] += s->image.pixels[i];
  }
  for (double& m : norm.pixel_mean) m /= static_cast<double>(train.size());
  double pss = 0.0;
  for (const Sample* s : train) {
    for (std::size_t i = 0; i < npix; ++i) {
      const double d = s->image.pixels[i] - norm.pixel_mean[i];
      pss += d * d;
    }
  }
  norm.pixel_scale = pooled(pss, npix * train.size());
  return norm;
}

Dataset generate_dataset(const DatasetConfig& config, int workers) {
  if (config.height < 16 || config.width < 16) {
    throw DatasetError("image size must be at least 16x16");
  }
  if (config.controls < hullgeom::kOrder) throw DatasetError("too few control points");
  const auto splits = assign_splits(config.count, config.split, config.seed);

  Dataset ds;
  ds.config = config;
  ds.samples.resize(config.count);

  const int n_workers = std::clamp(workers, 1, config.count);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const int id = next.fetch_add(1);
      if (id >= config.count) return;
      try {
        ds.samples[id] = make_sample(config, id, splits[id]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.count;
        return;
      }
    }
  };
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const auto train = ds.split(Split::kTrain);
  ds.norm = fit_normalization(train);
  return ds;
}

namespace {

std::string stem(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%05d", id);
  return buf;
}

config::KeyValues config_to_kv(const DatasetConfig& c) {
  config::KeyValues kv;
  kv.set("count", std::to_string(c.count));
  kv.set("seed", std::to_string(c.seed));
  kv.set("split_train", config::format_double(c.split.train));
  kv.set("split_val", config::format_double(c.split.val));
  kv.set("split_test", config::format_double(c.split.test));
  kv.set("height", std::to_string(c.height));
  kv.set("width", std::to_string(c.width));
  kv.set("image_case", synth::case_flag(c.image_case));
  kv.set("controls", std::to_string(c.controls));
  kv.set("straight_tol", config::format_double(c.straight_tol));
  return kv;
}

DatasetConfig config_from_kv(const config::KeyValues& kv) {
  DatasetConfig c;
  c.count = static_cast<int>(kv.get_int("count"));
  c.seed = kv.get_u64("seed");
  c.split.train = kv.get_double("split_train");
  c.split.val = kv.get_double("split_val");
  c.split.test = kv.get_double("split_test");
  c.height = static_cast<int>(kv.get_int("height"));
  c.width = static_cast<int>(kv.get_int("width"));
  c.image_case = synth::parse_case(kv.at("image_case"));
  c.controls = static_cast<int>(kv.get_int("controls"));
  c.straight_tol = kv.get_double("straight_tol");
  return c;
}

}  // namespace

void write_normalization(const fs::path& path, const Normalization& norm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << "scale_y " << config::format_double(norm.scale_y) << '\n';
  out << "scale_z " << config::format_double(norm.scale_z) << '\n';
  out << "mean " << norm.mean.size() << '\n';
  for (double m : norm.mean) out << config::format_double(m) << '\n';
  out << "pixel_scale " << config::format_double(norm.pixel_scale) << '\n';
  out << "pixel_mean " << norm.pixel_mean.size() << '\n';
  for (double m : norm.pixel_mean) out << config::format_double(m) << '\n';
}

Normalization read_normalization(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  Normalization norm;
  std::string key;
  std::size_t len = 0;
  if (!(in >> key >> norm.scale_y) || key != "scale_y" || !(in >> key >> norm.scale_z) ||
      key != "scale_z" || !(in >> key >> len) || key != "mean") {
    throw DatasetError(path.string() + ": malformed normalization header");
  }
  norm.mean.resize(len);
  for (double& m : norm.mean) {
    if (!(in >> m)) throw DatasetError(path.string() + ": truncated mean vector");
  }
  if (in >> key) {
    if (key != "pixel_scale" || !(in >> norm.pixel_scale) || !(in >> key >> len) ||
        key != "pixel_mean") {
      throw DatasetError(path.string() + ": malformed pixel statistics");
    }
    norm.pixel_mean.resize(len);
    for (double& m : norm.pixel_mean) {
      if (!(in >> m)) throw DatasetError(path.string() + ": truncated pixel mean vector");
    }
  }
  return norm;
}

void write_contour_image(const fs::path& pgm_path, const synth::ContourImage& image) {
  pgm::write(pgm_path, pgm::from_unit(image.height, image.width, image.pixels));
  config::KeyValues meta;
  meta.set("case_tag", synth::case_tag(image.case_tag));
  meta.set("level_count", std::to_string(image.level_count));
  meta.set("with_lines", image.with_lines ? "1" : "0");
  auto meta_path = pgm_path;
  meta_path.replace_extension(".meta");
  config::write_file(meta_path, meta);
}

synth::ContourImage read_contour_image(const fs::path& pgm_path) {
  auto meta_path = pgm_path;
  meta_path.replace_extension(".meta");
  const auto meta = config::read_file(meta_path);
  const auto raw = pgm::read(pgm_path);

  synth::ContourImage img;
  img.height = raw.height;
  img.width = raw.width;
  img.case_tag = synth::parse_case(meta.at("case_tag"));
  img.level_count = static_cast<int>(meta.get_int("level_count"));
  img.with_lines = meta.at("with_lines") == "1";
  if (img.level_count < 2) throw DatasetError(meta_path.string() + ": level_count must be >= 2");

  // Snap each grey value back to its contour bin.
  const double top = img.level_count - 1;
  img.pixels.resize(raw.pixels.size());
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    const double b = std::round(raw.pixels[i] * top / raw.maxval);
    img.pixels[i] = b / top;
  }
  return img;
}

Dataset build_dataset(const DatasetConfig& config, const fs::path& dir, bool overwrite,
                      int workers) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw DatasetError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!overwrite) {
        throw DatasetError(dir.string() + " is not empty (use overwrite to replace it)");
      }
      fs::remove_all(dir);
    }
  }
  Dataset ds = generate_dataset(config, workers);

  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  fs::create_directories(dir / "offsets");
  config::write_file(dir / "dataset.cfg", config_to_kv(config));
  write_normalization(dir / "normalization.txt", ds.norm);

  std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
  if (!manifest) throw DatasetError("cannot write manifest in " + dir.string());
  manifest << "# id seed split image label\n";
  for (const auto& s : ds.samples) {
    const std::string name = stem(s.id);
    const std::string image_rel = "images/" + name + ".pgm";
    const std::string label_rel = "labels/" + name + ".ctl";
    write_contour_image(dir / image_rel, s.image);
    io::write_controls_file(dir / label_rel, polygons_from_labels(s.label));
    io::write_offsets_file(dir / "offsets" / (name + ".off"), s.offsets);
    manifest << s.id << ' ' << s.seed << ' ' << split_name(s.split) << ' ' << image_rel << ' '
             << label_rel << '\n';
  }
  return ds;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("no dataset directory at " + dir.string());
  Dataset ds;
  ds.config = config_from_kv(config::read_file(dir / "dataset.cfg"));
  ds.norm = read_normalization(dir / "normalization.txt");

  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw DatasetError("missing manifest in " + dir.string());
  std::string line;
  int lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Sample s;
    std::string split, image_rel, label_rel;
    if (!(ls >> s.id >> s.seed >> split >> image_rel >> label_rel)) {
      throw DatasetError((dir / "manifest.txt").string() + ":" + std::to_string(lineno) +
                         ": malformed entry");
    }
    s.split = parse_split(split);
    s.image = read_contour_image(dir / image_rel);
    s.label = labels_from_polygons(io::read_controls_file(dir / label_rel));
    const fs::path off = dir / "offsets" / (fs::path(label_rel).stem().string() + ".off");
    if (fs::exists(off)) s.offsets = io::read_offsets_file(off);
    if (s.label.size() != ds.norm.mean.size()) {
      throw DatasetError(label_rel + ": label length does not match normalization");
    }
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw DatasetError("dataset " + dir.string() + " has no samples");
  return ds;
}

}  // namespace hullinv::data
