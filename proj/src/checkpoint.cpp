// Checkpoint file: a text header followed by raw little-endian float64 data.
//
//   hullinv-checkpoint 1
//   arch variant=... input=HxW width=... sections=... controls=...
//   epoch 12
//   best_val 0.0123...
//   best_epoch 11
//   since_best 0
//   adam t=48 beta1=0.9 beta2=0.999 eps=1e-08
//   tensors 3K
//   param:shared.conv1_1.weight 8,1,3,3 0 72
//   adam_m:shared.conv1_1.weight 8,1,3,3 72 72
//   ...
//   data
//   <bytes>
//
// Offsets and counts are in doubles from the start of the data block.

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hullinv/trainer.hpp"

namespace hullinv::train {

namespace {

constexpr const char* kMagic = "hullinv-checkpoint";
constexpr int kVersion = 1;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string shape_text(const tensor::Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s[i]);
  }
  return out;
}

tensor::Shape parse_shape(const std::string& text) {
  tensor::Shape s;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) s.push_back(std::stoull(part));
  return s;
}

void put_doubles(std::string& out, std::span<const double> v) {
  const std::size_t start = out.size();
  out.resize(start + v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v[i]);
    for (int b = 0; b < 8; ++b) out[start + i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
}

double get_double(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

[[noreturn]] void corrupt(const std::filesystem::path& path, const std::string& what) {
  throw TrainError(path.string() + ": corrupt checkpoint: " + what);
}

struct IndexEntry {
  std::string key;
  tensor::Shape shape;
  std::size_t offset = 0;
  std::size_t count = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto& entries = ckpt.params.entries;
  if (ckpt.adam.m.size() != entries.size() || ckpt.adam.v.size() != entries.size()) {
    throw TrainError("checkpoint optimizer state does not match its parameters");
  }
  std::ostringstream head;
  head << kMagic << ' ' << kVersion << '\n';
  head << "arch " << ckpt.params.spec.to_text() << '\n';
  head << "epoch " << ckpt.epoch << '\n';
  head << "best_val " << fmt(ckpt.best_val) << '\n';
  head << "best_epoch " << ckpt.best_epoch << '\n';
  head << "since_best " << ckpt.since_best << '\n';
  head << "adam t=" << ckpt.adam.t << " beta1=" << fmt(ckpt.adam.beta1)
       << " beta2=" << fmt(ckpt.adam.beta2) << " eps=" << fmt(ckpt.adam.eps) << '\n';
  head << "tensors " << 3 * entries.size() << '\n';

  std::string data;
  std::size_t offset = 0;
  auto emit = [&](const std::string& key, const tensor::Shape& shape, std::span<const double> v) {
    head << key << ' ' << shape_text(shape) << ' ' << offset << ' ' << v.size() << '\n';
    put_doubles(data, v);
    offset += v.size();
  };
  for (std::size_t i = 0; i < entries.size(); ++i) {
    emit("param:" + entries[i].name, entries[i].tensor.shape(), entries[i].tensor.values());
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    emit("adam_m:" + entries[i].name, entries[i].tensor.shape(), ckpt.adam.m[i]);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    emit("adam_v:" + entries[i].name, entries[i].tensor.shape(), ckpt.adam.v[i]);
  }
  head << "data\n";

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw TrainError("cannot write " + tmp.string());
    const std::string h = head.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw TrainError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const model::ArchitectureSpec* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TrainError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) corrupt(path, "truncated header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  {
    std::istringstream ls(next_line());
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != kMagic) corrupt(path, "not a checkpoint file");
    if (version != kVersion) {
      throw TrainError(path.string() + ": checkpoint version " + std::to_string(version) +
                       " is not supported (expected " + std::to_string(kVersion) + ")");
    }
  }

  Checkpoint ckpt;
  auto field = [&](const std::string& name) {
    const std::string line = next_line();
    if (line.rfind(name + ' ', 0) != 0) corrupt(path, "expected '" + name + "'");
    return line.substr(name.size() + 1);
  };
  try {
    ckpt.params.spec = model::ArchitectureSpec::from_text(field("arch"));
  } catch (const model::ArchitectureError& e) {
    corrupt(path, e.what());
  }
  if (expected && !(*expected == ckpt.params.spec)) {
    throw TrainError(path.string() + ": architecture mismatch: checkpoint has '" +
                     ckpt.params.spec.to_text() + "', expected '" + expected->to_text() + "'");
  }
  try {
    ckpt.epoch = std::stoi(field("epoch"));
    ckpt.best_val = std::strtod(field("best_val").c_str(), nullptr);
    ckpt.best_epoch = std::stoi(field("best_epoch"));
    ckpt.since_best = std::stoi(field("since_best"));
    std::istringstream as(field("adam"));
    std::string tok;
    while (as >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) corrupt(path, "bad adam field");
      const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
      if (k == "t") ckpt.adam.t = std::stoll(v);
      else if (k == "beta1") ckpt.adam.beta1 = std::strtod(v.c_str(), nullptr);
      else if (k == "beta2") ckpt.adam.beta2 = std::strtod(v.c_str(), nullptr);
      else if (k == "eps") ckpt.adam.eps = std::strtod(v.c_str(), nullptr);
      else corrupt(path, "unknown adam field '" + k + "'");
    }
  } catch (const std::logic_error&) {
    corrupt(path, "malformed header field");
  }

  std::vector<IndexEntry> index;
  const std::size_t count = std::stoull(field("tensors"));
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ls(next_line());
    IndexEntry e;
    std::string shape;
    if (!(ls >> e.key >> shape >> e.offset >> e.count)) corrupt(path, "bad tensor index line");
    e.shape = parse_shape(shape);
    if (tensor::element_count(e.shape) != e.count) corrupt(path, "shape/count mismatch for " + e.key);
    index.push_back(std::move(e));
  }
  if (next_line() != "data") corrupt(path, "missing data marker");
  const std::size_t data_bytes = bytes.size() - pos;

  // Parameters must follow the architecture's plan exactly.
  const auto plan = model::layer_plan(ckpt.params.spec);
  if (index.size() != 3 * plan.size()) corrupt(path, "tensor count does not match architecture");
  auto read = [&](const IndexEntry& e) {
    if ((e.offset + e.count) * 8 > data_bytes) corrupt(path, "data block truncated");
    std::vector<double> v(e.count);
    for (std::size_t i = 0; i < e.count; ++i) v[i] = get_double(bytes.data() + pos + (e.offset + i) * 8);
    return v;
  };
  const char* prefixes[3] = {"param:", "adam_m:", "adam_v:"};
  for (int group = 0; group < 3; ++group) {
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const IndexEntry& e = index[group * plan.size() + i];
      if (e.key != prefixes[group] + plan[i].name || e.shape != plan[i].shape) {
        corrupt(path, "unexpected tensor '" + e.key + "'");
      }
      auto values = read(e);
      if (group == 0) {
        ckpt.params.entries.push_back(
            {plan[i].name, plan[i].owner, tensor::Tensor(plan[i].shape, std::move(values), true)});
      } else if (group == 1) {
        ckpt.adam.m.push_back(std::move(values));
      } else {
        ckpt.adam.v.push_back(std::move(values));
      }
    }
  }
  return ckpt;
}

}  // namespace hullinv::train
