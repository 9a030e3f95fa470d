// SPDX-License-Identifier: Apache-2.0
#include "rotunroll/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "rotunroll/rotation.hpp"

namespace rotunroll {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr char kContainerMagic[8] = {'R', 'U', 'D', 'A', 'T', 'S', 'T', '1'};
constexpr std::uint32_t kContainerVersion = 1;

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  in.seekg(0, std::ios::end);
  const std::streamoff len = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(len));
  if (len > 0) in.read(buf.data(), len);
  if (!in) throw IoError("cannot read file: " + path);
  return buf;
}

std::uint32_t read_be32(const std::vector<char>& buf, std::size_t off,
                        const std::string& what) {
  if (off + 4 > buf.size())
    throw ParseError("truncated " + what, static_cast<long long>(off));
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + off);
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_le32(const std::vector<char>& buf, std::size_t& off,
                        const std::string& what) {
  if (off + 4 > buf.size())
    throw ParseError("truncated " + what, static_cast<long long>(off));
  std::uint32_t v = 0;
  std::memcpy(&v, buf.data() + off, 4);
  off += 4;
  return v;
}
std::uint64_t read_le64(const std::vector<char>& buf, std::size_t& off,
                        const std::string& what) {
  if (off + 8 > buf.size())
    throw ParseError("truncated " + what, static_cast<long long>(off));
  std::uint64_t v = 0;
  std::memcpy(&v, buf.data() + off, 8);
  off += 8;
  return v;
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  const std::vector<char> img = read_file(images_path);
  const std::vector<char> lab = read_file(labels_path);

  const std::uint32_t img_magic = read_be32(img, 0, "IDX image header");
  if (img_magic != kIdxImagesMagic)
    throw ParseError("IDX image magic mismatch: expected 0x803, got 0x" +
                         [&] { char b[16]; snprintf(b, sizeof b, "%x", img_magic); return std::string(b); }(),
                     0);
  const std::uint32_t lab_magic = read_be32(lab, 0, "IDX label header");
  if (lab_magic != kIdxLabelsMagic)
    throw ParseError("IDX label magic mismatch: expected 0x801, got 0x" +
                         [&] { char b[16]; snprintf(b, sizeof b, "%x", lab_magic); return std::string(b); }(),
                     0);

  const std::uint32_t n = read_be32(img, 4, "IDX image count");
  const std::uint32_t h = read_be32(img, 8, "IDX image rows");
  const std::uint32_t w = read_be32(img, 12, "IDX image cols");
  const std::uint32_t n_lab = read_be32(lab, 4, "IDX label count");
  if (n != n_lab)
    throw ParseError("IDX image/label count mismatch: " + std::to_string(n) + " vs " +
                     std::to_string(n_lab));
  const std::size_t payload = static_cast<std::size_t>(n) * h * w;
  if (img.size() != 16 + payload)
    throw ParseError("truncated IDX image payload: expected " +
                         std::to_string(16 + payload) + " bytes, file has " +
                         std::to_string(img.size()),
                     static_cast<long long>(img.size()));
  if (lab.size() != 8 + n)
    throw ParseError("truncated IDX label payload", static_cast<long long>(lab.size()));

  Dataset ds;
  ds.provenance = images_path + ";" + labels_path;
  ds.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::uint8_t>(lab[8 + i]);
    if (v > 9)
      throw ParseError("IDX label " + std::to_string(int(v)) + " out of range",
                       static_cast<long long>(8 + i));
    ds.labels[i] = v;
  }
  if (n > 0) {
    ds.images = Tensor({n, 1, h, w});
    const auto* px = reinterpret_cast<const unsigned char*>(img.data() + 16);
    for (std::size_t i = 0; i < payload; ++i)
      ds.images[i] = static_cast<double>(px[i]) / 255.0;
  }
  return ds;
}

Dataset load_cifar10(const std::vector<std::string>& batch_paths) {
  constexpr std::size_t kRecord = 3073;
  Dataset ds;
  std::vector<double> pixels;
  for (const auto& path : batch_paths) {
    const std::vector<char> buf = read_file(path);
    if (buf.empty()) continue;  // vacuous batch, not an error
    if (buf.size() % kRecord != 0)
      throw ParseError("CIFAR batch size " + std::to_string(buf.size()) +
                           " is not a multiple of 3073: " + path,
                       static_cast<long long>(buf.size()));
    const std::size_t n = buf.size() / kRecord;
    for (std::size_t r = 0; r < n; ++r) {
      const auto* rec = reinterpret_cast<const unsigned char*>(buf.data() + r * kRecord);
      if (rec[0] > 9)
        throw ParseError("CIFAR label " + std::to_string(int(rec[0])) + " out of range",
                         static_cast<long long>(r * kRecord));
      ds.labels.push_back(rec[0]);
      for (std::size_t i = 0; i < 3072; ++i)
        pixels.push_back(static_cast<double>(rec[1 + i]) / 255.0);
    }
    ds.provenance += (ds.provenance.empty() ? "" : ";") + path;
  }
  if (!ds.labels.empty())
    ds.images = Tensor({ds.labels.size(), 3, 32, 32}, std::move(pixels));
  return ds;
}

Dataset generate_rot_mnist(const Dataset& base, std::uint64_t seed) {
  if (base.size() == 0) return base;
  const std::size_t h = base.height(), w = base.width(), c = base.channels();
  Dataset out;
  out.labels = base.labels;
  out.split = base.split;
  out.seed = seed;
  out.provenance = base.provenance + ";rot seed=" + std::to_string(seed);
  out.images = Tensor(base.images.shape());
  std::mt19937_64 rng(seed);
  const std::size_t chw = c * h * w;
  for (std::size_t i = 0; i < base.size(); ++i) {
    // exactly 53 mantissa bits so the draw is bit-stable
    const double angle = 360.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const RotationOperator op = RotationOperator::make_bilinear(angle, h, w);
    const Tensor img({c, h, w}, {base.images.data() + i * chw,
                                 base.images.data() + (i + 1) * chw});
    const Tensor rot = op.apply(img);
    std::memcpy(out.images.data() + i * chw, rot.data(), chw * sizeof(double));
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::string out;
  out.append(kContainerMagic, sizeof kContainerMagic);
  append_u32(out, kContainerVersion);
  append_u64(out, ds.seed);
  append_u32(out, static_cast<std::uint32_t>(ds.size()));
  append_u32(out, static_cast<std::uint32_t>(ds.channels()));
  append_u32(out, static_cast<std::uint32_t>(ds.height()));
  append_u32(out, static_cast<std::uint32_t>(ds.width()));
  append_u32(out, static_cast<std::uint32_t>(ds.split.size()));
  out += ds.split;
  append_u32(out, static_cast<std::uint32_t>(ds.provenance.size()));
  out += ds.provenance;
  out.append(reinterpret_cast<const char*>(ds.labels.data()), ds.labels.size());
  out.append(reinterpret_cast<const char*>(ds.images.data()),
             ds.images.size() * sizeof(double));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

Dataset load_dataset_container(const std::string& path) {
  const std::vector<char> buf = read_file(path);
  if (buf.size() < sizeof(kContainerMagic) ||
      std::memcmp(buf.data(), kContainerMagic, sizeof kContainerMagic) != 0)
    throw ParseError("dataset container magic mismatch: " + path, 0);
  std::size_t off = sizeof kContainerMagic;
  const std::uint32_t version = read_le32(buf, off, "container version");
  if (version != kContainerVersion)
    throw ParseError("unsupported dataset container version " + std::to_string(version),
                     static_cast<long long>(off - 4));
  Dataset ds;
  ds.seed = read_le64(buf, off, "container seed");
  const std::uint32_t n = read_le32(buf, off, "container count");
  const std::uint32_t c = read_le32(buf, off, "container channels");
  const std::uint32_t h = read_le32(buf, off, "container height");
  const std::uint32_t w = read_le32(buf, off, "container width");
  const std::uint32_t split_len = read_le32(buf, off, "container split tag");
  if (off + split_len > buf.size())
    throw ParseError("truncated split tag", static_cast<long long>(off));
  ds.split.assign(buf.data() + off, split_len);
  off += split_len;
  const std::uint32_t prov_len = read_le32(buf, off, "container provenance");
  if (off + prov_len > buf.size())
    throw ParseError("truncated provenance", static_cast<long long>(off));
  ds.provenance.assign(buf.data() + off, prov_len);
  off += prov_len;
  if (off + n > buf.size())
    throw ParseError("truncated labels", static_cast<long long>(off));
  ds.labels.assign(reinterpret_cast<const std::uint8_t*>(buf.data() + off),
                   reinterpret_cast<const std::uint8_t*>(buf.data() + off + n));
  off += n;
  if (n > 0) {
    const std::size_t payload = static_cast<std::size_t>(n) * c * h * w;
    if (off + payload * sizeof(double) != buf.size())
      throw ParseError("truncated image payload", static_cast<long long>(buf.size()));
    std::vector<double> pixels(payload);
    std::memcpy(pixels.data(), buf.data() + off, payload * sizeof(double));
    ds.images = Tensor({n, c, h, w}, std::move(pixels));
  }
  return ds;
}

Dataset take(const Dataset& ds, std::size_t n) {
  n = std::min(n, ds.size());
  Dataset out;
  out.split = ds.split;
  out.provenance = ds.provenance;
  out.seed = ds.seed;
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<long>(n));
  if (n > 0) {
    const std::size_t chw = ds.channels() * ds.height() * ds.width();
    out.images = Tensor({n, ds.channels(), ds.height(), ds.width()},
                        {ds.images.data(), ds.images.data() + n * chw});
  }
  return out;
}

void write_mnist_idx(const Dataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
  auto be32 = [](std::string& s, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  std::string img, lab;
  be32(img, kIdxImagesMagic);
  be32(img, static_cast<std::uint32_t>(ds.size()));
  be32(img, static_cast<std::uint32_t>(ds.height()));
  be32(img, static_cast<std::uint32_t>(ds.width()));
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const double v = std::clamp(ds.images[i], 0.0, 1.0);
    img.push_back(static_cast<char>(static_cast<int>(std::lround(v * 255.0))));
  }
  be32(lab, kIdxLabelsMagic);
  be32(lab, static_cast<std::uint32_t>(ds.size()));
  for (auto y : ds.labels) lab.push_back(static_cast<char>(y));

  std::ofstream fi(images_path, std::ios::binary | std::ios::trunc);
  if (!fi) throw IoError("cannot open for writing: " + images_path);
  fi.write(img.data(), static_cast<std::streamsize>(img.size()));
  std::ofstream fl(labels_path, std::ios::binary | std::ios::trunc);
  if (!fl) throw IoError("cannot open for writing: " + labels_path);
  fl.write(lab.data(), static_cast<std::streamsize>(lab.size()));
}

}  // namespace rotunroll
