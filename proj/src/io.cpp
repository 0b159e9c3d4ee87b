// SPDX-License-Identifier: Apache-2.0
#include "semsplat/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semsplat/error.hpp"

namespace semsplat {
namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError(path.string() + ": truncated file");
  return v;
}

void expect_magic(std::istream& in, const char (&magic)[5], const std::filesystem::path& path) {
  char buf[4];
  if (!in.read(buf, 4) || std::memcmp(buf, magic, 4) != 0) {
    throw DataError(path.string() + ": bad magic, expected " + std::string(magic, 4));
  }
}

std::uint8_t quantize(double v) { return std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return e;
}

}  // namespace

Image read_pfm(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string tag;
  int w = 0, h = 0;
  double scale = 0;
  in >> tag >> w >> h >> scale;
  if (!in || (tag != "Pf" && tag != "PF") || w <= 0 || h <= 0) throw DataError(path.string() + ": malformed PFM header");
  if (scale >= 0) throw DataError(path.string() + ": big-endian PFM not supported");
  in.get();  // single whitespace before the raster
  const int c = tag == "PF" ? 3 : 1;
  Image img(w, h, c);
  std::vector<float> row(std::size_t(w) * c);
  for (int y = h - 1; y >= 0; --y) {
    if (!in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * sizeof(float)))) {
      throw DataError(path.string() + ": truncated PFM raster");
    }
    for (std::size_t i = 0; i < row.size(); ++i) img.data[std::size_t(y) * w * c + i] = row[i];
  }
  return img;
}

void write_pfm(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw ContractViolation("write_pfm: need 1 or 3 channels");
  auto out = open_out(path);
  out << (img.channels == 3 ? "PF" : "Pf") << '\n' << img.width << ' ' << img.height << "\n-1\n";
  std::vector<float> row(std::size_t(img.width) * img.channels);
  for (int y = img.height - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = float(img.data[std::size_t(y) * img.width * img.channels + i]);
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw DataError(path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    throw DataError(path.string() + ": " + png.message);
  }
  Image img(int(png.width), int(png.height), 3);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0;
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw ContractViolation("write_png: need 1 or 3 channels");
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = png_uint_32(img.width);
  png.height = png_uint_32(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(img.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = quantize(img.data[i]);
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw DataError(path.string() + ": " + png.message);
  }
}

Image read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string tag;
  int w = 0, h = 0, maxval = 0;
  in >> tag >> w >> h >> maxval;
  if (!in || tag != "P6" || w <= 0 || h <= 0 || maxval != 255) throw DataError(path.string() + ": unsupported PPM");
  in.get();
  std::vector<std::uint8_t> buf(std::size_t(w) * h * 3);
  if (!in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()))) {
    throw DataError(path.string() + ": truncated PPM raster");
  }
  Image img(w, h, 3);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0;
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 3) throw ContractViolation("write_ppm: need 3 channels");
  auto out = open_out(path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<std::uint8_t> buf(img.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = quantize(img.data[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

Image read_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm") return read_ppm(path);
  if (ext == ".pfm") return read_pfm(path);
  throw DataError(path.string() + ": unknown image extension");
}

Image read_semf(const std::filesystem::path& path) {
  auto in = open_in(path);
  expect_magic(in, "SEMF", path);
  const auto h = get<std::uint32_t>(in, path);
  const auto w = get<std::uint32_t>(in, path);
  const auto c = get<std::uint32_t>(in, path);
  if (h == 0 || w == 0 || c == 0 || std::uint64_t(h) * w * c > (1ULL << 32)) {
    throw DataError(path.string() + ": implausible SEMF dimensions");
  }
  Image img{int(w), int(h), int(c)};
  std::vector<float> raw(img.data.size());
  if (!in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size() * sizeof(float)))) {
    throw DataError(path.string() + ": truncated SEMF payload");
  }
  std::copy(raw.begin(), raw.end(), img.data.begin());
  return img;
}

void write_semf(const std::filesystem::path& path, const Image& img) {
  auto out = open_out(path);
  out.write("SEMF", 4);
  put(out, std::uint32_t(img.height));
  put(out, std::uint32_t(img.width));
  put(out, std::uint32_t(img.channels));
  std::vector<float> raw(img.data.begin(), img.data.end());
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size() * sizeof(float)));
  if (!out) throw DataError("failed writing " + path.string());
}

Camera read_camera(const std::filesystem::path& path, double tol) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Camera cam;
  in >> cam.fx >> cam.fy >> cam.cx >> cam.cy;
  for (int r = 0; r < 3; ++r) {
    in >> cam.rotation(r, 0) >> cam.rotation(r, 1) >> cam.rotation(r, 2) >> cam.translation[r];
  }
  in >> cam.width >> cam.height;
  if (!in) throw DataError(path.string() + ": malformed camera file");
  try {
    cam.validate(tol);
  } catch (const InvalidParameter& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return cam;
}

void write_camera(const std::filesystem::path& path, const Camera& cam) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw DataError("cannot write " + path.string());
  std::fprintf(f, "%.17g %.17g %.17g %.17g\n", cam.fx, cam.fy, cam.cx, cam.cy);
  for (int r = 0; r < 3; ++r) {
    std::fprintf(f, "%.17g %.17g %.17g %.17g\n", cam.rotation(r, 0), cam.rotation(r, 1), cam.rotation(r, 2),
                 cam.translation[r]);
  }
  std::fprintf(f, "%d %d\n", cam.width, cam.height);
  std::fclose(f);
}

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kOptimizerVersion = 1;
}  // namespace

void write_checkpoint(const std::filesystem::path& path, const GaussianScene& scene) {
  auto out = open_out(path);
  out.write("AGSC", 4);
  put(out, kCheckpointVersion);
  put(out, std::uint32_t(scene.size()));
  put(out, std::uint32_t(scene.class_count));
  for (const auto& p : scene.primitives) {
    for (ParamGroup g : kParamGroups) {
      for (double v : field(p, g)) put(out, float(v));
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

GaussianScene read_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  expect_magic(in, "AGSC", path);
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in, path);
  const auto classes = get<std::uint32_t>(in, path);
  if (classes == 0 || classes > 100000) throw DataError(path.string() + ": implausible class count");
  GaussianScene scene{int(classes)};
  scene.primitives.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    GaussianPrimitive p = GaussianPrimitive::zeros(int(classes));
    for (ParamGroup g : kParamGroups) {
      for (double& v : field(p, g)) v = get<float>(in, path);
    }
    scene.primitives.push_back(std::move(p));
  }
  return scene;
}

void write_optimizer_state(const std::filesystem::path& path, const OptimizerState& state, int class_count) {
  auto out = open_out(path);
  out.write("AGOS", 4);
  put(out, kOptimizerVersion);
  put(out, std::uint32_t(state.first.size()));
  put(out, std::uint32_t(class_count));
  put(out, std::int64_t(state.step));
  for (double lr : state.lr) put(out, lr);
  for (const auto* moments : {&state.first, &state.second}) {
    for (const auto& p : *moments) {
      for (ParamGroup g : kParamGroups) {
        for (double v : field(p, g)) put(out, v);
      }
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

OptimizerState read_optimizer_state(const std::filesystem::path& path) {
  auto in = open_in(path);
  expect_magic(in, "AGOS", path);
  if (get<std::uint32_t>(in, path) != kOptimizerVersion) throw DataError(path.string() + ": unsupported version");
  const auto count = get<std::uint32_t>(in, path);
  const auto classes = int(get<std::uint32_t>(in, path));
  OptimizerState s;
  s.step = get<std::int64_t>(in, path);
  for (double& lr : s.lr) lr = get<double>(in, path);
  s.reset(count, classes);
  for (auto* moments : {&s.first, &s.second}) {
    for (auto& p : *moments) {
      for (ParamGroup g : kParamGroups) {
        for (double& v : field(p, g)) v = get<double>(in, path);
      }
    }
  }
  return s;
}

}  // namespace semsplat
