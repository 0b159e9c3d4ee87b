// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Geometry>

#include "semsplat/error.hpp"
#include "semsplat/io.hpp"

namespace semsplat {

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

namespace {

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

Scalar parse_scalar(const std::string& t, const std::filesystem::path& path) {
  if (t == "char" || t == "int8") return Scalar::i8;
  if (t == "uchar" || t == "uint8") return Scalar::u8;
  if (t == "short" || t == "int16") return Scalar::i16;
  if (t == "ushort" || t == "uint16") return Scalar::u16;
  if (t == "int" || t == "int32") return Scalar::i32;
  if (t == "uint" || t == "uint32") return Scalar::u32;
  if (t == "float" || t == "float32") return Scalar::f32;
  if (t == "double" || t == "float64") return Scalar::f64;
  throw DataError(path.string() + ": unknown PLY scalar type '" + t + "'");
}

template <typename T>
double read_as(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return double(v);
}

double read_scalar(std::istream& in, Scalar s, bool binary) {
  if (!binary) {
    double v;
    in >> v;
    return v;
  }
  switch (s) {
    case Scalar::i8: return read_as<std::int8_t>(in);
    case Scalar::u8: return read_as<std::uint8_t>(in);
    case Scalar::i16: return read_as<std::int16_t>(in);
    case Scalar::u16: return read_as<std::uint16_t>(in);
    case Scalar::i32: return read_as<std::int32_t>(in);
    case Scalar::u32: return read_as<std::uint32_t>(in);
    case Scalar::f32: return read_as<float>(in);
    case Scalar::f64: return read_as<double>(in);
  }
  return 0.0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::f32;
  bool is_list = false;
  Scalar count_type = Scalar::u8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

struct PlyData {
  std::vector<Element> elements;
  // Row-major values per element; list properties are flattened into `lists`.
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::vector<std::uint32_t>>> lists;
};

PlyData parse(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw DataError(path.string() + ": not a PLY file");
  bool binary = false;
  PlyData d;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") throw DataError(path.string() + ": unsupported PLY format " + fmt);
    } else if (key == "element") {
      Element e;
      ls >> e.name >> e.count;
      d.elements.push_back(e);
    } else if (key == "property") {
      if (d.elements.empty()) throw DataError(path.string() + ": property before element");
      Property p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar(ct, path);
        p.type = parse_scalar(it, path);
      } else {
        p.type = parse_scalar(t, path);
        ls >> p.name;
      }
      d.elements.back().props.push_back(p);
    } else if (key == "end_header") {
      break;
    }
  }
  for (const auto& e : d.elements) {
    std::vector<double> vals;
    std::vector<std::vector<std::uint32_t>> lists;
    std::size_t scalars = 0;
    for (const auto& p : e.props) scalars += !p.is_list;
    vals.reserve(e.count * scalars);
    for (std::size_t i = 0; i < e.count; ++i) {
      for (const auto& p : e.props) {
        if (p.is_list) {
          const auto n = std::size_t(read_scalar(in, p.count_type, binary));
          std::vector<std::uint32_t> l(n);
          for (auto& v : l) v = std::uint32_t(read_scalar(in, p.type, binary));
          lists.push_back(std::move(l));
        } else {
          vals.push_back(read_scalar(in, p.type, binary));
        }
      }
      if (!in) throw DataError(path.string() + ": truncated PLY body in element " + e.name);
    }
    d.values.push_back(std::move(vals));
    d.lists.push_back(std::move(lists));
  }
  return d;
}

int scalar_index(const Element& e, const std::string& name) {
  int idx = 0;
  for (const auto& p : e.props) {
    if (p.is_list) continue;
    if (p.name == name) return idx;
    ++idx;
  }
  return -1;
}

std::size_t scalar_count(const Element& e) {
  std::size_t n = 0;
  for (const auto& p : e.props) n += !p.is_list;
  return n;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::ofstream open_ply(const std::filesystem::path& path, PlyFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "ply\nformat " << (format == PlyFormat::ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
  return out;
}

}  // namespace

void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh, PlyFormat format) {
  auto out = open_ply(path, format);
  out << "element vertex " << mesh.vertices.size() << "\nproperty double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.triangles.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
  if (format == PlyFormat::ascii) {
    out.precision(17);
    for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  } else {
    for (const auto& v : mesh.vertices) {
      put(out, v.x());
      put(out, v.y());
      put(out, v.z());
    }
    for (const auto& t : mesh.triangles) {
      put(out, std::uint8_t(3));
      for (auto i : t) put(out, std::int32_t(i));
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format) {
  const bool colors = !cloud.colors.empty(), classes = !cloud.classes.empty();
  auto out = open_ply(path, format);
  out << "element vertex " << cloud.size() << "\nproperty double x\nproperty double y\nproperty double z\n";
  if (colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (classes) out << "property int class\n";
  out << "end_header\n";
  out.precision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    std::uint8_t rgb[3] = {};
    if (colors) {
      for (int k = 0; k < 3; ++k) rgb[k] = std::uint8_t(std::lround(std::clamp(cloud.colors[i][k], 0.0, 1.0) * 255.0));
    }
    if (format == PlyFormat::ascii) {
      out << p.x() << ' ' << p.y() << ' ' << p.z();
      if (colors) out << ' ' << int(rgb[0]) << ' ' << int(rgb[1]) << ' ' << int(rgb[2]);
      if (classes) out << ' ' << cloud.classes[i];
      out << '\n';
    } else {
      put(out, p.x());
      put(out, p.y());
      put(out, p.z());
      if (colors) out.write(reinterpret_cast<const char*>(rgb), 3);
      if (classes) put(out, std::int32_t(cloud.classes[i]));
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

TriangleMesh read_ply_mesh(const std::filesystem::path& path) {
  const PlyData d = parse(path);
  TriangleMesh mesh;
  for (std::size_t e = 0; e < d.elements.size(); ++e) {
    const Element& el = d.elements[e];
    if (el.name == "vertex") {
      const int ix = scalar_index(el, "x"), iy = scalar_index(el, "y"), iz = scalar_index(el, "z");
      if (ix < 0 || iy < 0 || iz < 0) throw DataError(path.string() + ": vertex element lacks x/y/z");
      const std::size_t stride = scalar_count(el);
      for (std::size_t i = 0; i < el.count; ++i) {
        const double* row = d.values[e].data() + i * stride;
        mesh.vertices.emplace_back(row[ix], row[iy], row[iz]);
      }
    } else if (el.name == "face") {
      for (const auto& l : d.lists[e]) {
        for (std::size_t k = 1; k + 1 < l.size(); ++k) mesh.triangles.push_back({l[0], l[k], l[k + 1]});
      }
    }
  }
  for (const auto& t : mesh.triangles) {
    for (auto i : t) {
      if (i >= mesh.vertices.size()) throw DataError(path.string() + ": face index out of range");
    }
  }
  return mesh;
}

PointCloud read_ply_points(const std::filesystem::path& path) {
  const PlyData d = parse(path);
  PointCloud cloud;
  for (std::size_t e = 0; e < d.elements.size(); ++e) {
    const Element& el = d.elements[e];
    if (el.name != "vertex") continue;
    const int ix = scalar_index(el, "x"), iy = scalar_index(el, "y"), iz = scalar_index(el, "z");
    if (ix < 0 || iy < 0 || iz < 0) throw DataError(path.string() + ": vertex element lacks x/y/z");
    const int ir = scalar_index(el, "red"), ig = scalar_index(el, "green"), ib = scalar_index(el, "blue");
    const int ic = scalar_index(el, "class");
    const std::size_t stride = scalar_count(el);
    for (std::size_t i = 0; i < el.count; ++i) {
      const double* row = d.values[e].data() + i * stride;
      cloud.points.emplace_back(row[ix], row[iy], row[iz]);
      if (ir >= 0 && ig >= 0 && ib >= 0) cloud.colors.emplace_back(row[ir] / 255.0, row[ig] / 255.0, row[ib] / 255.0);
      if (ic >= 0) cloud.classes.push_back(int(row[ic]));
    }
  }
  return cloud;
}

}  // namespace semsplat
