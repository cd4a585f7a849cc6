#include "modslam/mesh.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "modslam/errors.hpp"

namespace modslam {

double TriangleMesh::triangle_area(std::size_t i) const {
  const auto& t = triangles[i];
  return 0.5 * (vertices[t[1]] - vertices[t[0]])
                   .cross(vertices[t[2]] - vertices[t[0]])
                   .norm();
}

Vec3 TriangleMesh::triangle_normal(std::size_t i) const {
  const auto& t = triangles[i];
  return (vertices[t[1]] - vertices[t[0]])
      .cross(vertices[t[2]] - vertices[t[0]])
      .normalized();
}

void TriangleMesh::append(const TriangleMesh& other) {
  const int offset = static_cast<int>(vertices.size());
  const bool keep_colors = (empty() || has_colors()) && other.has_colors();
  if (!keep_colors) colors.clear();
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  if (keep_colors) {
    colors.insert(colors.end(), other.colors.begin(), other.colors.end());
  }
  for (const auto& t : other.triangles) {
    triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
  }
}

// ---------------------------------------------------------------------------
// PLY

void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const bool colored = mesh.has_colors();
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (colored) {
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  out << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";

  std::vector<char> buf;
  buf.reserve(mesh.vertices.size() * 15 + mesh.triangles.size() * 13);
  auto put = [&buf](const auto& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf.insert(buf.end(), p, p + sizeof(v));
  };
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) put(static_cast<float>(mesh.vertices[i][k]));
    if (colored) {
      for (int k = 0; k < 3; ++k) put(mesh.colors[i][k]);
    }
  }
  for (const auto& t : mesh.triangles) {
    put(std::uint8_t{3});
    for (int k = 0; k < 3; ++k) put(static_cast<std::int32_t>(t[k]));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

PlyType parse_type(const std::string& s, int line) {
  if (s == "char" || s == "int8") return PlyType::I8;
  if (s == "uchar" || s == "uint8") return PlyType::U8;
  if (s == "short" || s == "int16") return PlyType::I16;
  if (s == "ushort" || s == "uint16") return PlyType::U16;
  if (s == "int" || s == "int32") return PlyType::I32;
  if (s == "uint" || s == "uint32") return PlyType::U32;
  if (s == "float" || s == "float32") return PlyType::F32;
  if (s == "double" || s == "float64") return PlyType::F64;
  throw IoError("ply header line " + std::to_string(line) +
                ": unknown property type '" + s + "'");
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::I8: case PlyType::U8: return 1;
    case PlyType::I16: case PlyType::U16: return 2;
    case PlyType::I32: case PlyType::U32: case PlyType::F32: return 4;
    case PlyType::F64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type;
  bool is_list = false;
  PlyType count_type = PlyType::U8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

class BinaryCursor {
 public:
  BinaryCursor(const std::vector<char>& data, std::size_t pos)
      : data_(data), pos_(pos) {}

  double read(PlyType t) {
    const std::size_t n = type_size(t);
    if (pos_ + n > data_.size()) {
      throw IoError("ply: unexpected end of data (element count mismatch)");
    }
    const char* p = data_.data() + pos_;
    pos_ += n;
    switch (t) {
      case PlyType::I8: return get<std::int8_t>(p);
      case PlyType::U8: return get<std::uint8_t>(p);
      case PlyType::I16: return get<std::int16_t>(p);
      case PlyType::U16: return get<std::uint16_t>(p);
      case PlyType::I32: return get<std::int32_t>(p);
      case PlyType::U32: return get<std::uint32_t>(p);
      case PlyType::F32: return get<float>(p);
      case PlyType::F64: return get<double>(p);
    }
    return 0;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  template <typename T>
  static double get(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  }
  const std::vector<char>& data_;
  std::size_t pos_;
};

class AsciiCursor {
 public:
  explicit AsciiCursor(std::istringstream& in) : in_(in) {}
  double read(PlyType) {
    double v;
    if (!(in_ >> v)) {
      throw IoError("ply: unexpected end of data (element count mismatch)");
    }
    return v;
  }
  bool at_end() {
    in_ >> std::ws;
    return in_.eof();
  }

 private:
  std::istringstream& in_;
};

template <typename Cursor>
void read_body(Cursor& cur, const std::vector<PlyElement>& elements,
               TriangleMesh& mesh) {
  for (const auto& el : elements) {
    const bool is_vertex = el.name == "vertex";
    const bool is_face = el.name == "face";
    int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
    for (int i = 0; i < static_cast<int>(el.props.size()); ++i) {
      const auto& n = el.props[i].name;
      if (n == "x") ix = i;
      if (n == "y") iy = i;
      if (n == "z") iz = i;
      if (n == "red") ir = i;
      if (n == "green") ig = i;
      if (n == "blue") ib = i;
    }
    const bool colored = is_vertex && ir >= 0 && ig >= 0 && ib >= 0;
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) {
      throw IoError("ply: vertex element lacks x/y/z");
    }
    std::vector<double> scalars(el.props.size());
    std::vector<int> list;
    for (std::size_t r = 0; r < el.count; ++r) {
      for (std::size_t p = 0; p < el.props.size(); ++p) {
        const auto& prop = el.props[p];
        if (prop.is_list) {
          const auto n = static_cast<std::size_t>(cur.read(prop.count_type));
          list.resize(n);
          for (std::size_t k = 0; k < n; ++k) {
            list[k] = static_cast<int>(cur.read(prop.type));
          }
        } else {
          scalars[p] = cur.read(prop.type);
        }
      }
      if (is_vertex) {
        mesh.vertices.emplace_back(scalars[ix], scalars[iy], scalars[iz]);
        if (colored) {
          mesh.colors.push_back({static_cast<std::uint8_t>(scalars[ir]),
                                 static_cast<std::uint8_t>(scalars[ig]),
                                 static_cast<std::uint8_t>(scalars[ib])});
        }
      } else if (is_face) {
        for (std::size_t k = 1; k + 1 < list.size(); ++k) {
          mesh.triangles.push_back({list[0], list[k], list[k + 1]});
        }
      }
    }
  }
}

}  // namespace

TriangleMesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());

  std::vector<PlyElement> elements;
  bool binary = false;
  bool have_format = false;
  std::size_t pos = 0;
  int line_no = 0;
  auto fail = [&](const std::string& what) -> IoError {
    return IoError(path.string() + ": ply header line " +
                   std::to_string(line_no) + ": " + what);
  };
  for (;;) {
    const auto nl = std::find(data.begin() + std::ptrdiff_t(pos), data.end(), '\n');
    if (nl == data.end()) throw fail("missing end_header");
    std::string line(data.begin() + std::ptrdiff_t(pos), nl);
    pos = static_cast<std::size_t>(nl - data.begin()) + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (line_no == 1) {
      if (key != "ply") throw fail("missing 'ply' magic");
      continue;
    }
    if (key.empty() || key == "comment" || key == "obj_info") continue;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw fail("unsupported format '" + fmt + "'");
      have_format = true;
    } else if (key == "element") {
      PlyElement el;
      long long count = -1;
      ls >> el.name >> count;
      if (el.name.empty() || count < 0) throw fail("malformed element line");
      el.count = static_cast<std::size_t>(count);
      elements.push_back(el);
    } else if (key == "property") {
      if (elements.empty()) throw fail("property before any element");
      PlyProperty prop;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> prop.name;
        prop.is_list = true;
        prop.count_type = parse_type(ct, line_no);
        prop.type = parse_type(it, line_no);
      } else {
        prop.type = parse_type(type, line_no);
        ls >> prop.name;
      }
      if (prop.name.empty()) throw fail("property without a name");
      elements.back().props.push_back(prop);
    } else if (key == "end_header") {
      break;
    } else {
      throw fail("unknown keyword '" + key + "'");
    }
  }
  if (!have_format) throw fail("missing format line");

  TriangleMesh mesh;
  try {
    if (binary) {
      BinaryCursor cur(data, pos);
      read_body(cur, elements, mesh);
      if (cur.remaining() != 0) {
        throw IoError("ply: trailing data after last element (element count mismatch)");
      }
    } else {
      std::istringstream body(std::string(data.begin() + std::ptrdiff_t(pos), data.end()));
      AsciiCursor cur(body);
      read_body(cur, elements, mesh);
      if (!cur.at_end()) {
        throw IoError("ply: trailing data after last element (element count mismatch)");
      }
    }
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  const int nv = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int k : t) {
      if (k < 0 || k >= nv) throw IoError(path.string() + ": face index out of range");
    }
  }
  return mesh;
}

// ---------------------------------------------------------------------------

PointCloud sample_points(const TriangleMesh& mesh, std::size_t n,
                         std::uint64_t seed) {
  if (mesh.empty()) throw InvalidArgument("sample_points: empty mesh");
  std::vector<double> cdf(mesh.triangles.size());
  double total = 0;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    total += mesh.triangle_area(i);
    cdf[i] = total;
  }
  if (!(total > 0)) throw InvalidArgument("sample_points: mesh has zero area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double pick = uni(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    if (it == cdf.end()) --it;
    const auto& t = mesh.triangles[static_cast<std::size_t>(it - cdf.begin())];
    const double r1 = std::sqrt(uni(rng));
    const double r2 = uni(rng);
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    cloud.points.push_back((1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c);
  }
  return cloud;
}

}  // namespace modslam
