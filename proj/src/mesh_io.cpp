#include "bmkn/mesh_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace bmkn {

namespace fs = std::filesystem;

namespace {

fs::path sidecar_path(const fs::path& path) {
  fs::path p = path;
  p += ".labels";
  return p;
}

std::optional<std::vector<BodyPart>> load_labels(const fs::path& path,
                                                 size_t vertex_count) {
  const fs::path sc = sidecar_path(path);
  if (!fs::exists(sc)) return std::nullopt;
  std::ifstream in(sc);
  if (!in) throw IoError("cannot open label sidecar: " + sc.string());
  std::vector<BodyPart> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int v = 0;
    try {
      v = std::stoi(line);
    } catch (const std::exception&) {
      throw ParseError("bad label line in " + sc.string() + ": " + line);
    }
    if (v < 0 || v >= kBodyPartCount) {
      throw ParseError("label ordinal out of range in " + sc.string() + ": " +
                       line);
    }
    labels.push_back(static_cast<BodyPart>(v));
  }
  if (labels.size() != vertex_count) {
    throw LabelMismatch("sidecar " + sc.string() + " has " +
                        std::to_string(labels.size()) + " labels for " +
                        std::to_string(vertex_count) + " vertices");
  }
  return labels;
}

void save_labels(const Mesh& mesh, const fs::path& path) {
  if (!mesh.labels) {
    // drop a stale sidecar so load(save(m)) round-trips the label state too
    std::error_code ec;
    fs::remove(sidecar_path(path), ec);
    return;
  }
  std::ofstream out(sidecar_path(path));
  if (!out) throw IoError("cannot write label sidecar for " + path.string());
  for (BodyPart p : *mesh.labels) out << int(p) << "\n";
}

// Full-precision float formatting so that load(save(m)) is exact.
void append_double(std::string& s, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  s += buf;
}

uint32_t parse_obj_index(const std::string& token, size_t vertex_count) {
  // Accept v, v/vt, v/vt/vn, v//vn; only the position index is used.
  size_t slash = token.find('/');
  const std::string head = slash == std::string::npos ? token
                                                      : token.substr(0, slash);
  long idx = 0;
  try {
    idx = std::stol(head);
  } catch (const std::exception&) {
    throw ParseError("bad face index token: " + token);
  }
  if (idx < 0) idx = static_cast<long>(vertex_count) + idx + 1;  // relative
  if (idx < 1 || static_cast<size_t>(idx) > vertex_count) {
    throw ParseError("face index out of range: " + token);
  }
  return static_cast<uint32_t>(idx - 1);
}

Mesh load_obj(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Mesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) {
        throw ParseError("bad vertex line in " + path.string() + ": " + line);
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<uint32_t> idx;
      std::string tok;
      while (ls >> tok) idx.push_back(parse_obj_index(tok, mesh.vertices.size()));
      if (idx.size() != 3) {
        throw ParseError("non-triangle face in " + path.string() + ": " + line);
      }
      mesh.faces.push_back({idx[0], idx[1], idx[2]});
    }
    // all other records (vn, vt, o, g, s, mtllib, usemtl) are skipped
  }
  return mesh;
}

void save_obj(const Mesh& mesh, const fs::path& path) {
  std::string out;
  out.reserve(mesh.vertices.size() * 64 + mesh.faces.size() * 24);
  for (const Vec3& v : mesh.vertices) {
    out += "v ";
    append_double(out, v.x());
    out += ' ';
    append_double(out, v.y());
    out += ' ';
    append_double(out, v.z());
    out += '\n';
  }
  for (const Face& f : mesh.faces) {
    out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) +
           ' ' + std::to_string(f[2] + 1) + '\n';
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << out;
}

struct PlyProperty {
  std::string type;
  std::string name;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<PlyProperty> props;
};

double read_binary_scalar(std::istream& in, const std::string& type) {
  auto get = [&](auto v) -> double {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw ParseError("truncated binary PLY payload");
    return static_cast<double>(v);
  };
  if (type == "float" || type == "float32") return get(float{});
  if (type == "double" || type == "float64") return get(double{});
  if (type == "char" || type == "int8") return get(int8_t{});
  if (type == "uchar" || type == "uint8") return get(uint8_t{});
  if (type == "short" || type == "int16") return get(int16_t{});
  if (type == "ushort" || type == "uint16") return get(uint16_t{});
  if (type == "int" || type == "int32") return get(int32_t{});
  if (type == "uint" || type == "uint32") return get(uint32_t{});
  throw ParseError("unsupported PLY scalar type: " + type);
}

Mesh load_ply(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw ParseError(path.string() + " is not a PLY file");
  }
  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "comment") continue;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") throw ParseError("unsupported PLY format: " + fmt);
    } else if (tag == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw ParseError("PLY property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (tag == "end_header") {
      break;
    }
  }

  Mesh mesh;
  auto read_ascii_tokens = [&](size_t n, std::vector<double>& out) {
    out.clear();
    while (out.size() < n) {
      double v;
      if (!(in >> v)) throw ParseError("truncated ASCII PLY payload");
      out.push_back(v);
    }
  };

  for (const PlyElement& elem : elements) {
    if (elem.name == "vertex") {
      int ix = -1, iy = -1, iz = -1;
      for (size_t k = 0; k < elem.props.size(); ++k) {
        if (elem.props[k].name == "x") ix = int(k);
        if (elem.props[k].name == "y") iy = int(k);
        if (elem.props[k].name == "z") iz = int(k);
      }
      if (ix < 0 || iy < 0 || iz < 0) {
        throw ParseError("PLY vertex element lacks x/y/z");
      }
      mesh.vertices.reserve(elem.count);
      std::vector<double> row;
      for (size_t i = 0; i < elem.count; ++i) {
        if (binary) {
          row.clear();
          for (const PlyProperty& p : elem.props) {
            if (p.is_list) throw ParseError("list property on PLY vertex");
            row.push_back(read_binary_scalar(in, p.type));
          }
        } else {
          read_ascii_tokens(elem.props.size(), row);
        }
        mesh.vertices.emplace_back(row[ix], row[iy], row[iz]);
      }
    } else if (elem.name == "face") {
      mesh.faces.reserve(elem.count);
      for (size_t i = 0; i < elem.count; ++i) {
        size_t n = 0;
        std::vector<long> idx;
        if (binary) {
          const PlyProperty& p = elem.props.at(0);
          n = static_cast<size_t>(read_binary_scalar(in, p.count_type));
          for (size_t k = 0; k < n; ++k) {
            idx.push_back(static_cast<long>(read_binary_scalar(in, p.type)));
          }
        } else {
          double nv;
          if (!(in >> nv)) throw ParseError("truncated PLY face payload");
          n = static_cast<size_t>(nv);
          for (size_t k = 0; k < n; ++k) {
            double v;
            if (!(in >> v)) throw ParseError("truncated PLY face payload");
            idx.push_back(static_cast<long>(v));
          }
        }
        if (n != 3) throw ParseError("non-triangle face in " + path.string());
        Face f;
        for (int k = 0; k < 3; ++k) {
          if (idx[k] < 0 || static_cast<size_t>(idx[k]) >= mesh.vertices.size()) {
            throw ParseError("PLY face index out of range");
          }
          f[k] = static_cast<uint32_t>(idx[k]);
        }
        mesh.faces.push_back(f);
      }
    } else {
      // skip unknown element payload (ascii only; binary size is unknowable)
      if (binary) throw ParseError("unknown element in binary PLY: " + elem.name);
      std::vector<double> row;
      for (size_t i = 0; i < elem.count; ++i) {
        read_ascii_tokens(elem.props.size(), row);
      }
    }
  }
  return mesh;
}

void save_ply(const Mesh& mesh, const fs::path& path, bool binary) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "ply\n";
  os << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  os << "element vertex " << mesh.vertices.size() << "\n";
  os << "property double x\nproperty double y\nproperty double z\n";
  os << "element face " << mesh.faces.size() << "\n";
  os << "property list uchar int vertex_indices\n";
  os << "end_header\n";
  if (binary) {
    for (const Vec3& v : mesh.vertices) {
      double xyz[3] = {v.x(), v.y(), v.z()};
      os.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    for (const Face& f : mesh.faces) {
      uint8_t n = 3;
      int32_t idx[3] = {int32_t(f[0]), int32_t(f[1]), int32_t(f[2])};
      os.write(reinterpret_cast<const char*>(&n), 1);
      os.write(reinterpret_cast<const char*>(idx), sizeof(idx));
    }
  } else {
    std::string out;
    for (const Vec3& v : mesh.vertices) {
      append_double(out, v.x());
      out += ' ';
      append_double(out, v.y());
      out += ' ';
      append_double(out, v.z());
      out += '\n';
    }
    for (const Face& f : mesh.faces) {
      out += "3 " + std::to_string(f[0]) + ' ' + std::to_string(f[1]) + ' ' +
             std::to_string(f[2]) + '\n';
    }
    os << out;
  }
}

}  // namespace

MeshFormat format_from_path(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return MeshFormat::Obj;
  if (ext == ".ply") return MeshFormat::PlyAscii;
  throw ConfigError("cannot infer mesh format from extension: " + path.string());
}

Mesh load_mesh(const fs::path& path) {
  return load_mesh(path, format_from_path(path));
}

Mesh load_mesh(const fs::path& path, MeshFormat format) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  Mesh mesh = format == MeshFormat::Obj ? load_obj(path) : load_ply(path);
  mesh.labels = load_labels(path, mesh.vertices.size());
  mesh.validate();
  return mesh;
}

void save_mesh(const Mesh& mesh, const fs::path& path) {
  save_mesh(mesh, path, format_from_path(path));
}

void save_mesh(const Mesh& mesh, const fs::path& path, MeshFormat format) {
  mesh.validate();
  switch (format) {
    case MeshFormat::Obj: save_obj(mesh, path); break;
    case MeshFormat::PlyAscii: save_ply(mesh, path, false); break;
    case MeshFormat::PlyBinary: save_ply(mesh, path, true); break;
  }
  save_labels(mesh, path);
}

Sequence load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj" || ext == ".ply") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no mesh files in " + dir.string());
  Sequence seq;
  for (const fs::path& f : files) seq.frames.push_back(load_mesh(f));
  return seq;
}

void save_sequence(const Sequence& seq, const fs::path& dir, MeshFormat format) {
  fs::create_directories(dir);
  const char* ext = format == MeshFormat::Obj ? ".obj" : ".ply";
  for (size_t i = 0; i < seq.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu%s", i, ext);
    save_mesh(seq.frames[i], dir / name, format);
  }
}

}  // namespace bmkn
