#include "archfit/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "archfit/error.hpp"

namespace archfit::io {

namespace {

Json points_to_json(const Points& p) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < p.rows(); ++i) arr.push_back({p(i, 0), p(i, 1), p(i, 2)});
  return arr;
}

Points points_from_json(const Json& arr, const char* field) {
  if (!arr.is_array()) throw Error(ErrorCode::Io, fmt::format("'{}' must be an array of [x,y,z]", field));
  Points p(static_cast<Eigen::Index>(arr.size()), 3);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const Json& r = arr[i];
    if (!r.is_array() || r.size() != 3) throw Error(ErrorCode::Io, fmt::format("'{}'[{}] is not a 3-vector", field, i));
    for (int c = 0; c < 3; ++c) p(static_cast<Eigen::Index>(i), c) = r[static_cast<std::size_t>(c)].get<double>();
  }
  return p;
}

Json vec_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const Json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::Io, fmt::format("'{}' must be a 3-vector", field));
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Json cells_to_json(const std::vector<Triangle>& cells) {
  Json arr = Json::array();
  for (const auto& t : cells) arr.push_back({t[0], t[1], t[2]});
  return arr;
}

std::vector<Triangle> cells_from_json(const Json& arr) {
  std::vector<Triangle> cells;
  cells.reserve(arr.size());
  for (const auto& t : arr) cells.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
  return cells;
}

const Json& field(const Json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw Error(ErrorCode::Io, fmt::format("missing field '{}'", key));
  return doc.at(key);
}

template <class F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, e.what());
  }
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& doc, int indent) { write_text(path, doc.dump(indent) + "\n"); }

// ---------------------------------------------------------------------------------------------

Json mesh_to_json(const TubeMesh& mesh, const std::map<std::string, std::vector<double>>& cell_data) {
  Json doc;
  doc["n_rings"] = mesh.n_rings();
  doc["pts_per_ring"] = mesh.pts_per_ring();
  doc["nodes"] = points_to_json(mesh.nodes());
  doc["cells"] = cells_to_json(mesh.cells());
  if (!cell_data.empty()) {
    Json cd = Json::object();
    for (const auto& [name, values] : cell_data) {
      if (values.size() != mesh.cells().size()) throw Error(ErrorCode::InvalidArgument, "cell field '" + name + "' has the wrong length");
      cd[name] = values;
    }
    doc["cell_data"] = cd;
  }
  return doc;
}

TubeMesh mesh_from_json(const Json& doc) {
  return guarded([&] {
    const int rings = field(doc, "n_rings").get<int>();
    const int ppr = field(doc, "pts_per_ring").get<int>();
    Points nodes = points_from_json(field(doc, "nodes"), "nodes");
    if (nodes.rows() != static_cast<Eigen::Index>(rings) * ppr) throw Error(ErrorCode::Io, "node count does not match n_rings x pts_per_ring");
    TubeMesh mesh(rings, ppr, std::move(nodes), cells_from_json(field(doc, "cells")));
    return mesh;
  });
}

void save_mesh(const fs::path& path, const TubeMesh& mesh, const std::map<std::string, std::vector<double>>& cell_data) {
  write_json(path, mesh_to_json(mesh, cell_data));
}

TubeMesh load_mesh(const fs::path& path) {
  TubeMesh mesh = mesh_from_json(read_json(path));
  mesh.validate();
  return mesh;
}

// ---------------------------------------------------------------------------------------------

std::vector<std::uint64_t> rle_encode(const std::vector<char>& occupancy) {
  std::vector<std::uint64_t> runs;
  char current = 0;
  std::uint64_t length = 0;
  for (char v : occupancy) {
    const char b = v ? 1 : 0;
    if (b == current) {
      ++length;
    } else {
      runs.push_back(length);
      current = b;
      length = 1;
    }
  }
  runs.push_back(length);
  return runs;
}

std::vector<char> rle_decode(const std::vector<std::uint64_t>& runs, std::size_t size) {
  std::vector<char> out;
  out.reserve(size);
  char value = 0;
  for (auto r : runs) {
    if (out.size() + r > size) throw Error(ErrorCode::Io, "occupancy runs exceed the grid size");
    out.insert(out.end(), r, value);
    value = value ? 0 : 1;
  }
  if (out.size() != size) throw Error(ErrorCode::Io, "occupancy runs do not cover the grid");
  return out;
}

Json mask_to_json(const VoxelMask& mask) {
  Json doc;
  doc["origin"] = vec_to_json(mask.grid.origin);
  doc["spacing"] = vec_to_json(mask.grid.spacing);
  doc["dims"] = mask.grid.dims;
  doc["occupancy"] = {{"encoding", "rle"}, {"order", "x-fastest"}, {"runs", rle_encode(mask.occupancy)}};
  return doc;
}

VoxelMask mask_from_json(const Json& doc) {
  return guarded([&] {
    VoxelMask m;
    m.grid.origin = vec_from_json(field(doc, "origin"), "origin");
    m.grid.spacing = vec_from_json(field(doc, "spacing"), "spacing");
    m.grid.dims = field(doc, "dims").get<std::array<int, 3>>();
    if ((m.grid.spacing.array() <= 0).any()) throw Error(ErrorCode::Io, "voxel spacing must be > 0");
    const Json& occ = field(doc, "occupancy");
    if (field(occ, "encoding").get<std::string>() != "rle") throw Error(ErrorCode::Io, "unsupported occupancy encoding");
    m.occupancy = rle_decode(field(occ, "runs").get<std::vector<std::uint64_t>>(), m.grid.size());
    return m;
  });
}

// ---------------------------------------------------------------------------------------------

Json model_to_json(const ShapeModel& model) {
  Json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["topology"] = {{"n_rings", model.n_rings}, {"pts_per_ring", model.pts_per_ring}, {"cells", cells_to_json(model.cells)}};
  const Eigen::VectorXd mean = flatten(model.mean);
  doc["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
  Json modes = Json::array();
  for (const auto& m : model.modes) {
    const Eigen::VectorXd f = flatten(m);
    modes.push_back(std::vector<double>(f.data(), f.data() + f.size()));
  }
  doc["modes"] = modes;
  doc["sigmas"] = model.sigmas;
  doc["explained_variance_ratio"] = model.explained_variance_ratio;
  doc["truncated_modes"] = model.truncated_modes;
  return doc;
}

ShapeModel model_from_json(const Json& doc) {
  return guarded([&] {
    const int version = field(doc, "format_version").get<int>();
    if (version != kModelFormatVersion) throw Error(ErrorCode::Io, fmt::format("unsupported model format_version {}", version));
    ShapeModel model;
    const Json& topo = field(doc, "topology");
    model.n_rings = field(topo, "n_rings").get<int>();
    model.pts_per_ring = field(topo, "pts_per_ring").get<int>();
    model.cells = cells_from_json(field(topo, "cells"));
    const auto mean = field(doc, "mean").get<std::vector<double>>();
    const std::size_t dim = static_cast<std::size_t>(model.n_rings) * model.pts_per_ring * 3;
    if (mean.size() != dim) throw Error(ErrorCode::Io, "mean has the wrong length");
    model.mean = unflatten(Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())));
    for (const auto& m : field(doc, "modes")) {
      const auto v = m.get<std::vector<double>>();
      if (v.size() != dim) throw Error(ErrorCode::Io, "mode has the wrong length");
      model.modes.push_back(unflatten(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))));
    }
    model.sigmas = field(doc, "sigmas").get<std::vector<double>>();
    model.explained_variance_ratio = field(doc, "explained_variance_ratio").get<std::vector<double>>();
    model.truncated_modes = doc.value("truncated_modes", 0);
    if (model.sigmas.size() != model.modes.size() || model.explained_variance_ratio.size() != model.modes.size()) {
      throw Error(ErrorCode::Io, "modes, sigmas and explained_variance_ratio disagree in length");
    }
    return model;
  });
}

// ---------------------------------------------------------------------------------------------

Json slices_to_json(const SliceSet& slices) {
  Json frames = Json::array();
  for (std::size_t t = 0; t < slices.frames.size(); ++t) {
    Json list = Json::array();
    for (const auto& c : slices.frames[t]) {
      list.push_back({{"station", c.station},
                      {"origin", vec_to_json(c.plane.origin)},
                      {"normal", vec_to_json(c.plane.normal)},
                      {"points", points_to_json(c.points)}});
    }
    frames.push_back({{"frame", static_cast<int>(t)}, {"slices", list}});
  }
  return Json{{"frames", frames}};
}

SliceSet slices_from_json(const Json& doc) {
  return guarded([&] {
    SliceSet set;
    for (const auto& f : field(doc, "frames")) {
      const int t = field(f, "frame").get<int>();
      std::vector<SliceContour> frame;
      for (const auto& s : field(f, "slices")) {
        SliceContour c;
        c.plane = Plane::make(vec_from_json(field(s, "origin"), "origin"), vec_from_json(field(s, "normal"), "normal"));
        c.points = points_from_json(field(s, "points"), "points");
        c.station = s.value("station", 0);
        c.frame = t;
        if (c.points.rows() < 3) throw Error(ErrorCode::Io, "a contour needs at least 3 points");
        frame.push_back(std::move(c));
      }
      set.frames.push_back(std::move(frame));
    }
    set.validate();
    return set;
  });
}

Json arch_params_to_json(const ArchParams& p) {
  return Json{{"arch_radius", p.arch_radius},
              {"ascending_length", p.ascending_length},
              {"descending_length", p.descending_length},
              {"inlet_radius", p.inlet_radius},
              {"taper", p.taper},
              {"ellipticity", p.ellipticity},
              {"bend_out_of_plane", p.bend_out_of_plane},
              {"noise_amplitude", p.noise_amplitude},
              {"noise_correlation_length", p.noise_correlation_length},
              {"seed", p.seed}};
}

SliceSet select_stations(const SliceSet& slices, const std::vector<int>& stations) {
  SliceSet out;
  for (const auto& frame : slices.frames) {
    std::vector<SliceContour> picked;
    for (int s : stations) {
      auto it = std::find_if(frame.begin(), frame.end(), [&](const SliceContour& c) { return c.station == s; });
      if (it == frame.end()) throw Error(ErrorCode::InvalidArgument, fmt::format("station {} not present in the contours file", s));
      picked.push_back(*it);
    }
    out.frames.push_back(std::move(picked));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_text(path)); }

Manifest::Manifest(std::string command, Json config) : command_(std::move(command)), config_(std::move(config)) {}

void Manifest::add_input(const fs::path& path) { inputs_.emplace_back(path.string(), file_sha256(path)); }
void Manifest::add_output(const fs::path& path) { outputs_.emplace_back(path.string(), file_sha256(path)); }
void Manifest::add_timing(const std::string& stage, double seconds) { timings_.emplace_back(stage, seconds); }

Json Manifest::to_json() const {
  auto digests = [](const std::vector<std::pair<std::string, std::string>>& list) {
    Json arr = Json::array();
    for (const auto& [p, d] : list) arr.push_back({{"path", p}, {"sha256", d}});
    return arr;
  };
  Json timings = Json::object();
  for (const auto& [stage, s] : timings_) timings[stage] = s;
  return Json{{"tool", "archfit"},
              {"version", tool_version()},
              {"command", command_},
              {"config", config_},
              {"inputs", digests(inputs_)},
              {"outputs", digests(outputs_)},
              {"timings_s", timings}};
}

void Manifest::write(const fs::path& path) const { write_json(path, to_json(), 2); }

std::vector<std::string> Manifest::verify(const Json& manifest) {
  std::vector<std::string> bad;
  for (const char* key : {"inputs", "outputs"}) {
    if (!manifest.contains(key)) continue;
    for (const auto& entry : manifest.at(key)) {
      const std::string path = entry.at("path").get<std::string>();
      try {
        if (file_sha256(path) != entry.at("sha256").get<std::string>()) bad.push_back(path);
      } catch (const Error&) {
        bad.push_back(path);
      }
    }
  }
  return bad;
}

std::string tool_version() { return "1.0.0"; }

std::uint64_t stage_seed(std::uint64_t root, const std::string& stage) {
  // FNV-1a over the stage name, mixed with the root through splitmix64.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : stage) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace archfit::io
