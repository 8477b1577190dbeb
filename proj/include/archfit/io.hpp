#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archfit/contours.hpp"
#include "archfit/fitting.hpp"
#include "archfit/mesh.hpp"
#include "archfit/ssm.hpp"
#include "archfit/synth.hpp"
#include "archfit/voxel.hpp"

namespace archfit::io {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Text files are written with '\n' line endings and a trailing newline; the same data always
// produces the same bytes.
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
Json read_json(const fs::path& path);
// indent < 0 writes a single line (meshes, models); manifests use an indent for reading.
void write_json(const fs::path& path, const Json& doc, int indent = -1);

// Mesh interchange: n_rings, pts_per_ring, nodes [[x,y,z]...], cells [[i,j,k]...]; optional
// per-cell scalar fields under "cell_data".
Json mesh_to_json(const TubeMesh& mesh, const std::map<std::string, std::vector<double>>& cell_data = {});
TubeMesh mesh_from_json(const Json& doc);
void save_mesh(const fs::path& path, const TubeMesh& mesh, const std::map<std::string, std::vector<double>>& cell_data = {});
TubeMesh load_mesh(const fs::path& path);

// Run-length encoding of occupancy: alternating run lengths starting with an empty run.
std::vector<std::uint64_t> rle_encode(const std::vector<char>& occupancy);
std::vector<char> rle_decode(const std::vector<std::uint64_t>& runs, std::size_t size);
Json mask_to_json(const VoxelMask& mask);
VoxelMask mask_from_json(const Json& doc);

Json model_to_json(const ShapeModel& model);
ShapeModel model_from_json(const Json& doc);

// Contours file: frames -> slices with plane origin/normal, station label and points.
Json slices_to_json(const SliceSet& slices);
SliceSet slices_from_json(const Json& doc);

Json arch_params_to_json(const ArchParams& p);

// Keeps only the listed stations (1-based labels) in every frame, in the listed order.
SliceSet select_stations(const SliceSet& slices, const std::vector<int>& stations);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const fs::path& path);

/// Run manifest: config snapshot, digests of inputs and outputs, timings per stage.
class Manifest {
 public:
  Manifest(std::string command, Json config);
  void add_input(const fs::path& path);
  void add_output(const fs::path& path);
  void add_timing(const std::string& stage, double seconds);
  Json to_json() const;
  void write(const fs::path& path) const;

  // Recomputes every recorded digest; returns the paths that no longer match.
  static std::vector<std::string> verify(const Json& manifest);

 private:
  std::string command_;
  Json config_;
  std::vector<std::pair<std::string, std::string>> inputs_, outputs_;
  std::vector<std::pair<std::string, double>> timings_;
};

std::string tool_version();

// Deterministic per-stage seed derived from the root seed and a stage name.
std::uint64_t stage_seed(std::uint64_t root, const std::string& stage);

}  // namespace archfit::io
