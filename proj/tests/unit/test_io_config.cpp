#include <doctest.h>

#include <random>

#include "archfit/config.hpp"
#include "archfit/error.hpp"
#include "archfit/io.hpp"
#include "archfit/synth.hpp"
#include "test_support.hpp"

using namespace archfit;
using namespace archfit::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("archfit_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("mesh file round trip is exact") {
  const fs::path dir = scratch_dir("mesh");
  const TubeMesh m = generate_arch(sample_arch_params(1, 2));
  io::save_mesh(dir / "m.json", m, {{"field", std::vector<double>(m.cells().size(), 0.25)}});
  const TubeMesh back = io::load_mesh(dir / "m.json");
  CHECK(back.nodes() == m.nodes());
  CHECK(back.cells() == m.cells());
  // Same data, same bytes.
  io::save_mesh(dir / "n.json", back, {{"field", std::vector<double>(m.cells().size(), 0.25)}});
  CHECK(io::file_sha256(dir / "m.json") == io::file_sha256(dir / "n.json"));
}

TEST_CASE("model and contour round trips") {
  const ShapeModel m = cohort_model(7, 8, 4);
  const ShapeModel back = io::model_from_json(io::model_to_json(m));
  CHECK(back.mean == m.mean);
  REQUIRE(back.n_modes() == 4);
  for (int i = 0; i < 4; ++i) CHECK(back.modes[static_cast<std::size_t>(i)] == m.modes[static_cast<std::size_t>(i)]);
  CHECK(back.sigmas == m.sigmas);

  const TubeMesh mesh = generate_arch(ArchParams{});
  const CandidateStations st = candidate_stations(mesh);
  const SliceSet s = extract_slice_set(animate(mesh, MotionProfile::cardiac(3, 1.05, 1.02, 1)), st.planes, SliceExtraction{},
                                       {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  const SliceSet r = io::slices_from_json(io::slices_to_json(s));
  REQUIRE(r.n_frames() == 3);
  REQUIRE(r.n_slices() == 12);
  for (int f = 0; f < 3; ++f) {
    for (int k = 0; k < 12; ++k) {
      const auto& a = s.frames[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)];
      const auto& b = r.frames[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)];
      CHECK(a.points == b.points);
      CHECK(a.station == b.station);
      CHECK(a.plane.normal == b.plane.normal);
    }
  }

  const SliceSet sel = io::select_stations(s, {12, 2, 5});
  REQUIRE(sel.n_slices() == 3);
  CHECK(sel.frames[2][0].station == 12);
  CHECK(sel.frames[2][2].station == 5);
  CHECK(code_of([&] { io::select_stations(s, {2, 13}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("mask encoding") {
  const std::vector<char> occ{0, 0, 1, 1, 1, 0, 1};
  const auto runs = io::rle_encode(occ);
  CHECK(runs == std::vector<std::uint64_t>{2, 3, 1, 1});
  CHECK(io::rle_decode(runs, occ.size()) == occ);
  CHECK(io::rle_encode({1, 1}) == std::vector<std::uint64_t>{0, 2});

  const VoxelMask mask = voxelize(straight_tube(5.0, 10, 24), 1.0);
  const VoxelMask back = io::mask_from_json(io::mask_to_json(mask));
  CHECK(back.grid == mask.grid);
  CHECK(back.occupancy == mask.occupancy);
}

TEST_CASE("config parsing") {
  const RunConfig d = config_from_json(io::Json::object());
  CHECK(d.fit.config.schedule.total == 300);
  CHECK(d.plan.config.start == std::vector<int>{2, 12});

  io::Json doc = io::Json::parse(R"({"seed": 3, "fit": {"weights": {"modal": 0.5}}, "synth": {"arch": {"taper": 0.9}}})");
  const RunConfig c = config_from_json(doc);
  CHECK(c.seed == 3);
  CHECK(c.fit.config.weights.modal == 0.5);
  CHECK(c.synth.apply(ArchParams{}).taper == 0.9);
  // Round trip through the snapshot.
  CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));

  try {
    config_from_json(io::Json::parse(R"({"fit": {"weigths": {}}})"));
    FAIL("expected Config");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("fit.weigths") != std::string::npos);
  }
  CHECK(code_of([] { config_from_json(io::Json::parse(R"({"synth": {"arch": {"taper": 0}}})")).validate(); }) ==
        ErrorCode::Config);
  CHECK(code_of([] { config_from_json(io::Json::parse(R"({"synth": {"arch": {"radius": 3}}})")).validate(); }) ==
        ErrorCode::Config);
  CHECK(code_of([] { config_from_json(io::Json::parse(R"({"jobs": "four"})")).validate(); }) == ErrorCode::Config);
}

TEST_CASE("manifest digests and stage seeds") {
  const fs::path dir = scratch_dir("manifest");
  io::write_text(dir / "a.txt", "hello\n");
  io::Manifest man("test", io::Json::object());
  man.add_output(dir / "a.txt");
  man.add_timing("x", 0.1);
  const io::Json j = man.to_json();
  CHECK(io::Manifest::verify(j).empty());
  io::write_text(dir / "a.txt", "changed\n");
  CHECK(io::Manifest::verify(j).size() == 1);

  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(io::stage_seed(7, "synth") == io::stage_seed(7, "synth"));
  CHECK(io::stage_seed(7, "synth") != io::stage_seed(7, "fit"));
  CHECK(io::stage_seed(7, "synth") != io::stage_seed(8, "synth"));
}
