#include "deconflict/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace deconflict;

namespace {

Checkpoint sample() {
  Checkpoint c;
  c.fleet = FleetId::kB;
  c.seed = 1234567890123ULL;
  c.episodes = 400;
  c.net = nn::init_network<float>(9);
  return c;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / (std::string("deconflict_") + name)).string();
}

std::vector<uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::string& path, const std::vector<uint8_t>& b) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("save, load, save is byte-identical") {
  const auto path = temp_path("rt.bin");
  const auto c = sample();
  save_checkpoint(c, path);
  const auto first = read_bytes(path);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.fleet == FleetId::kB);
  CHECK(loaded.seed == c.seed);
  CHECK(loaded.episodes == 400);
  for (size_t t = 0; t < c.net.params().size(); ++t) CHECK(loaded.net.params()[t].values == c.net.params()[t].values);
  save_checkpoint(loaded, path);
  CHECK(read_bytes(path) == first);
  CHECK(std::string(first.begin(), first.begin() + 8) == "DCFLCKPT");
  std::filesystem::remove(path);
}

TEST_CASE("payload length matches the declared shapes") {
  const auto c = sample();
  const auto bytes = serialize_checkpoint(c);
  size_t header = 8 + 4 + 1 + 8 + 8 + 16 + 4 + 8;
  for (const auto& p : c.net.params()) header += 4 + 4 * p.shape.size();
  CHECK(bytes.size() == header + 4 * c.net.num_parameters());
}

TEST_CASE("truncated file names expected and found payload lengths") {
  auto bytes = serialize_checkpoint(sample());
  const size_t payload = 4 * sample().net.num_parameters();
  bytes.resize(bytes.size() - 10);
  const auto path = temp_path("trunc.bin");
  write_bytes(path, bytes);
  const std::string want = "expected " + std::to_string(payload) + " bytes, found " + std::to_string(payload - 10);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains(want.c_str()), CheckpointError);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains(path.c_str()), CheckpointError);
  std::filesystem::remove(path);

  bytes.resize(20);
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(bytes), doctest::Contains("truncated"), CheckpointError);
}

TEST_CASE("corrupt headers are rejected") {
  const auto good = serialize_checkpoint(sample());

  auto magic = good;
  magic[0] = 'X';
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(magic), doctest::Contains("magic"), CheckpointError);

  auto version = good;
  version[8] = 99;
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(version), doctest::Contains("version"), CheckpointError);

  auto extra = good;
  extra.push_back(0);
  CHECK_THROWS_AS(deserialize_checkpoint(extra), CheckpointError);

  // Network dims start after magic, version, fleet, seed and episodes.
  auto dims = good;
  dims[8 + 4 + 1 + 8 + 8 + 4] += 1;  // encoder width
  CHECK_THROWS_AS(deserialize_checkpoint(dims), CheckpointError);

  CHECK_THROWS_AS(load_checkpoint(temp_path("does_not_exist.bin")), CheckpointError);
}
