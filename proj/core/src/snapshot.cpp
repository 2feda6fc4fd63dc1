#include "pam/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "json.hpp"
#include "pam/error.hpp"

namespace pam {

namespace {

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return __builtin_bswap64(v);
  }
}

}  // namespace

void save_field(const Field& f, const std::filesystem::path& path, double time,
                std::uint64_t seed, double log_scale) {
  const Box& box = f.box();
  nlohmann::json header = {
      {"format", "pam-field"},   {"version", 1},
      {"d", box.dim()},          {"R", box.radius()},
      {"boundary_mode", std::string(to_string(box.boundary()))},
      {"center", box.center()},  {"time", time},
      {"seed", seed},            {"log_scale", log_scale},
      {"count", f.size()},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  std::vector<std::uint64_t> payload(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    payload[i] = to_little_endian(std::bit_cast<std::uint64_t>(f[i]));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(std::uint64_t)));
  if (!out) throw ConfigError("write to '" + path.string() + "' failed");
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open snapshot '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("snapshot '" + path.string() + "' is empty");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed snapshot header in '" + path.string() + "': " + e.what());
  }

  Snapshot snap;
  std::size_t count = 0;
  try {
    if (header.value("format", std::string{}) != "pam-field")
      throw ParseError("snapshot header lacks format \"pam-field\"");
    snap.header.dim = header.at("d").get<int>();
    snap.header.radius = header.at("R").get<int>();
    snap.header.mode = parse_boundary_mode(header.at("boundary_mode").get<std::string>());
    snap.header.center = header.value("center", Point{});
    snap.header.time = header.value("time", 0.0);
    snap.header.seed = header.value("seed", std::uint64_t{0});
    snap.header.log_scale = header.value("log_scale", 0.0);
    count = header.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed snapshot header in '" + path.string() + "': " + e.what());
  }

  Box box(snap.header.dim, snap.header.radius, snap.header.mode, snap.header.center);
  if (count != box.size())
    throw ParseError("snapshot header count " + std::to_string(count) +
                     " does not match box size " + std::to_string(box.size()));

  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != count * sizeof(std::uint64_t))
    throw ParseError("snapshot payload size mismatch in '" + path.string() + "': expected " +
                     std::to_string(count * sizeof(std::uint64_t)) + " bytes, found " +
                     std::to_string(bytes.size()));
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t raw;
    std::memcpy(&raw, bytes.data() + i * sizeof(raw), sizeof(raw));
    values[i] = std::bit_cast<double>(to_little_endian(raw));
  }
  snap.field = Field(std::move(box), std::move(values));
  return snap;
}

Field load_field(const std::filesystem::path& path) { return load_snapshot(path).field; }

}  // namespace pam
