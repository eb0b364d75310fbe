#include "pift/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace pift {

static_assert(std::endian::native == std::endian::little,
              "dataset payloads are little-endian; big-endian hosts need byte swaps");

void Fnv1a64::update(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = state_;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  state_ = h;
}

std::string Fnv1a64::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  std::uint64_t v = state_;
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

void SampleSet::validate() const {
  if (channels != 1 && channels != 2) {
    throw DatasetError(DatasetError::Kind::BadManifest,
                       "SampleSet: channels_per_input must be 1 or 2");
  }
  if (!solutions.empty() && solutions.size() != inputs.size()) {
    throw DatasetError(DatasetError::Kind::SizeMismatch,
                       "SampleSet: solution count does not match input count");
  }
  for (const auto& sample : inputs) {
    if (static_cast<int>(sample.size()) != channels) {
      throw DatasetError(DatasetError::Kind::SizeMismatch,
                         "SampleSet: sample channel count mismatch");
    }
    for (const auto& field : sample) {
      if (!(field.grid() == grid)) {
        throw DatasetError(DatasetError::Kind::SizeMismatch,
                           "SampleSet: input grid mismatch");
      }
      if (!field.all_finite()) {
        throw DatasetError(DatasetError::Kind::BadManifest,
                           "SampleSet: non-finite input value");
      }
    }
  }
  for (const auto& field : solutions) {
    if (!(field.grid() == grid)) {
      throw DatasetError(DatasetError::Kind::SizeMismatch,
                         "SampleSet: solution grid mismatch");
    }
    if (!field.all_finite()) {
      throw DatasetError(DatasetError::Kind::BadManifest,
                         "SampleSet: non-finite solution value");
    }
  }
}

namespace {

std::vector<unsigned char> input_payload(const SampleSet& set) {
  const std::size_t per_field = set.grid.node_count() * sizeof(double);
  std::vector<unsigned char> buf;
  buf.reserve(set.inputs.size() * set.channels * per_field);
  for (const auto& sample : set.inputs) {
    for (const auto& field : sample) {
      const auto* src = reinterpret_cast<const unsigned char*>(field.values().data());
      buf.insert(buf.end(), src, src + per_field);
    }
  }
  return buf;
}

std::vector<unsigned char> solution_payload(const SampleSet& set) {
  const std::size_t per_field = set.grid.node_count() * sizeof(double);
  std::vector<unsigned char> buf;
  buf.reserve(set.solutions.size() * per_field);
  for (const auto& field : set.solutions) {
    const auto* src = reinterpret_cast<const unsigned char*>(field.values().data());
    buf.insert(buf.end(), src, src + per_field);
  }
  return buf;
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DatasetError(DatasetError::Kind::Io, "cannot open for writing: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out.good()) {
    throw DatasetError(DatasetError::Kind::Io, "write failed: " + path.string());
  }
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) {
    throw DatasetError(DatasetError::Kind::Io, "cannot open for reading: " + path.string());
  }
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in.good()) {
    throw DatasetError(DatasetError::Kind::Io, "read failed: " + path.string());
  }
  return bytes;
}

}  // namespace

std::string sampleset_checksum(const SampleSet& set) {
  Fnv1a64 hash;
  const auto in_bytes = input_payload(set);
  hash.update(in_bytes.data(), in_bytes.size());
  if (set.labeled()) {
    const auto sol_bytes = solution_payload(set);
    hash.update(sol_bytes.data(), sol_bytes.size());
  }
  return hash.hex();
}

void save_sampleset(const SampleSet& set, const std::filesystem::path& dir) {
  set.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw DatasetError(DatasetError::Kind::Io,
                       "cannot create dataset directory: " + dir.string());
  }

  const auto in_bytes = input_payload(set);
  write_file(dir / "inputs.bin", in_bytes);
  Fnv1a64 hash;
  hash.update(in_bytes.data(), in_bytes.size());
  if (set.labeled()) {
    const auto sol_bytes = solution_payload(set);
    write_file(dir / "solutions.bin", sol_bytes);
    hash.update(sol_bytes.data(), sol_bytes.size());
  }

  nlohmann::json manifest = {
      {"format_version", 1},
      {"grid_n", set.grid.n},
      {"sample_count", set.count()},
      {"channels_per_input", set.channels},
      {"has_solutions", set.labeled()},
      {"generator", set.generator},
      {"generator_params", set.generator_params},
      {"seed", set.seed},
      {"checksum", hash.hex()},
  };
  std::ofstream out(dir / "manifest.json");
  if (!out) {
    throw DatasetError(DatasetError::Kind::Io,
                       "cannot write manifest: " + (dir / "manifest.json").string());
  }
  out << manifest.dump(2) << "\n";
  if (!out.good()) {
    throw DatasetError(DatasetError::Kind::Io, "manifest write failed");
  }
}

SampleSet load_sampleset(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  {
    std::ifstream in(dir / "manifest.json");
    if (!in) {
      throw DatasetError(DatasetError::Kind::Io,
                         "cannot read manifest: " + (dir / "manifest.json").string());
    }
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception& exc) {
      throw DatasetError(DatasetError::Kind::BadManifest,
                         std::string("malformed manifest: ") + exc.what());
    }
  }

  SampleSet set;
  try {
    if (manifest.at("format_version").get<int>() != 1) {
      throw DatasetError(DatasetError::Kind::BadManifest,
                         "unsupported dataset format_version");
    }
    set.grid = Grid(manifest.at("grid_n").get<int>());
    set.channels = manifest.at("channels_per_input").get<int>();
    set.generator = manifest.at("generator").get<std::string>();
    set.generator_params = manifest.at("generator_params");
    set.seed = manifest.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& exc) {
    throw DatasetError(DatasetError::Kind::BadManifest,
                       std::string("manifest field error: ") + exc.what());
  }
  const auto sample_count = manifest.at("sample_count").get<std::int64_t>();
  const bool has_solutions = manifest.at("has_solutions").get<bool>();
  const std::string expected_checksum = manifest.at("checksum").get<std::string>();
  if (sample_count < 0) {
    throw DatasetError(DatasetError::Kind::BadManifest, "negative sample_count");
  }

  const std::size_t per_field = set.grid.node_count() * sizeof(double);
  const auto in_bytes = read_file(dir / "inputs.bin");
  const std::size_t expected_in =
      static_cast<std::size_t>(sample_count) * set.channels * per_field;
  if (in_bytes.size() != expected_in) {
    throw DatasetError(DatasetError::Kind::SizeMismatch,
                       "inputs.bin size " + std::to_string(in_bytes.size()) +
                           " does not match manifest (expected " +
                           std::to_string(expected_in) + ")");
  }

  std::vector<unsigned char> sol_bytes;
  if (has_solutions) {
    sol_bytes = read_file(dir / "solutions.bin");
    const std::size_t expected_sol = static_cast<std::size_t>(sample_count) * per_field;
    if (sol_bytes.size() != expected_sol) {
      throw DatasetError(DatasetError::Kind::SizeMismatch,
                         "solutions.bin size " + std::to_string(sol_bytes.size()) +
                             " does not match manifest (expected " +
                             std::to_string(expected_sol) + ")");
    }
  }

  Fnv1a64 hash;
  hash.update(in_bytes.data(), in_bytes.size());
  if (has_solutions) {
    hash.update(sol_bytes.data(), sol_bytes.size());
  }
  if (hash.hex() != expected_checksum) {
    throw DatasetError(DatasetError::Kind::ChecksumMismatch,
                       "payload checksum " + hash.hex() + " does not match manifest " +
                           expected_checksum);
  }

  set.inputs.resize(static_cast<std::size_t>(sample_count));
  const unsigned char* cursor = in_bytes.data();
  for (auto& sample : set.inputs) {
    sample.reserve(set.channels);
    for (int c = 0; c < set.channels; ++c) {
      std::vector<double> values(set.grid.node_count());
      std::memcpy(values.data(), cursor, per_field);
      cursor += per_field;
      sample.emplace_back(set.grid, std::move(values));
    }
  }
  if (has_solutions) {
    set.solutions.reserve(static_cast<std::size_t>(sample_count));
    const unsigned char* sol_cursor = sol_bytes.data();
    for (std::int64_t s = 0; s < sample_count; ++s) {
      std::vector<double> values(set.grid.node_count());
      std::memcpy(values.data(), sol_cursor, per_field);
      sol_cursor += per_field;
      set.solutions.emplace_back(set.grid, std::move(values));
    }
  }

  set.validate();
  return set;
}

SampleSet slice_sampleset(const SampleSet& set, int offset, int count) {
  if (offset < 0 || count < 0 || offset + count > set.count()) {
    throw std::out_of_range("slice_sampleset: range outside the set");
  }
  SampleSet out;
  out.grid = set.grid;
  out.channels = set.channels;
  out.generator = set.generator;
  out.generator_params = set.generator_params;
  out.generator_params["source_offset"] = offset;
  out.generator_params["source_count"] = count;
  out.seed = set.seed;
  out.inputs.assign(set.inputs.begin() + offset, set.inputs.begin() + offset + count);
  if (set.labeled()) {
    out.solutions.assign(set.solutions.begin() + offset,
                         set.solutions.begin() + offset + count);
  }
  return out;
}

}  // namespace pift
