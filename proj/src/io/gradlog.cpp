#include "gradleak/io/gradlog.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "gradleak/error.hpp"
#include "gradleak/model/model.hpp"

namespace gradleak {
namespace {

constexpr char kMagic[6] = {'T', 'G', 'L', 'O', 'G', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

void put_f32s(std::ostream& out, const std::vector<double>& values) {
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    require(std::isfinite(v) && std::abs(v) <= std::numeric_limits<float>::max(), ErrorKind::kOverflow,
            "value does not fit a 32-bit float");
    const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int k = 0; k < 4; ++k) buf[i * 4 + k] = static_cast<char>((u >> (8 * k)) & 0xff);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
  return true;
}

bool get_f32s(std::istream& in, std::vector<double>& out, std::size_t p) {
  std::vector<unsigned char> buf(p * 4);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) return false;
  out.resize(p);
  for (std::size_t i = 0; i < p; ++i) {
    const std::uint32_t u = std::uint32_t{buf[i * 4]} | (std::uint32_t{buf[i * 4 + 1]} << 8) |
                            (std::uint32_t{buf[i * 4 + 2]} << 16) | (std::uint32_t{buf[i * 4 + 3]} << 24);
    out[i] = static_cast<double>(std::bit_cast<float>(u));
  }
  return true;
}

}  // namespace

void write_log(const std::filesystem::path& path, const std::string& descriptor,
               std::span<const GradObservation> observations) {
  require(descriptor.find('\n') == std::string::npos, ErrorKind::kInvalidArgument,
          "descriptor must be a single line");
  const std::size_t p = ModelSpec::parse(descriptor).total_params();
  require(observations.size() <= std::numeric_limits<std::uint32_t>::max(), ErrorKind::kInvalidArgument,
          "too many records");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  out << descriptor << '\n';
  put_u32(out, static_cast<std::uint32_t>(p));
  put_u32(out, static_cast<std::uint32_t>(observations.size()));
  for (const auto& obs : observations) {
    require(obs.weights().size() == p && obs.gradient().size() == p, ErrorKind::kShape,
            "observation dimension differs from p = " + std::to_string(p));
    put_u32(out, obs.round());
    put_u32(out, obs.client());
    put_u32(out, evaluation::batch_tag(obs));
    put_f32s(out, obs.weights());
    put_f32s(out, obs.gradient());
  }
  require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

GradientLog read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open " + path.string());
  char magic[sizeof kMagic];
  require(in.read(magic, sizeof magic) && std::memcmp(magic, kMagic, sizeof kMagic) == 0, ErrorKind::kData,
          path.string() + ": bad magic");
  GradientLog log;
  require(static_cast<bool>(std::getline(in, log.descriptor)), ErrorKind::kData,
          path.string() + ": missing descriptor line");
  std::size_t expected_p = 0;
  try {
    expected_p = ModelSpec::parse(log.descriptor).total_params();
  } catch (const Error& e) {
    fail(ErrorKind::kData, path.string() + ": bad descriptor: " + e.what());
  }
  std::uint32_t p = 0, count = 0;
  require(get_u32(in, p) && get_u32(in, count), ErrorKind::kData, path.string() + ": truncated header");
  require(p == expected_p, ErrorKind::kData,
          path.string() + ": p = " + std::to_string(p) + " but descriptor implies " + std::to_string(expected_p));
  log.p = p;

  // Check the body length up front so a corrupt count cannot drive a huge allocation.
  const auto body_start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto body_bytes = static_cast<std::uint64_t>(in.tellg() - body_start);
  in.seekg(body_start);
  const std::uint64_t record_bytes = 12 + 8 * std::uint64_t{p};
  const std::uint64_t complete = body_bytes / record_bytes;
  if (complete < count) fail(ErrorKind::kData, path.string() + ": unexpected EOF at record " + std::to_string(complete));
  require(body_bytes == count * record_bytes, ErrorKind::kData,
          path.string() + ": trailing bytes after " + std::to_string(count) + " records");

  log.observations.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t round = 0, client = 0, tag = 0;
    std::vector<double> w, g;
    const bool ok = get_u32(in, round) && get_u32(in, client) && get_u32(in, tag) && get_f32s(in, w, p) &&
                    get_f32s(in, g, p);
    if (!ok) fail(ErrorKind::kData, path.string() + ": unexpected EOF at record " + std::to_string(i));
    log.observations.emplace_back(round, client, std::make_shared<const std::vector<double>>(std::move(w)),
                                  std::move(g), tag);
  }
  return log;
}

}  // namespace gradleak
