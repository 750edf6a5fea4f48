#include "causalfield/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "causalfield/error.hpp"

namespace causalfield {

namespace {

using nlohmann::json;

json spec_json(const LatticeSpec& s) {
  return {{"d", s.d},   {"nt", s.nt},     {"ns", s.ns},           {"dx", s.dx},
          {"dt", s.dt}, {"mass", s.mass}, {"c_max", s.c_max}, {"periodic", s.periodic}};
}

LatticeSpec spec_from(const json& j) {
  LatticeSpec s;
  s.d = j.at("d").get<int>();
  s.nt = j.at("nt").get<int>();
  s.ns = j.at("ns").get<std::array<int, 2>>();
  s.dx = j.at("dx").get<double>();
  s.dt = j.at("dt").get<double>();
  s.mass = j.at("mass").get<double>();
  s.c_max = j.at("c_max").get<double>();
  s.periodic = j.at("periodic").get<bool>();
  return s;
}

json box_json(const Box& b) { return {{"lo", b.lo}, {"hi", b.hi}}; }

void write_file(const std::string& path, const json& header, const std::string& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FormatError, "cannot write " + path);
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorCode::FormatError, "write failed for " + path);
}

std::pair<json, std::string> read_file(const std::string& path, const std::string& format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FormatError, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, path + ": bad header: " + e.what());
  }
  if (header.value("format", "") != format)
    throw Error(ErrorCode::FormatError, path + ": expected format " + format);
  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.size() != header.at("bytes").get<std::size_t>())
    throw Error(ErrorCode::FormatError, path + ": payload size does not match the header");
  return {header, payload};
}

void append_doubles(std::string& out, const std::vector<double>& v) {
  for (double x : v) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.append(buf, 8);
  }
}

std::vector<double> read_doubles(const std::string& in, std::size_t offset, std::size_t count) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, in.data() + offset + 8 * i, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v[i] = std::bit_cast<double>(bits);
  }
  return v;
}

}  // namespace

void save_perturbation(const KineticPerturbation& p, const std::string& path) {
  const auto& s = p.spec();
  std::string payload;
  json names = json::array();
  for (int mu = 0; mu < s.d; ++mu)
    for (int nu = mu; nu < s.d; ++nu) {
      append_doubles(payload, p.component(mu, nu));
      names.push_back("p" + std::to_string(mu) + std::to_string(nu));
    }
  append_doubles(payload, p.potential());
  names.push_back("q");
  const auto adm = check_admissible(p);
  json header = {{"format", "causalfield-perturbation"}, {"version", 1},
                 {"spec", spec_json(s)},                 {"support", box_json(p.support())},
                 {"epsilon", adm.epsilon},               {"components", names},
                 {"bytes", payload.size()}};
  write_file(path, header, payload);
}

KineticPerturbation load_perturbation(const std::string& path) {
  auto [header, payload] = read_file(path, "causalfield-perturbation");
  KineticPerturbation p(spec_from(header.at("spec")));
  const auto& s = p.spec();
  const std::size_t n = s.size();
  const std::size_t blocks = static_cast<std::size_t>(s.d * (s.d + 1) / 2 + 1);
  if (payload.size() != blocks * n * 8)
    throw Error(ErrorCode::FormatError, path + ": payload does not match the lattice");
  std::size_t k = 0;
  for (int mu = 0; mu < s.d; ++mu)
    for (int nu = mu; nu < s.d; ++nu) p.component(mu, nu) = read_doubles(payload, 8 * n * k++, n);
  p.potential() = read_doubles(payload, 8 * n * k, n);
  return p;
}

void save_region(const Region& r, const std::string& path) {
  std::string payload((r.mask().size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < r.mask().size(); ++i)
    if (r.mask()[i]) payload[i / 8] = static_cast<char>(payload[i / 8] | (1 << (i % 8)));
  json header = {{"format", "causalfield-region"}, {"version", 1},
                 {"spec", spec_json(r.spec())},    {"support", box_json(r.bounding_box())},
                 {"count", r.count()},             {"bytes", payload.size()}};
  write_file(path, header, payload);
}

Region load_region(const std::string& path) {
  auto [header, payload] = read_file(path, "causalfield-region");
  const LatticeSpec s = spec_from(header.at("spec"));
  if (payload.size() != (s.size() + 7) / 8)
    throw Error(ErrorCode::FormatError, path + ": payload does not match the lattice");
  std::vector<std::uint8_t> mask(s.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = (static_cast<unsigned char>(payload[i / 8]) >> (i % 8)) & 1u;
  return Region(s, std::move(mask));
}

void save_field(const LatticeField& f, const std::string& path) {
  std::string payload;
  append_doubles(payload, std::vector<double>(f.data().begin(), f.data().end()));
  json header = {{"format", "causalfield-field"}, {"version", 1},
                 {"spec", spec_json(f.spec())},   {"support", box_json(f.support())},
                 {"bytes", payload.size()}};
  write_file(path, header, payload);
}

LatticeField load_field(const std::string& path) {
  auto [header, payload] = read_file(path, "causalfield-field");
  const LatticeSpec s = spec_from(header.at("spec"));
  if (payload.size() != s.size() * 8)
    throw Error(ErrorCode::FormatError, path + ": payload does not match the lattice");
  return LatticeField(s, read_doubles(payload, 0, s.size()));
}

}  // namespace causalfield
