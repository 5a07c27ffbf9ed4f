#include "lago/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace lago {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'L', 'A', 'G', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_block(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_f64(out, m.data()[i]);
}

Matrix get_block(std::istream& in, std::uint64_t rows, std::uint64_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = detail::get_f64(in, "checkpoint weights");
  return m;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const LagoParams& p = ckpt.params;
  json meta;
  meta["variant"] = to_string(p.variant);
  meta["zeta"] = p.zeta;
  meta["c_comp"] = p.c_comp;
  meta["prior_mode"] = to_string(p.prior_mode);
  meta["comp_mode"] = to_string(p.comp_mode);
  meta["feature_dim"] = p.feature_dim();
  meta["num_attributes"] = p.num_attributes();
  meta["num_groups"] = p.num_groups();
  meta["w_shape"] = {p.w.rows(), p.w.cols()};
  meta["v_shape"] = {p.v.rows(), p.v.cols()};
  meta["seed"] = ckpt.seed;
  meta["prior"] = std::vector<double>(p.prior.values.data(), p.prior.values.data() + p.prior.values.size());
  meta["attribute_names"] = ckpt.attribute_names;
  if (p.groups) {
    json groups = json::array();
    for (const auto& g : p.groups->groups) groups.push_back({{"name", g.name}, {"attributes", g.attributes}});
    meta["groups"] = groups;
  }
  const std::string text = meta.dump();

  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 4);
  detail::put_le<std::uint32_t>(out, kVersion);
  detail::put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_block(out, p.w);
  put_block(out, p.v);
  return out.str();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[4] = {};
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw Error("not a checkpoint (bad magic)");
  const auto version = detail::get_le<std::uint32_t>(in, "checkpoint version");
  if (version != kVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto length = detail::get_le<std::uint64_t>(in, "metadata length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw Error("truncated checkpoint metadata");

  Checkpoint ckpt;
  try {
    const json meta = json::parse(text);
    LagoParams& p = ckpt.params;
    p.variant = parse_variant(meta.at("variant"));
    p.zeta = meta.at("zeta");
    p.c_comp = meta.at("c_comp");
    p.prior_mode = parse_prior_mode(meta.at("prior_mode"));
    p.comp_mode = parse_comp_mode(meta.at("comp_mode"));
    const auto prior = meta.at("prior").get<std::vector<double>>();
    p.prior.mode = p.prior_mode;
    p.prior.values = Eigen::Map<const Vector>(prior.data(), static_cast<Eigen::Index>(prior.size()));
    ckpt.seed = meta.at("seed");
    ckpt.attribute_names = meta.at("attribute_names").get<std::vector<std::string>>();
    if (meta.contains("groups")) {
      GroupSpec groups;
      for (const auto& g : meta["groups"]) groups.groups.push_back({g.at("name"), g.at("attributes").get<std::vector<int>>()});
      p.groups = std::move(groups);
    }
    const auto w_shape = meta.at("w_shape").get<std::vector<std::uint64_t>>();
    const auto v_shape = meta.at("v_shape").get<std::vector<std::uint64_t>>();
    p.w = get_block(in, w_shape.at(0), w_shape.at(1));
    p.v = get_block(in, v_shape.at(0), v_shape.at(1));
  } catch (const json::exception& e) {
    throw Error(std::string("malformed checkpoint metadata: ") + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes after checkpoint");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace lago
