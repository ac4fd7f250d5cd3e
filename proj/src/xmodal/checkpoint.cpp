#include "mkg/xmodal/checkpoint.hpp"

#include <fstream>
#include <map>

#include "binio.hpp"
#include "mkg/error.hpp"

namespace mkg::xmodal {

namespace {
constexpr char kMagic[8] = {'M', 'K', 'G', 'X', 'C', 'K', 'P', 'T'};
constexpr auto kBad = ErrorCode::InvalidCheckpoint;
}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  nlohmann::json meta = {{"config", model.enc.cfg}, {"vocabulary", model.vocab.tokens()}};
  out.write(kMagic, 8);
  binio::put_u32(out, kCheckpointVersion);
  binio::put_str(out, meta.dump());
  std::uint32_t count = 0;
  model.enc.for_each_param([&](const Param&) { ++count; });
  binio::put_u32(out, count);
  model.enc.for_each_param([&](const Param& p) {
    binio::put_str(out, p.name);
    binio::put_u32(out, static_cast<std::uint32_t>(p.value.rows));
    binio::put_u32(out, static_cast<std::uint32_t>(p.value.cols));
    for (double v : p.value.data) binio::put_f32(out, v);
  });
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw Error(kBad, path.string() + " is not a checkpoint");
  if (binio::get_u32(in, kBad, "version") != kCheckpointVersion) throw Error(kBad, "unsupported checkpoint version");
  Model model;
  try {
    const auto meta = nlohmann::json::parse(binio::get_str(in, kBad, "metadata"));
    model.vocab = Vocabulary::from_tokens(meta.at("vocabulary").get<std::vector<std::string>>());
    auto cfg = meta.at("config").get<ModelConfig>();
    if (cfg.vocab_size != model.vocab.size()) throw Error(kBad, "vocab_size disagrees with the stored vocabulary");
    model.enc = Encoders::init(cfg);
  } catch (const nlohmann::json::exception& e) {
    throw Error(kBad, std::string("bad checkpoint metadata: ") + e.what());
  }
  std::map<std::string, Param*> slots;
  model.enc.for_each_param([&](Param& p) { slots[p.name] = &p; });
  const std::uint32_t count = binio::get_u32(in, kBad, "tensor count");
  if (count != slots.size())
    throw Error(kBad, "expected " + std::to_string(slots.size()) + " tensors, found " + std::to_string(count));
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = binio::get_str(in, kBad, "tensor name", 4096);
    auto it = slots.find(name);
    if (it == slots.end()) throw Error(kBad, "unexpected tensor " + name);
    Param& p = *it->second;
    const std::uint32_t rows = binio::get_u32(in, kBad, "rows");
    const std::uint32_t cols = binio::get_u32(in, kBad, "cols");
    if (rows != p.value.rows || cols != p.value.cols)
      throw Error(kBad, name + " has shape " + std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                            std::to_string(p.value.rows) + "x" + std::to_string(p.value.cols));
    for (auto& v : p.value.data) v = binio::get_f32(in, kBad, "tensor data");
    slots.erase(it);
  }
  return model;
}

void round_to_float(Encoders& enc) {
  enc.for_each_param([](Param& p) {
    for (auto& v : p.value.data) v = static_cast<float>(v);
  });
}

}  // namespace mkg::xmodal
