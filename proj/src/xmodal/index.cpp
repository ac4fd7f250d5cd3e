#include "mkg/xmodal/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "binio.hpp"
#include "mkg/error.hpp"
#include "mkg/kernels.hpp"
#include "mkg/xmodal/encoder.hpp"
#include "mkg/xmodal/train.hpp"

namespace mkg::xmodal {

namespace {
constexpr char kMagic[8] = {'M', 'K', 'G', 'X', 'I', 'N', 'D', 'X'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

EmbeddingIndex::EmbeddingIndex(std::vector<std::string> ids, std::vector<std::string> sources, Mat rows)
    : ids_(std::move(ids)), sources_(std::move(sources)), rows_(std::move(rows)) {
  if (sources_.empty()) sources_.assign(ids_.size(), "");
  if (rows_.rows != ids_.size() || sources_.size() != ids_.size())
    throw Error(ErrorCode::InvalidConfig, "index ids, sources and rows differ in count");
  std::unordered_set<std::string> seen;
  for (const auto& id : ids_)
    if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateId, "duplicate index id " + id);
  for (double v : rows_.data)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidConfig, "index row holds a non-finite value");
}

EmbeddingIndex build_index(const Encoders& enc, const std::vector<IndexImage>& images) {
  std::vector<PatchSequence> inputs;
  inputs.reserve(images.size());
  for (const auto& img : images) inputs.push_back(image_input(enc.cfg, img.image));
  const std::size_t d = enc.cfg.d_model;
  Mat rows(images.size(), d);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(inputs.size()); ++i) {
    const auto out = encode_image(enc, inputs[i]);
    std::copy(out.cls.begin(), out.cls.end(), rows.row(i).begin());
  }
  std::vector<std::string> ids, sources;
  for (const auto& img : images) {
    ids.push_back(img.id);
    sources.push_back(img.source);
  }
  return EmbeddingIndex(std::move(ids), std::move(sources), std::move(rows));
}

std::vector<Hit> match_embedding(const EmbeddingIndex& index, std::span<const double> q, std::size_t k) {
  if (index.size() == 0) throw Error(ErrorCode::EmptyIndex, "the embedding index is empty");
  if (q.size() != index.dim()) throw Error(ErrorCode::InvalidConfig, "query width differs from the index");
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
  std::vector<double> scores(index.size());
  kernels::matvec(index.rows(), q, scores);
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), 0);
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return index.id(a) < index.id(b);
                    });
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < k; ++i) hits.push_back({index.id(order[i]), scores[order[i]]});
  return hits;
}

std::vector<Hit> match(const Model& model, const EmbeddingIndex& index, const std::string& text, std::size_t k) {
  if (index.size() == 0) throw Error(ErrorCode::EmptyIndex, "the embedding index is empty");
  const auto out = encode_text(model.enc, text_input(model, text));
  return match_embedding(index, out.cls, k);
}

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(kMagic, 8);
  binio::put_u32(out, kVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(index.size()));
  binio::put_u32(out, static_cast<std::uint32_t>(index.dim()));
  for (std::size_t i = 0; i < index.size(); ++i) {
    binio::put_str(out, index.id(i));
    binio::put_str(out, index.source(i));
  }
  for (double v : index.rows().data) binio::put_f32(out, v);
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

EmbeddingIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  constexpr auto bad = ErrorCode::ParseError;
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw Error(bad, path.string() + " is not an index file");
  if (binio::get_u32(in, bad, "version") != kVersion) throw Error(bad, "unsupported index version");
  const std::uint32_t n = binio::get_u32(in, bad, "row count");
  const std::uint32_t d = binio::get_u32(in, bad, "dimension");
  std::vector<std::string> ids, sources;
  for (std::uint32_t i = 0; i < n; ++i) {
    ids.push_back(binio::get_str(in, bad, "id"));
    sources.push_back(binio::get_str(in, bad, "source"));
  }
  Mat rows(n, d);
  for (auto& v : rows.data) v = binio::get_f32(in, bad, "row data");
  return EmbeddingIndex(std::move(ids), std::move(sources), std::move(rows));
}

}  // namespace mkg::xmodal
