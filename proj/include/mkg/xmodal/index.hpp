#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mkg/xmodal/model.hpp"

namespace mkg::xmodal {

// Image CLS embeddings, one row per image, immutable after construction.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  // Throws DuplicateId on a repeated id and InvalidConfig on shape mismatch
  // or non-finite values.
  EmbeddingIndex(std::vector<std::string> ids, std::vector<std::string> sources, Mat rows);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return rows_.cols; }
  const std::string& id(std::size_t row) const { return ids_[row]; }
  const std::string& source(std::size_t row) const { return sources_[row]; }
  const Mat& rows() const { return rows_; }
  std::span<const double> row(std::size_t r) const { return rows_.row(r); }

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> sources_;  // where the image was read from; may be empty
  Mat rows_;
};

struct IndexImage {
  std::string id;
  std::string source;
  RawImage image;
};

// Rows are computed in parallel; each equals encode_image(...).cls.
EmbeddingIndex build_index(const Encoders& enc, const std::vector<IndexImage>& images);

struct Hit {
  std::string id;
  double score = 0.0;

  bool operator==(const Hit&) const = default;
};

// Top-k rows by dot product with q, descending, ties by id ascending.
// Throws EmptyIndex; k is clipped to the index size.
std::vector<Hit> match_embedding(const EmbeddingIndex& index, std::span<const double> q, std::size_t k);
// One text forward followed by match_embedding.
std::vector<Hit> match(const Model& model, const EmbeddingIndex& index, const std::string& text, std::size_t k);

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path);
EmbeddingIndex load_index(const std::filesystem::path& path);

}  // namespace mkg::xmodal
