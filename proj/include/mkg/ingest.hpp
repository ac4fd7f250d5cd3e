#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mkg/image.hpp"

namespace mkg::ingest {

struct OcrBlock {
  long x = 0, y = 0, w = 0, h = 0;
  std::string text;

  long area() const { return w * h; }
  bool operator==(const OcrBlock&) const = default;
};

struct CutParams {
  double aspect_trigger = 3.0;
  double gap_energy_threshold = 2.0;
  std::size_t min_gap_rows = 8;
  std::size_t min_segment_height = 32;

  void validate() const;
};

struct FilterParams {
  double max_text_area_ratio = 0.5;
  std::size_t max_block_count = 10;
  std::vector<std::string> banned_phrases;

  void validate() const;
};

enum class Verdict { pending, kept, dropped };

struct ImagePiece {
  RawImage image;
  std::size_t row_begin = 0;  // in the source image
  std::size_t row_end = 0;
  std::vector<OcrBlock> ocr;  // relative to the piece
  Verdict verdict = Verdict::pending;
  std::string reason;  // "text_area", "block_count" or "banned_phrase" when dropped
};

struct Pair {
  RawImage image;
  std::string text;
};

// Per-row mean absolute vertical gradient over columns and channels; the
// last row repeats the previous value. Throws DegenerateImage if height < 2.
std::vector<double> row_energy(const RawImage& img);

// Splits an overlong image at the middle of long low-energy row runs.
// Pieces always tile [0, height) in order.
std::vector<ImagePiece> cut_long_image(const RawImage& img, const CutParams& p,
                                       const std::vector<OcrBlock>& ocr = {});

// Cut positions only (the first row of every piece after the first).
std::vector<std::size_t> cut_rows(const RawImage& img, const CutParams& p);

// Assigns OCR blocks to the piece covering [begin, end): blocks are clipped
// to the piece and re-offset to piece coordinates; disjoint blocks dropped.
std::vector<OcrBlock> reoffset(const std::vector<OcrBlock>& blocks, std::size_t begin, std::size_t end,
                               std::size_t width);

ImagePiece filter_noise(ImagePiece piece, const FilterParams& f);

// Joins OCR text in reading order (top-to-bottom, then left-to-right).
std::string reading_order_text(std::vector<OcrBlock> blocks);

std::vector<Pair> build_pairs(const std::vector<ImagePiece>& pieces);

// OCR sidecar "<image>.ocr.json": {"blocks":[{"x","y","w","h","text"}]}.
std::vector<OcrBlock> read_ocr_sidecar(const std::filesystem::path& path, const RawImage& img);

struct PipelineParams {
  CutParams cut;
  FilterParams filter;
};
PipelineParams read_params(const std::filesystem::path& path);

struct PipelineReport {
  std::size_t images = 0;
  std::size_t pieces = 0;
  std::size_t kept = 0;
  std::size_t pairs = 0;
};

// Runs cut -> filter -> pair over every .pgm/.ppm in images_dir (sorted by
// name), writes kept pieces next to out_jsonl and one {"image","text"} line
// per pair.
PipelineReport run_pipeline(const std::filesystem::path& images_dir, const PipelineParams& params,
                            const std::filesystem::path& out_jsonl);

}  // namespace mkg::ingest
