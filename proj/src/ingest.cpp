#include "mkg/ingest.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "mkg/error.hpp"

namespace mkg::ingest {

using nlohmann::json;

void CutParams::validate() const {
  if (!(aspect_trigger > 0) || !(gap_energy_threshold > 0) || min_gap_rows < 1 || min_segment_height < 1)
    throw Error(ErrorCode::InvalidConfig, "cut parameters must be positive");
}

void FilterParams::validate() const {
  if (!(max_text_area_ratio >= 0 && max_text_area_ratio <= 1))
    throw Error(ErrorCode::InvalidConfig, "max_text_area_ratio must lie in [0,1]");
}

std::vector<double> row_energy(const RawImage& img) {
  img.validate();
  if (img.height < 2) throw Error(ErrorCode::DegenerateImage, "row energy needs at least 2 rows");
  const std::size_t stride = img.width * img.channels;
  std::vector<double> energy(img.height);
  for (std::size_t r = 0; r + 1 < img.height; ++r) {
    const std::uint8_t* a = img.pixels.data() + r * stride;
    const std::uint8_t* b = a + stride;
    long sum = 0;
    for (std::size_t i = 0; i < stride; ++i) sum += std::abs(static_cast<int>(b[i]) - static_cast<int>(a[i]));
    energy[r] = static_cast<double>(sum) / static_cast<double>(stride);
  }
  energy[img.height - 1] = energy[img.height - 2];
  return energy;
}

std::vector<std::size_t> cut_rows(const RawImage& img, const CutParams& p) {
  p.validate();
  img.validate();
  if (img.height < 2) throw Error(ErrorCode::DegenerateImage, "cannot cut a single-row image");
  if (static_cast<double>(img.height) / static_cast<double>(img.width) <= p.aspect_trigger) return {};

  const auto energy = row_energy(img);
  std::vector<std::size_t> cuts;
  std::size_t r = 0;
  while (r < energy.size()) {
    if (energy[r] >= p.gap_energy_threshold) {
      ++r;
      continue;
    }
    const std::size_t start = r;
    while (r < energy.size() && energy[r] < p.gap_energy_threshold) ++r;
    const std::size_t len = r - start;
    const std::size_t mid = start + len / 2;
    if (len >= p.min_gap_rows && mid > 0) cuts.push_back(mid);
  }

  // Fold short segments into their predecessor (the first one into its
  // successor) until every segment is tall enough or only one remains.
  for (bool changed = true; changed && !cuts.empty();) {
    changed = false;
    std::vector<std::size_t> bounds{0};
    bounds.insert(bounds.end(), cuts.begin(), cuts.end());
    bounds.push_back(img.height);
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
      if (bounds[i + 1] - bounds[i] >= p.min_segment_height) continue;
      cuts.erase(cuts.begin() + static_cast<std::ptrdiff_t>(i == 0 ? 0 : i - 1));
      changed = true;
      break;
    }
  }
  return cuts;
}

std::vector<OcrBlock> reoffset(const std::vector<OcrBlock>& blocks, std::size_t begin, std::size_t end,
                               std::size_t width) {
  std::vector<OcrBlock> out;
  const long b = static_cast<long>(begin), e = static_cast<long>(end);
  for (const auto& blk : blocks) {
    const long top = std::max(blk.y, b), bottom = std::min(blk.y + blk.h, e);
    if (bottom <= top) continue;
    OcrBlock o = blk;
    o.y = top - b;
    o.h = bottom - top;
    o.x = std::clamp(blk.x, 0L, static_cast<long>(width));
    o.w = std::min(blk.x + blk.w, static_cast<long>(width)) - o.x;
    if (o.w <= 0) continue;
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<ImagePiece> cut_long_image(const RawImage& img, const CutParams& p, const std::vector<OcrBlock>& ocr) {
  const auto cuts = cut_rows(img, p);
  std::vector<std::size_t> bounds{0};
  bounds.insert(bounds.end(), cuts.begin(), cuts.end());
  bounds.push_back(img.height);

  std::vector<ImagePiece> pieces;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    ImagePiece piece;
    piece.row_begin = bounds[i];
    piece.row_end = bounds[i + 1];
    piece.image = img.crop_rows(piece.row_begin, piece.row_end);
    piece.ocr = reoffset(ocr, piece.row_begin, piece.row_end, img.width);
    pieces.push_back(std::move(piece));
  }
  return pieces;
}

ImagePiece filter_noise(ImagePiece piece, const FilterParams& f) {
  long text_area = 0;
  for (const auto& b : piece.ocr) text_area += b.area();
  const double piece_area = static_cast<double>(piece.image.width * piece.image.height);

  piece.verdict = Verdict::dropped;
  if (static_cast<double>(text_area) / piece_area > f.max_text_area_ratio) {
    piece.reason = "text_area";
  } else if (piece.ocr.size() > f.max_block_count) {
    piece.reason = "block_count";
  } else if (std::any_of(piece.ocr.begin(), piece.ocr.end(), [&](const OcrBlock& b) {
               return std::any_of(f.banned_phrases.begin(), f.banned_phrases.end(), [&](const std::string& phrase) {
                 return !phrase.empty() && b.text.find(phrase) != std::string::npos;
               });
             })) {
    piece.reason = "banned_phrase";
  } else {
    piece.verdict = Verdict::kept;
    piece.reason.clear();
  }
  return piece;
}

std::string reading_order_text(std::vector<OcrBlock> blocks) {
  std::stable_sort(blocks.begin(), blocks.end(),
                   [](const OcrBlock& a, const OcrBlock& b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
  std::string out;
  for (const auto& b : blocks) {
    if (!out.empty()) out += ' ';
    out += b.text;
  }
  return out;
}

std::vector<Pair> build_pairs(const std::vector<ImagePiece>& pieces) {
  std::vector<Pair> out;
  for (const auto& piece : pieces) {
    if (piece.verdict != Verdict::kept || piece.ocr.empty()) continue;
    out.push_back({piece.image, reading_order_text(piece.ocr)});
  }
  return out;
}

std::vector<OcrBlock> read_ocr_sidecar(const std::filesystem::path& path, const RawImage& img) {
  std::ifstream in(path);
  if (!in) return {};
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  std::vector<OcrBlock> out;
  for (const auto& b : j.at("blocks")) {
    OcrBlock blk{b.at("x").get<long>(), b.at("y").get<long>(), b.at("w").get<long>(), b.at("h").get<long>(),
                 b.at("text").get<std::string>()};
    if (blk.text.empty()) throw Error(ErrorCode::ParseError, path.string() + ": empty OCR text");
    if (blk.x < 0 || blk.y < 0 || blk.w <= 0 || blk.h <= 0 || blk.x + blk.w > static_cast<long>(img.width) ||
        blk.y + blk.h > static_cast<long>(img.height))
      throw Error(ErrorCode::ParseError, path.string() + ": OCR block outside image bounds");
    out.push_back(std::move(blk));
  }
  return out;
}

PipelineParams read_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  PipelineParams p;
  json j;
  try {
    j = json::parse(in);
    if (auto c = j.find("cut"); c != j.end()) {
      p.cut.aspect_trigger = c->value("aspect_trigger", p.cut.aspect_trigger);
      p.cut.gap_energy_threshold = c->value("gap_energy_threshold", p.cut.gap_energy_threshold);
      p.cut.min_gap_rows = c->value("min_gap_rows", p.cut.min_gap_rows);
      p.cut.min_segment_height = c->value("min_segment_height", p.cut.min_segment_height);
    }
    if (auto f = j.find("filter"); f != j.end()) {
      p.filter.max_text_area_ratio = f->value("max_text_area_ratio", p.filter.max_text_area_ratio);
      p.filter.max_block_count = f->value("max_block_count", p.filter.max_block_count);
      p.filter.banned_phrases = f->value("banned_phrases", p.filter.banned_phrases);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  p.cut.validate();
  p.filter.validate();
  return p;
}

PipelineReport run_pipeline(const std::filesystem::path& images_dir, const PipelineParams& params,
                            const std::filesystem::path& out_jsonl) {
  namespace fs = std::filesystem;
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(images_dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());

  const fs::path out_dir = out_jsonl.has_parent_path() ? out_jsonl.parent_path() : fs::path(".");
  fs::create_directories(out_dir);
  std::ofstream out(out_jsonl);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + out_jsonl.string());

  PipelineReport report;
  for (const auto& path : inputs) {
    const RawImage img = read_pnm(path);
    const auto ocr = read_ocr_sidecar(fs::path(path.string() + ".ocr.json"), img);
    auto pieces = cut_long_image(img, params.cut, ocr);
    ++report.images;
    report.pieces += pieces.size();
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      ImagePiece piece = filter_noise(std::move(pieces[k]), params.filter);
      if (piece.verdict != Verdict::kept) continue;
      ++report.kept;
      if (piece.ocr.empty()) continue;
      const std::string name = path.stem().string() + "_p" + std::to_string(k) + path.extension().string();
      write_pnm(piece.image, out_dir / name);
      out << json{{"image", name}, {"text", reading_order_text(piece.ocr)}}.dump() << '\n';
      ++report.pairs;
    }
  }
  return report;
}

}  // namespace mkg::ingest
