// Cross-modal encoder: pretraining, index building, matching and timing.
#include <algorithm>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mkg/error.hpp"
#include "mkg/image.hpp"
#include "mkg/kg.hpp"
#include "mkg/xmodal/checkpoint.hpp"
#include "mkg/xmodal/index.hpp"
#include "mkg/xmodal/speed.hpp"
#include "mkg/xmodal/train.hpp"

using namespace mkg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

// images of any size are resampled to the model geometry
RawImage load_fitted(const fs::path& p, const xmodal::ModelConfig& cfg) {
  return fit_to(read_pnm(p), cfg.image_w, cfg.image_h, cfg.channels);
}

std::vector<xmodal::PairExample> read_pairs(const fs::path& path, const xmodal::ModelConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<xmodal::PairExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      fs::path img = j.at("image").get<std::string>();
      if (img.is_relative()) img = path.parent_path() / img;
      out.push_back({j.at("text").get<std::string>(), load_fitted(img, cfg)});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what(), lineno);
    }
  }
  return out;
}

bool is_pnm(const fs::path& p) { return p.extension() == ".pgm" || p.extension() == ".ppm"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stream image/text encoder"};
  app.require_subcommand(1);

  auto* pre = app.add_subcommand("pretrain", "pretrain on image-text pairs");
  std::string pairs, model_cfg, train_cfg, out, log_path;
  pre->add_option("--pairs", pairs, "pairs JSONL from the ingest tool")->required();
  pre->add_option("--model", model_cfg, "model config JSON");
  pre->add_option("--train", train_cfg, "training config JSON");
  pre->add_option("--out", out, "checkpoint file")->required();
  pre->add_option("--log", log_path, "per-epoch losses as JSONL");

  auto* idx = app.add_subcommand("index", "embed images into an index");
  std::string ckpt, images_dir, kg_path, index_out;
  idx->add_option("--checkpoint", ckpt)->required();
  auto* src_dir = idx->add_option("--images", images_dir, "directory of .pgm/.ppm files (id = file stem)");
  auto* src_kg = idx->add_option("--kg", kg_path, "KG JSONL; every Image entity is indexed under its id");
  src_dir->excludes(src_kg);
  idx->add_option("--out", index_out)->required();

  auto* mat = app.add_subcommand("match", "rank indexed images for a text");
  std::string index_path, text;
  std::size_t k = 10;
  mat->add_option("--checkpoint", ckpt)->required();
  mat->add_option("--index", index_path)->required();
  mat->add_option("--text", text)->required();
  mat->add_option("--k", k)->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "two-stream match vs single-stream scoring on the toy config");
  std::size_t candidates = 1000, repeats = 3;
  bench->add_option("--candidates", candidates)->check(CLI::PositiveNumber);
  bench->add_option("--repeats", repeats)->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*pre) {
      xmodal::ModelConfig cfg;
      if (!model_cfg.empty()) cfg = read_json(model_cfg).get<xmodal::ModelConfig>();
      xmodal::TrainConfig train;
      if (!train_cfg.empty()) train = read_json(train_cfg).get<xmodal::TrainConfig>();
      const auto corpus = read_pairs(pairs, cfg);
      std::ofstream log;
      if (!log_path.empty()) log.open(log_path);
      auto model = xmodal::pretrain(corpus, cfg, train, nullptr, [&](const xmodal::EpochLog& e) {
        json line = {{"epoch", e.epoch}, {"total", e.mean.total}, {"mlm", e.mean.mlm}, {"mpfr", e.mean.mpfr},
                     {"cmr", e.mean.cmr}};
        std::cerr << line.dump() << "\n";
        if (log) log << line.dump() << "\n";
      });
      xmodal::save_checkpoint(model, out);
    } else if (*idx) {
      const auto model = xmodal::load_checkpoint(ckpt);
      const auto& cfg = model.enc.cfg;
      std::vector<xmodal::IndexImage> images;
      if (!kg_path.empty()) {
        const auto kg = import_jsonl(kg_path);
        for (const auto& e : kg.entities()) {
          if (e.kind != EntityKind::Image) continue;
          const auto it = e.attributes.find(std::string(kImagePathAttr));
          if (it == e.attributes.end()) continue;
          fs::path p = it->second;
          if (p.is_relative()) p = fs::path(kg_path).parent_path() / p;
          images.push_back({e.id, p.string(), load_fitted(p, cfg)});
        }
      } else if (!images_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(images_dir))
          if (entry.is_regular_file() && is_pnm(entry.path())) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) images.push_back({f.stem().string(), f.string(), load_fitted(f, cfg)});
      } else {
        throw Error(ErrorCode::InvalidConfig, "give --images or --kg");
      }
      const auto index = xmodal::build_index(model.enc, images);
      xmodal::save_index(index, index_out);
      std::cout << json{{"images", index.size()}, {"dim", index.dim()}}.dump() << "\n";
    } else if (*mat) {
      const auto model = xmodal::load_checkpoint(ckpt);
      const auto index = xmodal::load_index(index_path);
      for (const auto& h : xmodal::match(model, index, text, k)) std::cout << h.id << "\t" << h.score << "\n";
    } else if (*bench) {
      const auto r = xmodal::compare_two_stream(xmodal::toy_config(), candidates, repeats, 1);
      std::cout << json{{"candidates", r.candidates},
                        {"match_seconds", r.match_seconds},
                        {"single_stream_seconds", r.joint_seconds},
                        {"index_build_seconds", r.index_seconds},
                        {"speedup", r.speedup()},
                        {"text_forwards", r.text_forwards},
                        {"image_forwards", r.image_forwards},
                        {"joint_forwards", r.joint_forwards}}
                       .dump(2)
                << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "xmodal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
