// Cut, filter and pair long item images from a directory.
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mkg/error.hpp"
#include "mkg/ingest.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Extract image-text pairs from long item images"};
  std::string images, params, out;
  app.add_option("--images", images, "directory of .pgm/.ppm images (OCR in <image>.ocr.json)")->required();
  app.add_option("--params", params, "JSON with \"cut\" and \"filter\" sections");
  app.add_option("--out", out, "pairs JSONL; kept pieces are written next to it")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    const auto p = params.empty() ? mkg::ingest::PipelineParams{} : mkg::ingest::read_params(params);
    const auto r = mkg::ingest::run_pipeline(images, p, out);
    std::cout << nlohmann::json{{"images", r.images}, {"pieces", r.pieces}, {"kept", r.kept}, {"pairs", r.pairs}}.dump()
              << "\n";
  } catch (const mkg::Error& e) {
    std::cerr << "ingest: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
