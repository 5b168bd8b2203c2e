#pragma once

#include <fstream>
#include <iterator>
#include <string>

#include "lectio/document.hpp"

namespace lectio::bench {

// Shared benchmark corpus, loaded once.
inline const Document& corpus() {
  static const Document doc = [] {
    std::ifstream in(std::string(LECTIO_BENCH_DATA_DIR) + "/moby_dick.txt", std::ios::binary);
    return make_document("moby", std::string{std::istreambuf_iterator<char>(in), {}});
  }();
  return doc;
}

}  // namespace lectio::bench
