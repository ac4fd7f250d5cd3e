#include "doctest.h"
#include "mkg/tokenize.hpp"

using mkg::tokenize;
using V = std::vector<std::string>;

TEST_CASE("cjk characters are single tokens") {
  CHECK(tokenize("看看口红") == V{"看", "看", "口", "红"});
}

TEST_CASE("ascii words are lowercased and punctuation dropped") {
  CHECK(tokenize("Can I see the Lipstick?") == V{"can", "i", "see", "the", "lipstick"});
  CHECK(tokenize("T恤什么尺码？") == V{"t", "恤", "什", "么", "尺", "码"});
  CHECK(tokenize("S/M/L") == V{"s", "m", "l"});
}

TEST_CASE("empty and whitespace-only input") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("  \t ").empty());
  CHECK(tokenize("，。、").empty());
}
