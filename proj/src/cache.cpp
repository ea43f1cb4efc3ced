#include "gfrag/cache.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace gfrag {
namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string entry_path(const std::string& key, const std::string& kind) {
  return cache_directory() + "/" + key + "." + kind + ".cache";
}

}  // namespace

std::string cache_directory() {
  if (const char* env = std::getenv("GFRAG_CACHE_DIR"); env && *env)
    return env;
  return ".gfrag-cache";
}

std::string scenario_cache_spec(const Scenario& s) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "growth=%s|absorption=%s|kernel=%s|space=%s:alpha=%.17g|"
                "grid=%.17g:%.17g:%d|initial=%s|tail_tol=%.17g",
                s.growth.name.c_str(), s.absorption.name.c_str(),
                s.kernel.name.c_str(), s.space.kind_name(), s.space.alpha,
                s.x_min, s.x_max, s.grid_n, s.initial_desc.c_str(),
                s.tail_tol);
  return buf;
}

std::string scenario_cache_key(const Scenario& s) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(scenario_cache_spec(s))));
  return buf;
}

bool cache_load(const std::string& key, const std::string& kind,
                const std::string& expect_spec, std::string& payload,
                std::string& warning) {
  const std::string path = entry_path(key, kind);
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::string spec;
  if (!std::getline(in, spec)) {
    warning = "cache entry " + path + " is truncated; rebuilding";
    return false;
  }
  if (spec != expect_spec) {
    warning = "cache entry " + path +
              " does not match the current spec (corrupt or hash collision); "
              "rebuilding";
    return false;
  }
  std::ostringstream rest;
  rest << in.rdbuf();
  payload = rest.str();
  if (payload.empty()) {
    warning = "cache entry " + path + " has no payload; rebuilding";
    return false;
  }
  return true;
}

void cache_store(const std::string& key, const std::string& kind,
                 const std::string& spec, const std::string& payload) {
  const std::string dir = cache_directory();
  std::error_code ec;
  fs::create_directories(dir, ec);  // best effort; write below reports errors
  const std::string path = entry_path(key, kind);
  const std::string tmp = path + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cache: cannot write " + tmp);
    out << spec << '\n' << payload;
    if (!out) throw std::runtime_error("cache: short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cache: cannot move " + tmp + " into place");
  }
}

int cache_clear() {
  const std::string dir = cache_directory();
  std::error_code ec;
  int removed = 0;
  for (auto it = fs::directory_iterator(dir, ec);
       !ec && it != fs::directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const std::string name = it->path().filename().string();
    if (name.size() > 6 && name.substr(name.size() - 6) == ".cache") {
      if (fs::remove(it->path(), ec)) ++removed;
    }
  }
  return removed;
}

std::vector<std::string> cache_list() {
  std::vector<std::string> names;
  std::error_code ec;
  for (auto it = fs::directory_iterator(cache_directory(), ec);
       !ec && it != fs::directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const std::string name = it->path().filename().string();
    if (name.size() > 6 && name.substr(name.size() - 6) == ".cache")
      names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace gfrag
