#pragma once

#include <string>
#include <vector>

#include "gfrag/scenario.hpp"

namespace gfrag {

// File cache for derived analysis reports, keyed by a hash of the model
// specification (growth/absorption/kernel names with parameters, grid
// window, space).  Stale entries are impossible by construction: a changed
// spec changes the key.  Writes go through a temp file + rename so
// concurrent runs never observe partial entries.

// $GFRAG_CACHE_DIR when set, otherwise .gfrag-cache in the working dir.
std::string cache_directory();

// Canonical spec string + FNV-1a hash of it; the hash names the file, the
// string is embedded for corruption/collision detection.
std::string scenario_cache_spec(const Scenario& s);
std::string scenario_cache_key(const Scenario& s);

// Loads a cached payload.  Returns false when absent.  A present-but-corrupt
// entry (spec line mismatch, unreadable) also returns false and sets
// `warning`, so callers rebuild transparently.
bool cache_load(const std::string& key, const std::string& kind,
                const std::string& expect_spec, std::string& payload,
                std::string& warning);

void cache_store(const std::string& key, const std::string& kind,
                 const std::string& spec, const std::string& payload);

// Removes every cache entry; returns the number removed.
int cache_clear();

// Entry file names currently present (sorted).
std::vector<std::string> cache_list();

}  // namespace gfrag
