#pragma once

#include <map>
#include <string>

#include "funnel/corpus.hpp"
#include "funnel/features.hpp"

namespace funnel {

// Aligned per-language embeddings for a generated corpus: every word is the
// translation of a shared latent concept, whose vector it inherits plus
// language-specific noise.
std::map<std::string, EmbeddingTable> generate_synthetic_embeddings(const SyntheticConfig& cfg);

// Reads a SyntheticConfig from JSON; missing fields keep their defaults.
SyntheticConfig synthetic_config_from_json_text(const std::string& text);

}  // namespace funnel
