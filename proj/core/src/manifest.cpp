// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kronadapt/manifest.hpp"

#include <unordered_set>

#include "kronadapt/errors.hpp"

namespace kronadapt {

const char* to_string(LayerGroup g) {
  switch (g) {
    case LayerGroup::Q: return "Q";
    case LayerGroup::K: return "K";
    case LayerGroup::V: return "V";
    case LayerGroup::O: return "O";
    case LayerGroup::other: return "other";
  }
  return "other";
}

LayerGroup layer_group_from_string(const std::string& s) {
  if (s == "Q") return LayerGroup::Q;
  if (s == "K") return LayerGroup::K;
  if (s == "V") return LayerGroup::V;
  if (s == "O") return LayerGroup::O;
  if (s == "other") return LayerGroup::other;
  throw ParseError("unknown layer group '" + s + "'");
}

void LayerManifest::validate() const {
  std::unordered_set<std::string> seen;
  for (const LayerEntry& layer : layers) {
    if (!seen.insert(layer.layer_name).second) {
      throw DuplicateLayer("duplicate layer name '" + layer.layer_name + "'");
    }
    if (layer.d < 1 || layer.h < 1) {
      throw NonPositiveDim("layer '" + layer.layer_name +
                           "' has non-positive dimension");
    }
  }
}

}  // namespace kronadapt
