// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kronadapt {

/// Which attention projection a layer belongs to, for budget breakdowns.
enum class LayerGroup { Q, K, V, O, other };

const char* to_string(LayerGroup g);
LayerGroup layer_group_from_string(const std::string& s);

struct LayerEntry {
  std::string layer_name;
  std::int64_t d = 0;  // output dimension of W in R^{d x h}
  std::int64_t h = 0;  // input dimension
  LayerGroup group = LayerGroup::other;
};

/// Named collection of adapted weight matrices, used for parameter-budget
/// planning. Layer names are unique and dimensions positive; validate()
/// enforces both.
struct LayerManifest {
  std::string name;
  std::vector<LayerEntry> layers;

  /// Throws DuplicateLayer / NonPositiveDim on violation.
  void validate() const;
};

}  // namespace kronadapt
