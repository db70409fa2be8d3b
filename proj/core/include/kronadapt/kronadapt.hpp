// Copyright (c) 2026 The kronadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kronadapt/adapters.hpp"
#include "kronadapt/errors.hpp"
#include "kronadapt/io.hpp"
#include "kronadapt/kron.hpp"
#include "kronadapt/linalg.hpp"
#include "kronadapt/manifest.hpp"
#include "kronadapt/metrics.hpp"
#include "kronadapt/training.hpp"
