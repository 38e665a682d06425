// Copyright 2026 The wsirisk Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Umbrella include for the whole library.

#include "wsirisk/augment.hpp"
#include "wsirisk/checkpoint.hpp"
#include "wsirisk/common.hpp"
#include "wsirisk/config.hpp"
#include "wsirisk/explain.hpp"
#include "wsirisk/image.hpp"
#include "wsirisk/labeling.hpp"
#include "wsirisk/losses.hpp"
#include "wsirisk/manifest.hpp"
#include "wsirisk/metrics.hpp"
#include "wsirisk/nn.hpp"
#include "wsirisk/paper_tables.hpp"
#include "wsirisk/parallel.hpp"
#include "wsirisk/png_io.hpp"
#include "wsirisk/report.hpp"
#include "wsirisk/rng.hpp"
#include "wsirisk/runner.hpp"
#include "wsirisk/slide.hpp"
#include "wsirisk/synthgen.hpp"
#include "wsirisk/tensor.hpp"
#include "wsirisk/train.hpp"
