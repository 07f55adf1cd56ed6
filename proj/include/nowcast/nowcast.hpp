// Copyright 2026 The Nowcast Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NOWCAST_NOWCAST_HPP
#define NOWCAST_NOWCAST_HPP

#include "nowcast/binary_io.hpp"
#include "nowcast/checkpoint.hpp"
#include "nowcast/config.hpp"
#include "nowcast/conv.hpp"
#include "nowcast/data/codec.hpp"
#include "nowcast/data/dataset.hpp"
#include "nowcast/data/fetch.hpp"
#include "nowcast/data/frame.hpp"
#include "nowcast/data/png.hpp"
#include "nowcast/data/resize.hpp"
#include "nowcast/data/sequences.hpp"
#include "nowcast/data/synth.hpp"
#include "nowcast/error.hpp"
#include "nowcast/eval/gif.hpp"
#include "nowcast/eval/metrics.hpp"
#include "nowcast/eval/render.hpp"
#include "nowcast/eval/viridis.hpp"
#include "nowcast/model.hpp"
#include "nowcast/nn/batchnorm.hpp"
#include "nowcast/nn/convlstm.hpp"
#include "nowcast/nn/init.hpp"
#include "nowcast/nn/output_head.hpp"
#include "nowcast/optim.hpp"
#include "nowcast/run_config.hpp"
#include "nowcast/tensor.hpp"
#include "nowcast/training.hpp"

#endif  // NOWCAST_NOWCAST_HPP
