/*
 * Copyright 2026 The cmpdict Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "cmpdict/bench.hpp"
#include "cmpdict/config.hpp"
#include "cmpdict/conv_mp.hpp"
#include "cmpdict/core.hpp"
#include "cmpdict/dict_learn.hpp"
#include "cmpdict/error.hpp"
#include "cmpdict/feature_pipeline.hpp"
#include "cmpdict/model_io.hpp"
#include "cmpdict/parallel.hpp"
#include "cmpdict/patch_mp.hpp"
#include "cmpdict/preprocess.hpp"
