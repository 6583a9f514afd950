// Copyright 2026 The dpbeamsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Everything at once.

#include "dpbeam/adversary.hpp"
#include "dpbeam/cbr.hpp"
#include "dpbeam/channel.hpp"
#include "dpbeam/cmatrix.hpp"
#include "dpbeam/common.hpp"
#include "dpbeam/dpq.hpp"
#include "dpbeam/givens.hpp"
#include "dpbeam/harness.hpp"
#include "dpbeam/link.hpp"
#include "dpbeam/rng.hpp"
