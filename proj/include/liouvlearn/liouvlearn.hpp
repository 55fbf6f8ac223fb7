// Copyright 2026 The liouvlearn Authors
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

#include "liouvlearn/errors.hpp"
#include "liouvlearn/pauli.hpp"
#include "liouvlearn/configuration.hpp"
#include "liouvlearn/coefficient_matrix.hpp"
#include "liouvlearn/liouvillian.hpp"
#include "liouvlearn/rng.hpp"
#include "liouvlearn/parallel.hpp"
#include "liouvlearn/simulator.hpp"
#include "liouvlearn/measurement.hpp"
#include "liouvlearn/learner.hpp"
#include "liouvlearn/rank_analysis.hpp"
#include "liouvlearn/workflow.hpp"
