// SPDX-License-Identifier: Apache-2.0
//
// ris-sostat: second-order statistics of RIS-assisted fading channels
// Copyright (C) 2026 The ris-sostat authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Everything except the command-line front end.
#include "ris_sostat/errors.hpp"
#include "ris_sostat/specfun.hpp"
#include "ris_sostat/channel.hpp"
#include "ris_sostat/analytic.hpp"
#include "ris_sostat/montecarlo.hpp"
