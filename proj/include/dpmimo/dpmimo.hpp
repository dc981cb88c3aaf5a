// SPDX-License-Identifier: Apache-2.0
//
// dpmimo - dual-polarized MIMO link-level simulation for rail tunnels
// Copyright (C) 2026 The dpmimo authors
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


#ifndef DPMIMO_DPMIMO_HPP
#define DPMIMO_DPMIMO_HPP

#include "dpmimo/common.hpp"
#include "dpmimo/estimation.hpp"
#include "dpmimo/gbsm.hpp"
#include "dpmimo/otfs.hpp"
#include "dpmimo/polarization.hpp"
#include "dpmimo/precoding.hpp"
#include "dpmimo/sim/channels.hpp"
#include "dpmimo/sim/config.hpp"
#include "dpmimo/sim/experiment.hpp"
#include "dpmimo/sim/export.hpp"

#endif
