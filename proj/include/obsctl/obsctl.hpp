// Copyright 2026 The obsctl Authors
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

#ifndef OBSCTL_OBSCTL_HPP_
#define OBSCTL_OBSCTL_HPP_

#include "obsctl/augmented_model.hpp"
#include "obsctl/controllers.hpp"
#include "obsctl/error.hpp"
#include "obsctl/filter_backend.hpp"
#include "obsctl/harness.hpp"
#include "obsctl/integration.hpp"
#include "obsctl/linalg.hpp"
#include "obsctl/lqr_oracle.hpp"
#include "obsctl/measurement_modes.hpp"
#include "obsctl/plants.hpp"
#include "obsctl/scenarios.hpp"

#endif  // OBSCTL_OBSCTL_HPP_
