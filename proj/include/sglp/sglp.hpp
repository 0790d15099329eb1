// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sglp/activation_io.hpp"
#include "sglp/cka.hpp"
#include "sglp/error.hpp"
#include "sglp/fisher.hpp"
#include "sglp/json_io.hpp"
#include "sglp/matrix.hpp"
#include "sglp/pipeline.hpp"
#include "sglp/planner.hpp"
#include "sglp/rng.hpp"
#include "sglp/selfcheck.hpp"
#include "sglp/toynet.hpp"
