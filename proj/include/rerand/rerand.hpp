#pragma once

#include "rerand/assignments.hpp"
#include "rerand/balance.hpp"
#include "rerand/criteria.hpp"
#include "rerand/error.hpp"
#include "rerand/inference.hpp"
#include "rerand/rng.hpp"
#include "rerand/sampler.hpp"
#include "rerand/theory.hpp"
#include "rerand/version.hpp"
