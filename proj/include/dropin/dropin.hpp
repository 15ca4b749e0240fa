#pragma once

#include "dropin/error.hpp"
#include "dropin/rng.hpp"
#include "dropin/logistic.hpp"
#include "dropin/scenario.hpp"
#include "dropin/cohort.hpp"
#include "dropin/ipw.hpp"
#include "dropin/strategies.hpp"
#include "dropin/metrics.hpp"
#include "dropin/harness.hpp"
#include "dropin/config.hpp"
