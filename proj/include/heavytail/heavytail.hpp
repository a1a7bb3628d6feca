#pragma once
// Everything except the CLI front end.
#include "heavytail/baselines.hpp"
#include "heavytail/base_dist.hpp"
#include "heavytail/errors.hpp"
#include "heavytail/fit.hpp"
#include "heavytail/generated.hpp"
#include "heavytail/gof.hpp"
#include "heavytail/scenarios.hpp"
#include "heavytail/serialize.hpp"
#include "heavytail/series.hpp"
#include "heavytail/tail.hpp"
#include "heavytail/transform.hpp"
