#pragma once

#include "colltherm/errors.hpp"
#include "colltherm/experiments.hpp"
#include "colltherm/inference.hpp"
#include "colltherm/likelihood.hpp"
#include "colltherm/linalg.hpp"
#include "colltherm/metrology.hpp"
#include "colltherm/quantum.hpp"
#include "colltherm/rng.hpp"
