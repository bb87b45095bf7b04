#pragma once

#include "common.hpp"
#include "coupling.hpp"
#include "csv.hpp"
#include "dictionary.hpp"
#include "distance.hpp"
#include "experiments.hpp"
#include "fdiff.hpp"
#include "generator.hpp"
#include "linalg.hpp"
#include "measure.hpp"
#include "minorization.hpp"
#include "model.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "quad.hpp"
#include "rng.hpp"
#include "seminorms.hpp"
#include "sets.hpp"
#include "simulate.hpp"
#include "skeleton.hpp"
#include "stats.hpp"
#include "validate.hpp"
