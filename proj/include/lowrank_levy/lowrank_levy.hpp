#pragma once

#include "config.hpp"
#include "design.hpp"
#include "errors.hpp"
#include "frequency.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "laplace.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "sim.hpp"
#include "solver.hpp"
#include "spectral.hpp"
