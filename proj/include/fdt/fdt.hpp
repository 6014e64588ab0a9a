#pragma once

#include "fdt/error.hpp"
#include "fdt/graph.hpp"
#include "fdt/discrete.hpp"
#include "fdt/roles.hpp"
#include "fdt/identification.hpp"
#include "fdt/rng.hpp"
#include "fdt/parallel.hpp"
#include "fdt/dataset.hpp"
#include "fdt/glm.hpp"
#include "fdt/estimation.hpp"
#include "fdt/verma_tests.hpp"
#include "fdt/simulation.hpp"
