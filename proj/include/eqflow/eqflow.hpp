#pragma once

#include "eqflow/analysis.hpp"
#include "eqflow/assembly.hpp"
#include "eqflow/bipartite.hpp"
#include "eqflow/bipartite_problem.hpp"
#include "eqflow/connection.hpp"
#include "eqflow/errors.hpp"
#include "eqflow/feasibility.hpp"
#include "eqflow/io.hpp"
#include "eqflow/maxflow.hpp"
#include "eqflow/network.hpp"
