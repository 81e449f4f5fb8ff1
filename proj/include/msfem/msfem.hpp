#pragma once

#include "msfem/analysis.hpp"
#include "msfem/coefficient.hpp"
#include "msfem/errors.hpp"
#include "msfem/fem.hpp"
#include "msfem/linear_solver.hpp"
#include "msfem/mesh.hpp"
#include "msfem/offline.hpp"
#include "msfem/parallel.hpp"
#include "msfem/quadrature.hpp"
#include "msfem/solvers.hpp"
