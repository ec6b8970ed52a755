#pragma once

#include "cvxorder/black_scholes.hpp"
#include "cvxorder/coefficient.hpp"
#include "cvxorder/config.hpp"
#include "cvxorder/dynamics.hpp"
#include "cvxorder/errors.hpp"
#include "cvxorder/experiments.hpp"
#include "cvxorder/lattice.hpp"
#include "cvxorder/noise.hpp"
#include "cvxorder/operators.hpp"
#include "cvxorder/parallel.hpp"
#include "cvxorder/payoffs.hpp"
#include "cvxorder/quadrature.hpp"
#include "cvxorder/report.hpp"
#include "cvxorder/rng.hpp"
#include "cvxorder/runner.hpp"
#include "cvxorder/scalar_fn.hpp"
#include "cvxorder/snell.hpp"
#include "cvxorder/value_function.hpp"
