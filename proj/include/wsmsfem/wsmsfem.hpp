#pragma once

#include "analytic_1d.hpp"
#include "basis_cache.hpp"
#include "cells.hpp"
#include "coefficients.hpp"
#include "common.hpp"
#include "config.hpp"
#include "fem.hpp"
#include "field.hpp"
#include "homogenization.hpp"
#include "mesh.hpp"
#include "montecarlo.hpp"
#include "msfem.hpp"
#include "parallel.hpp"
#include "patch.hpp"
#include "quadrature.hpp"
#include "random.hpp"
#include "reference.hpp"
