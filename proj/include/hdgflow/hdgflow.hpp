/** \file hdgflow.hpp
 * \brief Umbrella header: the whole solver stack in one include.
 */
#pragma once

#include "hdgflow/core.hpp"
#include "hdgflow/gas.hpp"
#include "hdgflow/euler.hpp"
#include "hdgflow/viscous.hpp"
#include "hdgflow/jacobi.hpp"
#include "hdgflow/quadrature.hpp"
#include "hdgflow/reference_element.hpp"
#include "hdgflow/mesh.hpp"
#include "hdgflow/generators.hpp"
#include "hdgflow/geometry.hpp"
#include "hdgflow/riemann.hpp"
#include "hdgflow/boundary.hpp"
#include "hdgflow/shock.hpp"
#include "hdgflow/local_problem.hpp"
#include "hdgflow/condensation.hpp"
#include "hdgflow/assembler.hpp"
#include "hdgflow/newton.hpp"
#include "hdgflow/exact_solutions.hpp"
#include "hdgflow/verification.hpp"
#include "hdgflow/config.hpp"
#include "hdgflow/driver.hpp"
