#pragma once

#include "gmmamp/amp.hpp"
#include "gmmamp/denoisers.hpp"
#include "gmmamp/errors.hpp"
#include "gmmamp/io.hpp"
#include "gmmamp/model.hpp"
#include "gmmamp/pca.hpp"
#include "gmmamp/phase_diagram.hpp"
#include "gmmamp/quadrature.hpp"
#include "gmmamp/rng.hpp"
#include "gmmamp/state_evolution.hpp"
#include "gmmamp/threading.hpp"
#include "gmmamp/version.hpp"
