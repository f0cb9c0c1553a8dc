#pragma once

// Umbrella header.
#include "metrograph/error.hpp"
#include "metrograph/graph.hpp"
#include "metrograph/model.hpp"
#include "metrograph/measure.hpp"
#include "metrograph/cpa.hpp"
#include "metrograph/laplacian.hpp"
#include "metrograph/kernel.hpp"
#include "metrograph/reference.hpp"
#include "metrograph/convergence.hpp"
#include "metrograph/io.hpp"
#include "metrograph/selftest.hpp"
