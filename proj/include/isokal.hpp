#pragma once

#include "isokal/config.hpp"
#include "isokal/csv.hpp"
#include "isokal/error.hpp"
#include "isokal/estimator.hpp"
#include "isokal/harness.hpp"
#include "isokal/linalg.hpp"
#include "isokal/model.hpp"
#include "isokal/observability.hpp"
#include "isokal/random.hpp"
#include "isokal/report.hpp"
#include "isokal/scalar.hpp"
#include "isokal/stability.hpp"
