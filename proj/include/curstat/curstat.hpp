#pragma once

#include "curstat/bootstrap.hpp"
#include "curstat/csv.hpp"
#include "curstat/errors.hpp"
#include "curstat/isotonic.hpp"
#include "curstat/kernel.hpp"
#include "curstat/mathutil.hpp"
#include "curstat/mle.hpp"
#include "curstat/parallel.hpp"
#include "curstat/regression.hpp"
#include "curstat/rng.hpp"
#include "curstat/simulate.hpp"
#include "curstat/smle.hpp"
#include "curstat/types.hpp"
