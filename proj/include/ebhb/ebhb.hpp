#pragma once

#include "ebhb/errors.hpp"
#include "ebhb/rng.hpp"
#include "ebhb/dist.hpp"
#include "ebhb/optim.hpp"
#include "ebhb/normal_means.hpp"
#include "ebhb/tweedie_f.hpp"
#include "ebhb/npmle.hpp"
#include "ebhb/mcmc.hpp"
#include "ebhb/horseshoe.hpp"
#include "ebhb/polya_gamma.hpp"
#include "ebhb/mgps.hpp"
#include "ebhb/calibration.hpp"
#include "ebhb/pop_predictive.hpp"
#include "ebhb/bench.hpp"
#include "ebhb/io.hpp"
