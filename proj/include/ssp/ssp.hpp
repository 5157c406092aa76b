#pragma once

#include "ssp/ablation.hpp"
#include "ssp/classify.hpp"
#include "ssp/feature_bank.hpp"
#include "ssp/gap.hpp"
#include "ssp/projectors.hpp"
#include "ssp/selectors.hpp"
#include "ssp/subspace.hpp"
#include "ssp/sweep.hpp"
#include "ssp/vmf.hpp"
