#pragma once

#include "patchscan/delay.hpp"
#include "patchscan/error.hpp"
#include "patchscan/fixtures.hpp"
#include "patchscan/gitio.hpp"
#include "patchscan/patchmodel.hpp"
#include "patchscan/pipeline.hpp"
#include "patchscan/preprocess.hpp"
#include "patchscan/report.hpp"
#include "patchscan/search.hpp"
#include "patchscan/simcore.hpp"
#include "patchscan/timeutil.hpp"
#include "patchscan/verdict.hpp"
