#pragma once

#include "taguchi/error.hpp"
#include "taguchi/csv.hpp"
#include "taguchi/design.hpp"
#include "taguchi/response.hpp"
#include "taguchi/snr.hpp"
#include "taguchi/special.hpp"
#include "taguchi/analysis.hpp"
#include "taguchi/store.hpp"
#include "taguchi/orchestrate.hpp"
#include "taguchi/report.hpp"
#include "taguchi/config.hpp"
