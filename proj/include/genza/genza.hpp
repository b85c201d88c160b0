#pragma once

#include "genza/error.hpp"
#include "genza/model_catalog.hpp"
#include "genza/workload.hpp"
#include "genza/npu_roofline.hpp"
#include "genza/platform_collectives.hpp"
#include "genza/analyzer.hpp"
#include "genza/requirements.hpp"
#include "genza/report.hpp"
