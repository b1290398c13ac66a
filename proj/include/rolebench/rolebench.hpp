#pragma once

#include "rolebench/error.hpp"
#include "rolebench/config.hpp"
#include "rolebench/assets.hpp"
#include "rolebench/json_extract.hpp"
#include "rolebench/provider.hpp"
#include "rolebench/openai_provider.hpp"
#include "rolebench/template.hpp"
#include "rolebench/prompts.hpp"
#include "rolebench/transcript.hpp"
#include "rolebench/orchestrator.hpp"
#include "rolebench/judging.hpp"
#include "rolebench/artifact.hpp"
#include "rolebench/stats.hpp"
#include "rolebench/csv.hpp"
#include "rolebench/analytics.hpp"
#include "rolebench/report.hpp"
