#pragma once

#include "synthrel/corpus.hpp"
#include "synthrel/error.hpp"
#include "synthrel/eval/metrics.hpp"
#include "synthrel/eval/report.hpp"
#include "synthrel/eval/wilcoxon.hpp"
#include "synthrel/llm/client.hpp"
#include "synthrel/llm/mock.hpp"
#include "synthrel/llm/parsers.hpp"
#include "synthrel/llm/prompts.hpp"
#include "synthrel/pipeline/assemble.hpp"
#include "synthrel/pipeline/rebalance.hpp"
#include "synthrel/pipeline/stages.hpp"
#include "synthrel/retrieval.hpp"
#include "synthrel/templates.hpp"
