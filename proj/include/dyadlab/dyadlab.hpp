#pragma once

#include "dyadlab/agents.hpp"
#include "dyadlab/analysis.hpp"
#include "dyadlab/equilibrium.hpp"
#include "dyadlab/error.hpp"
#include "dyadlab/extractor_accuracy.hpp"
#include "dyadlab/game.hpp"
#include "dyadlab/heatmap.hpp"
#include "dyadlab/ingest.hpp"
#include "dyadlab/llm/chat.hpp"
#include "dyadlab/llm/fake_model.hpp"
#include "dyadlab/llm/http_client.hpp"
#include "dyadlab/llm/labels.hpp"
#include "dyadlab/llm/pipeline.hpp"
#include "dyadlab/llm/prompts.hpp"
#include "dyadlab/matrix.hpp"
#include "dyadlab/phenotypes.hpp"
#include "dyadlab/runner.hpp"
#include "dyadlab/seeding.hpp"
