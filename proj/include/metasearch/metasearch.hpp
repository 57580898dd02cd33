#pragma once

#include "corpus.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "fusion.hpp"
#include "index.hpp"
#include "pipeline.hpp"
#include "porter.hpp"
#include "query.hpp"
#include "retrieval.hpp"
#include "run.hpp"
#include "tokenizer.hpp"
