#pragma once

#include "skr/ablation.hpp"
#include "skr/config.hpp"
#include "skr/embeddings_io.hpp"
#include "skr/encoder.hpp"
#include "skr/errors.hpp"
#include "skr/eval.hpp"
#include "skr/grad_check.hpp"
#include "skr/gradcheck_suite.hpp"
#include "skr/graph.hpp"
#include "skr/knowledge.hpp"
#include "skr/parallel.hpp"
#include "skr/pooling.hpp"
#include "skr/rng.hpp"
#include "skr/synthetic.hpp"
#include "skr/tensor.hpp"
#include "skr/trainer.hpp"
