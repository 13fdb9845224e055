#pragma once

#include "dtdl/error.hpp"
#include "dtdl/rng.hpp"
#include "dtdl/parallel.hpp"
#include "dtdl/signal_data.hpp"
#include "dtdl/lstm_ae.hpp"
#include "dtdl/dictionary.hpp"
#include "dtdl/sparse_coder.hpp"
#include "dtdl/dictionary_learner.hpp"
#include "dtdl/model.hpp"
#include "dtdl/trainer.hpp"
#include "dtdl/disaggregator.hpp"
#include "dtdl/metrics.hpp"
#include "dtdl/baselines.hpp"
#include "dtdl/model_io.hpp"
#include "dtdl/gradcheck.hpp"
#include "dtdl/sweep.hpp"
#include "dtdl/cli.hpp"
