#pragma once

#include "votesim/baseline1.hpp"
#include "votesim/csv.hpp"
#include "votesim/detector.hpp"
#include "votesim/error.hpp"
#include "votesim/experiment.hpp"
#include "votesim/fraud.hpp"
#include "votesim/kmeans.hpp"
#include "votesim/metrics.hpp"
#include "votesim/ocsvm.hpp"
#include "votesim/polling.hpp"
#include "votesim/population.hpp"
#include "votesim/random.hpp"
#include "votesim/regression.hpp"
#include "votesim/schema.hpp"
#include "votesim/simulation.hpp"
#include "votesim/votecast.hpp"
#include "votesim/io.hpp"
