#pragma once

#include "fedcod/coding.hpp"
#include "fedcod/error.hpp"
#include "fedcod/protocol/aggregation.hpp"
#include "fedcod/protocol/download.hpp"
#include "fedcod/protocol/hierfl.hpp"
#include "fedcod/protocol/upload.hpp"
#include "fedcod/protocol/variant.hpp"
#include "fedcod/redundancy.hpp"
#include "fedcod/sim/experiment.hpp"
#include "fedcod/sim/metrics.hpp"
#include "fedcod/sim/network.hpp"
#include "fedcod/sim/round.hpp"
#include "fedcod/sim/topology.hpp"
#include "fedcod/wire.hpp"
#include "fedcod/report.hpp"
