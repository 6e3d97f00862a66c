#pragma once

#include "sac/common.hpp"
#include "sac/correlation.hpp"
#include "sac/experiment.hpp"
#include "sac/fri.hpp"
#include "sac/image.hpp"
#include "sac/jpeg.hpp"
#include "sac/metrics.hpp"
#include "sac/output_matrix.hpp"
#include "sac/probe.hpp"
#include "sac/rng.hpp"
#include "sac/sha256.hpp"
#include "sac/verdict.hpp"
#include "sac/zoo/attacks.hpp"
#include "sac/zoo/dataset.hpp"
#include "sac/zoo/model.hpp"
#include "sac/zoo/train.hpp"
#include "sac/zoo/verifier.hpp"
