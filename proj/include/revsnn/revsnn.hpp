#pragma once

// Umbrella header for the reversible spiking network training engine.

#include "revsnn/bench.hpp"
#include "revsnn/config.hpp"
#include "revsnn/context.hpp"
#include "revsnn/data.hpp"
#include "revsnn/errors.hpp"
#include "revsnn/kernels.hpp"
#include "revsnn/layers.hpp"
#include "revsnn/memtrack.hpp"
#include "revsnn/models.hpp"
#include "revsnn/module.hpp"
#include "revsnn/neurons.hpp"
#include "revsnn/opcount.hpp"
#include "revsnn/reveng.hpp"
#include "revsnn/rng.hpp"
#include "revsnn/tape.hpp"
#include "revsnn/tensor.hpp"
#include "revsnn/train.hpp"
#include "revsnn/verify.hpp"
