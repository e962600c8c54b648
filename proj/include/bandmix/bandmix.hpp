#pragma once

// Everything the library offers, for callers that do not want to pick headers.

#include "bandmix/audio.hpp"
#include "bandmix/bands.hpp"
#include "bandmix/checkpoint.hpp"
#include "bandmix/chunking.hpp"
#include "bandmix/data.hpp"
#include "bandmix/ensemble.hpp"
#include "bandmix/mask.hpp"
#include "bandmix/metrics.hpp"
#include "bandmix/model/separator.hpp"
#include "bandmix/objective.hpp"
#include "bandmix/optim.hpp"
#include "bandmix/run_config.hpp"
#include "bandmix/stft.hpp"
#include "bandmix/trainer.hpp"
