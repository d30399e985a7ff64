#pragma once

#include "ddswitch/core.hpp"
#include "ddswitch/rng.hpp"
#include "ddswitch/linalg.hpp"
#include "ddswitch/grid.hpp"
#include "ddswitch/transforms.hpp"
#include "ddswitch/channel.hpp"
#include "ddswitch/equalizer.hpp"
#include "ddswitch/chanmodels.hpp"
#include "ddswitch/dataset.hpp"
#include "ddswitch/cnn.hpp"
#include "ddswitch/classifier.hpp"
#include "ddswitch/modem.hpp"
