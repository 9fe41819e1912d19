#pragma once

#include "xcorr/csv.hpp"
#include "xcorr/error.hpp"
#include "xcorr/json_io.hpp"
#include "xcorr/mfdfa.hpp"
#include "xcorr/modes.hpp"
#include "xcorr/panel.hpp"
#include "xcorr/rng.hpp"
#include "xcorr/spectrum.hpp"
#include "xcorr/surrogate.hpp"
#include "xcorr/synth.hpp"
