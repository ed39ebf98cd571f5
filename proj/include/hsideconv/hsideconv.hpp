#pragma once

// Umbrella header for the whole library.

#include "hsideconv/b3ddn.hpp"
#include "hsideconv/cube.hpp"
#include "hsideconv/degradation.hpp"
#include "hsideconv/denoiser.hpp"
#include "hsideconv/errors.hpp"
#include "hsideconv/fft.hpp"
#include "hsideconv/io.hpp"
#include "hsideconv/kernel.hpp"
#include "hsideconv/metrics.hpp"
#include "hsideconv/rng.hpp"
#include "hsideconv/solver.hpp"
#include "hsideconv/synthetic.hpp"
#include "hsideconv/train.hpp"
#include "hsideconv/whiteness.hpp"
